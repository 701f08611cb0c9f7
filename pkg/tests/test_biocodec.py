import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adrex.biocodec import (
    SpanCrossesSentence, TagLabel, decode, encode, format_conll, parse_conll, project_document,
    repair, roundtrip_report, tag_set,
)
from adrex.corpus import AnnotatedDocument, Corpus, Span
from adrex.errors import ValidationError
from adrex.tokenizer import split_sentences

from synth import bio_corpus, lexicon_corpus


def sent(text):
    (s,) = split_sentences(text)
    return s


def tok_span(sentence, label, *groups):
    """Span whose fragments cover the given token index ranges (inclusive)."""
    toks = sentence.tokens
    return Span.of(label, *[(toks[a].start, toks[b].end) for a, b in groups])


def test_tag_label_parse():
    assert TagLabel.parse("DB-ADR") == TagLabel("DB", "ADR")
    assert TagLabel.parse("O") == TagLabel("O", None)
    with pytest.raises(ValidationError):
        TagLabel.parse("X-ADR")
    with pytest.raises(ValidationError):
        TagLabel.parse("B")


def test_tag_set_order():
    assert tag_set(["Drug", "ADR"])[:3] == ["O", "B-ADR", "I-ADR"]
    assert len(tag_set(["Drug", "ADR"])) == 13


def test_encode_continuous():
    s = sent("I have severe pain")
    assert encode(s, [tok_span(s, "ADR", (2, 3))]).tags == ["O", "O", "B-ADR", "I-ADR"]


def test_encode_shared_head():
    s = sent("pain in arm and leg")
    spans = [tok_span(s, "ADR", (0, 0), (2, 2)), tok_span(s, "ADR", (0, 0), (4, 4))]
    res = encode(s, spans)
    assert res.tags == ["HB-ADR", "O", "DB-ADR", "O", "DB-ADR"]
    assert not res.warnings


def test_encode_lone_discontinuous():
    s = sent("pain in arm")
    assert encode(s, [tok_span(s, "ADR", (0, 0), (2, 2))]).tags == ["DB-ADR", "O", "DB-ADR"]


def test_decode_continuous():
    s = sent("I have severe pain")
    assert decode(s, ["O", "O", "B-ADR", "I-ADR"]).spans == [tok_span(s, "ADR", (2, 3))]


def test_decode_shared_head():
    s = sent("pain in arm and leg")
    spans = decode(s, ["HB-ADR", "O", "DB-ADR", "O", "DB-ADR"]).spans
    assert spans == [tok_span(s, "ADR", (0, 0), (2, 2)), tok_span(s, "ADR", (0, 0), (4, 4))]


def test_two_lone_discontinuous_spans_merge():
    s = sent("a x b y c x d")
    gold = [tok_span(s, "ADR", (0, 0), (2, 2)), tok_span(s, "ADR", (4, 4), (6, 6))]
    res = encode(s, gold)
    assert res.warnings  # the configuration is known to be lossy
    assert decode(s, res.tags).spans == [tok_span(s, "ADR", (0, 0), (2, 2), (4, 4), (6, 6))]


def test_multi_token_fragments_and_classes_are_kept_apart():
    s = sent("Lipitor gave severe muscle pain in my left arm")
    gold = [tok_span(s, "Drug", (0, 0)), tok_span(s, "ADR", (3, 4), (7, 8))]
    res = encode(s, gold)
    assert res.tags == ["B-Drug", "O", "O", "DB-ADR", "DI-ADR", "O", "O", "DB-ADR", "DI-ADR"]
    assert decode(s, res.tags).spans == sorted(gold, key=lambda x: x.key)


def test_repair_orphans():
    fixed, n = repair(["I-ADR", "O", "DI-ADR", "HI-Drug", "B-ADR", "I-Drug"])
    assert fixed == ["B-ADR", "O", "DB-ADR", "HB-Drug", "B-ADR", "B-Drug"]
    assert n == 4


def test_repair_keeps_valid_sequences():
    tags = ["B-ADR", "I-ADR", "O", "DB-ADR", "DI-ADR", "HB-ADR", "HI-ADR"]
    assert repair(tags) == (tags, 0)


def test_decode_counts_repairs():
    s = sent("a b c")
    res = decode(s, ["O", "I-ADR", "I-ADR"])
    assert res.repairs == 1
    assert res.spans == [tok_span(s, "ADR", (1, 2))]


def test_decode_length_mismatch():
    with pytest.raises(ValidationError):
        decode(sent("a b"), ["O"])


def test_encode_rejects_span_outside_sentence():
    s1, s2 = split_sentences("a b. c d.")
    with pytest.raises(SpanCrossesSentence):
        encode(s1, [Span.of("ADR", (s1.start, s2.end))])


def test_crossing_span_reported_as_missing():
    doc = AnnotatedDocument("x", "I hurt. Then pain.", (Span.of("ADR", (2, 12)),))
    counts = roundtrip_report(Corpus((doc,)))
    assert (counts.tp, counts.fp, counts.fn) == (0, 0, 1)
    assert counts.deviations[0].crossing == list(doc.spans)


def test_roundtrip_itemizes_deviations():
    text = "a x b y c x d."
    s = sent(text)
    gold = (tok_span(s, "ADR", (0, 0), (2, 2)), tok_span(s, "ADR", (4, 4), (6, 6)))
    counts = roundtrip_report(Corpus((AnnotatedDocument("m", text, gold),)))
    assert (counts.tp, counts.fp, counts.fn) == (0, 1, 2)
    dev = counts.deviations[0]
    assert dev.doc_id == "m" and len(dev.missing) == 2 and len(dev.spurious) == 1


def test_continuous_only_roundtrip_is_lossless():
    counts = roundtrip_report(lexicon_corpus(300, seed=4))
    assert counts.fp == counts.fn == 0
    assert counts.tp > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_single_group_roundtrip_is_lossless(seed):
    corpus = bio_corpus(20, seed=seed)
    counts = roundtrip_report(corpus)
    assert counts.fp == counts.fn == 0, counts.deviations[:1]


_tags = st.sampled_from(tag_set(["ADR", "Drug"]))


@settings(max_examples=200, deadline=None)
@given(st.lists(_tags, min_size=1, max_size=8))
def test_decode_encode_is_idempotent(tags):
    s = sent(" ".join(f"w{i}" for i in range(len(tags))))
    once = decode(s, tags).spans
    twice = decode(s, encode(s, once).tags).spans
    assert decode(s, encode(s, twice).tags).spans == twice


@settings(max_examples=200, deadline=None)
@given(st.lists(_tags, min_size=1, max_size=8))
def test_decoded_overlaps_only_share_fragments(tags):
    s = sent(" ".join(f"w{i}" for i in range(len(tags))))
    spans = decode(s, tags).spans
    for i, a in enumerate(spans):
        for b in spans[i + 1:]:
            for fa in a.fragments:
                for fb in b.fragments:
                    if fa.start < fb.end and fb.start < fa.end:
                        assert fa == fb


def test_encode_deterministic():
    doc = bio_corpus(5, seed=9).documents[0]
    assert project_document(doc) == project_document(doc)


def test_conll_roundtrip():
    corpus = bio_corpus(10, seed=2)
    projections = [project_document(d) for d in corpus]
    parsed = parse_conll(format_conll(projections))
    flat = [(sp.sentence, sp.tags) for p in projections for sp in p.sentences]
    assert [(s.tokens, t) for s, t in parsed] == [(s.tokens, t) for s, t in flat]
