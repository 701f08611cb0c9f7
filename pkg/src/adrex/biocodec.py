"""Extended BIO tagging for continuous and discontinuous spans.

Tag prefixes:

``B``/``I``
    continuous span.
``DB``/``DI``
    token of exactly one discontinuous span. Every fragment opens with ``DB``.
``HB``/``HI``
    token of a fragment shared by several discontinuous spans (the head).
``O``
    everything else.

Decoding works per sentence and per class. If head fragments are present,
every ``D`` fragment becomes one span together with all head fragments.
Otherwise all ``D`` fragments of the class merge into a single span. Several
independent discontinuous spans in one sentence therefore come back merged;
the round-trip report measures how often that happens.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import AnnotatedDocument, Corpus, Fragment, Span, span_sort_key
from .errors import ParseError, ValidationError
from .tokenizer import Sentence, Token, split_sentences

log = logging.getLogger(__name__)

OUTSIDE = "O"
PREFIXES = ("B", "I", "DB", "DI", "HB", "HI")
_BEGIN_OF = {"I": "B", "DI": "DB", "HI": "HB"}


@dataclass(frozen=True)
class TagLabel:
    prefix: str
    label: str | None = None

    def __post_init__(self):
        if self.prefix == OUTSIDE:
            if self.label is not None:
                raise ValidationError("O carries no entity class")
        elif self.prefix not in PREFIXES or not self.label:
            raise ValidationError(f"bad tag {self.prefix}-{self.label}")

    def __str__(self) -> str:
        return OUTSIDE if self.prefix == OUTSIDE else f"{self.prefix}-{self.label}"

    @classmethod
    def parse(cls, tag: str) -> TagLabel:
        if tag == OUTSIDE:
            return cls(OUTSIDE)
        prefix, sep, label = tag.partition("-")
        if not sep:
            raise ValidationError(f"unparseable tag {tag!r}")
        return cls(prefix, label)


def tag_set(labels: Iterable[str]) -> list[str]:
    """Fixed tag order: ``O`` first, then the six prefixes for each sorted class."""
    return [OUTSIDE] + [f"{p}-{lab}" for lab in sorted(set(labels)) for p in PREFIXES]


@dataclass
class EncodeResult:
    tags: list[str]
    warnings: list[str] = field(default_factory=list)


class SpanCrossesSentence(ValidationError):
    pass


def _token_runs(sentence: Sentence, span: Span) -> list[tuple[int, ...]]:
    """Token indices touched by each fragment; fragments that touch no token are dropped."""
    runs = []
    for frag in span.fragments:
        idx = tuple(i for i, t in enumerate(sentence.tokens)
                    if t.start < frag.end and frag.start < t.end)
        if idx:
            runs.append(idx)
    return runs


def encode(sentence: Sentence, spans: Sequence[Span]) -> EncodeResult:
    """Tag one sentence. Configurations the scheme cannot express produce warnings."""
    n = len(sentence.tokens)
    tags: list[str | None] = [None] * n
    warnings: list[str] = []

    for span in spans:
        if span.start < sentence.start or span.end > sentence.end:
            raise SpanCrossesSentence(
                f"span {span.key} crosses sentence [{sentence.start},{sentence.end})"
            )

    def put(i: int, tag: str) -> None:
        if tags[i] is not None and tags[i] != tag:
            warnings.append(f"token {i} already tagged {tags[i]}, dropping {tag}")
            return
        tags[i] = tag

    ordered = sorted(spans, key=span_sort_key)
    disc = [s for s in ordered if s.is_discontinuous]
    cont = [s for s in ordered if not s.is_discontinuous]

    # fragments used by two or more discontinuous spans are heads
    usage = Counter((f, s.label) for s in disc for f in set(s.fragments))
    heads = {key for key, c in usage.items() if c > 1}

    for span in cont:
        runs = _token_runs(sentence, span)
        if not runs:
            warnings.append(f"span {span.key} covers no token")
            continue
        for k, i in enumerate(runs[0]):
            put(i, f"{'B' if k == 0 else 'I'}-{span.label}")

    head_groups: dict[str, set] = defaultdict(set)
    lone_by_label: Counter = Counter()
    for span in disc:
        own = [f for f in span.fragments if (f, span.label) not in heads]
        shared = [f for f in span.fragments if (f, span.label) in heads]
        if shared:
            head_groups[span.label].add(tuple(shared))
            if len(own) != 1:
                warnings.append(f"span {span.key} has {len(own)} non-head fragments")
        else:
            lone_by_label[span.label] += 1
        for frag in span.fragments:
            prefix = "H" if (frag, span.label) in heads else "D"
            piece = Span((frag,), span.label)
            for run in _token_runs(sentence, piece):
                for k, i in enumerate(run):
                    put(i, f"{prefix}{'B' if k == 0 else 'I'}-{span.label}")

    for label in sorted(set(head_groups) | set(lone_by_label)):
        groups = len(head_groups.get(label, ())) + lone_by_label.get(label, 0)
        if groups > 1:
            warnings.append(f"{groups} discontinuous groups of class {label} in one sentence")

    for w in warnings:
        log.debug("lossy encoding: %s", w)
    return EncodeResult([t if t is not None else OUTSIDE for t in tags], warnings)


@dataclass
class DecodeResult:
    spans: list[Span]
    repairs: int = 0


def repair(tags: Sequence[str]) -> tuple[list[str], int]:
    """Promote inside tags that do not continue a run of the same kind to begin tags."""
    fixed: list[str] = []
    repairs = 0
    prev = OUTSIDE
    for tag in tags:
        tl = TagLabel.parse(tag)
        if tl.prefix in _BEGIN_OF:
            begin = _BEGIN_OF[tl.prefix]
            if prev not in (f"{begin}-{tl.label}", f"{tl.prefix}-{tl.label}"):
                tag = f"{begin}-{tl.label}"
                repairs += 1
        fixed.append(tag)
        prev = tag
    return fixed, repairs


def decode(sentence: Sentence, tags: Sequence[str]) -> DecodeResult:
    if len(tags) != len(sentence.tokens):
        raise ValidationError(f"{len(tags)} tags for {len(sentence.tokens)} tokens")
    tags, repairs = repair(tags)
    toks = sentence.tokens

    # runs: (kind, label, first token, last token)
    runs: list[tuple[str, str, int, int]] = []
    for i, tag in enumerate(tags):
        if tag == OUTSIDE:
            continue
        tl = TagLabel.parse(tag)
        if tl.prefix in ("B", "DB", "HB"):
            runs.append((tl.prefix[:-1] or "C", tl.label, i, i))
        else:
            kind, label, first, _ = runs[-1]
            runs[-1] = (kind, label, first, i)

    spans: list[Span] = []
    heads: dict[str, list[Fragment]] = defaultdict(list)
    dfrags: dict[str, list[Fragment]] = defaultdict(list)
    for kind, label, first, last in runs:
        frag = Fragment(toks[first].start, toks[last].end)
        if kind == "C":
            spans.append(Span((frag,), label))
        elif kind == "H":
            heads[label].append(frag)
        else:
            dfrags[label].append(frag)

    for label in sorted(set(heads) | set(dfrags)):
        h, d = heads.get(label, []), dfrags.get(label, [])
        if h and d:
            for frag in d:
                spans.append(Span(tuple(sorted(h + [frag])), label))
        elif h or d:
            spans.append(Span(tuple(sorted(h or d)), label))

    unique = {s.key: s for s in spans}
    return DecodeResult(sorted(unique.values(), key=span_sort_key), repairs)


# --- corpus projection -------------------------------------------------------

@dataclass
class SentenceProjection:
    sentence: Sentence
    spans: list[Span]
    tags: list[str]
    warnings: list[str]


@dataclass
class DocumentProjection:
    doc_id: str
    sentences: list[SentenceProjection]
    crossing: list[Span]


def assign_to_sentences(sentences: Sequence[Sentence], spans: Iterable[Span]) -> tuple[list[list[Span]], list[Span]]:
    """Put each span in the sentence that contains it; return those fitting none separately."""
    buckets: list[list[Span]] = [[] for _ in sentences]
    crossing = []
    for span in spans:
        for k, sent in enumerate(sentences):
            if sent.start <= span.start and span.end <= sent.end:
                buckets[k].append(span)
                break
        else:
            crossing.append(span)
    return buckets, crossing


def project_document(doc: AnnotatedDocument, labels: Iterable[str] | None = None) -> DocumentProjection:
    keep = set(labels) if labels is not None else None
    spans = [s for s in doc.spans if keep is None or s.label in keep]
    sentences = split_sentences(doc.text)
    buckets, crossing = assign_to_sentences(sentences, spans)
    out = []
    for sent, bucket in zip(sentences, buckets):
        res = encode(sent, bucket)
        out.append(SentenceProjection(sent, bucket, res.tags, res.warnings))
    return DocumentProjection(doc.doc_id, out, crossing)


# --- round trip --------------------------------------------------------------

@dataclass
class DocumentDeviation:
    doc_id: str
    missing: list[Span]
    spurious: list[Span]
    crossing: list[Span]


@dataclass
class RoundTripCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    deviations: list[DocumentDeviation] = field(default_factory=list)

    @property
    def gold(self) -> int:
        return self.tp + self.fn


def roundtrip_document(doc: AnnotatedDocument, labels: Iterable[str] | None = None) -> tuple[int, int, int, DocumentDeviation | None]:
    proj = project_document(doc, labels)
    decoded: list[Span] = []
    for sp in proj.sentences:
        decoded.extend(decode(sp.sentence, sp.tags).spans)
    keep = set(labels) if labels is not None else None
    gold = Counter(s.key for s in doc.spans if keep is None or s.label in keep)
    got = Counter(s.key for s in decoded)
    tp = sum((gold & got).values())
    fn = sum(gold.values()) - tp
    fp = sum(got.values()) - tp
    deviation = None
    if fn or fp:
        missing_keys = gold - got
        spurious_keys = got - gold
        by_key_gold = {s.key: s for s in doc.spans}
        by_key_dec = {s.key: s for s in decoded}
        deviation = DocumentDeviation(
            doc.doc_id,
            sorted((by_key_gold[k] for k in missing_keys.elements()), key=span_sort_key),
            sorted((by_key_dec[k] for k in spurious_keys.elements()), key=span_sort_key),
            proj.crossing,
        )
    return tp, fp, fn, deviation


def roundtrip_report(corpus: Corpus, labels: Iterable[str] | None = None) -> RoundTripCounts:
    """Encode the gold spans, decode them again and score the result against gold.

    tp counts decoded spans identical to a gold span, fp decoded spans absent
    from gold, fn gold spans that did not come back. Every document with a
    deviation is itemized.
    """
    labels = list(labels) if labels is not None else None
    counts = RoundTripCounts()
    for doc in corpus:
        tp, fp, fn, dev = roundtrip_document(doc, labels)
        counts.tp += tp
        counts.fp += fp
        counts.fn += fn
        if dev is not None:
            counts.deviations.append(dev)
    return counts


# --- CoNLL-style columns ------------------------------------------------------

def format_conll(projections: Iterable[DocumentProjection]) -> str:
    """``token<TAB>start<TAB>end<TAB>tag`` with a blank line after each sentence."""
    lines = []
    for proj in projections:
        for sp in proj.sentences:
            for tok, tag in zip(sp.sentence.tokens, sp.tags):
                lines.append(f"{tok.text}\t{tok.start}\t{tok.end}\t{tag}")
            lines.append("")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_conll(data: str) -> list[tuple[Sentence, list[str]]]:
    out: list[tuple[Sentence, list[str]]] = []
    toks: list[Token] = []
    tags: list[str] = []

    def flush():
        if toks:
            out.append((Sentence(tuple(toks), toks[0].start, toks[-1].end), list(tags)))
            toks.clear()
            tags.clear()

    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            flush()
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(f"expected 4 columns, got {len(parts)}", lineno)
        text, start, end, tag = parts
        TagLabel.parse(tag)
        toks.append(Token(text, int(start), int(end)))
        tags.append(tag)
    flush()
    return out
