"""Random corpora for property and acceptance tests."""

from __future__ import annotations

import random

from adrex.corpus import AnnotatedDocument, Corpus, Fragment, Span

FILLER = [
    "the", "i", "took", "it", "for", "weeks", "and", "then", "my", "doctor", "said", "was",
    "fine", "after", "day", "night", "morning", "really", "very", "some", "lot", "of", "but",
    "now", "still", "have", "had", "been", "feel", "felt", "with", "this", "that", "so",
    "year", "month", "pill", "dose", "again", "never", "always", "today", "also", "just",
]

LEXICON = [
    "headache", "nausea", "muscle pain", "joint pain", "dizziness", "fatigue", "insomnia",
    "hair loss", "weight gain", "stomach cramps", "dry mouth", "blurred vision", "rash",
    "back pain", "memory loss", "leg cramps", "chest pain", "anxiety", "night sweats",
    "loss of appetite",
]


def lexicon_corpus(n_sentences: int = 1000, seed: int = 0, label: str = "ADR",
                   lexicon: list[str] = LEXICON) -> Corpus:
    """One sentence per document: filler words with 0-2 lexicon terms embedded."""
    rng = random.Random(seed)
    docs = []
    for i in range(n_sentences):
        pieces: list[tuple[str, bool]] = [(w, False) for w in rng.choices(FILLER, k=rng.randint(4, 12))]
        for _ in range(rng.choice([0, 1, 1, 2])):
            pieces.insert(rng.randint(0, len(pieces)), (rng.choice(lexicon), True))
        text = ""
        spans = []
        for k, (piece, is_term) in enumerate(pieces):
            if k:
                text += " "
            if is_term:
                spans.append(Span((Fragment(len(text), len(text) + len(piece)),), label))
            text += piece
        text += "."
        docs.append(AnnotatedDocument(f"d{i:05d}", text, tuple(spans)))
    return Corpus(tuple(docs), "lexicon")


def bio_corpus(n_docs: int = 1000, seed: int = 0, labels: tuple[str, ...] = ("ADR", "Drug")) -> Corpus:
    """Documents whose sentences hold continuous spans plus at most one discontinuous group.

    Every span is aligned to whole tokens. A group is either one lone
    discontinuous span or a shared head fragment with two or more partners.
    """
    rng = random.Random(seed)
    docs = []
    for d in range(n_docs):
        text = ""
        spans: list[Span] = []
        for s in range(rng.randint(1, 3)):
            if s:
                text += " "
            words = rng.choices(FILLER, k=rng.randint(3, 14))
            offsets = []
            for k, w in enumerate(words):
                if k:
                    text += " "
                offsets.append((len(text), len(text) + len(w)))
                text += w
            text += "."
            # cut the sentence into runs of 1-3 tokens and give each a role
            runs = []
            i = 0
            while i < len(words):
                j = min(len(words), i + rng.randint(1, 3))
                runs.append(Fragment(offsets[i][0], offsets[j - 1][1]))
                i = j
            group: list[Fragment] = []
            for frag in runs:
                role = rng.random()
                if role < 0.45:
                    continue
                if role < 0.75:
                    spans.append(Span((frag,), rng.choice(labels)))
                else:
                    group.append(frag)
            if len(group) >= 2:
                label = rng.choice(labels)
                if len(group) >= 3 and rng.random() < 0.6:
                    head = rng.choice(group)
                    for frag in group:
                        if frag != head:
                            spans.append(Span(tuple(sorted((head, frag))), label))
                else:
                    spans.append(Span(tuple(group), label))
            elif group:
                spans.append(Span((group[0],), rng.choice(labels)))
        docs.append(AnnotatedDocument(f"b{d:05d}", text, tuple(spans)))
    return Corpus(tuple(docs), "bio")
