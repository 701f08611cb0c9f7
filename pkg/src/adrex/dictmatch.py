"""Dictionary lookup: positional index over documents plus exact phrase search.

Each vocabulary entry is run as a phrase query (consecutive token positions)
against a lowercased, unstemmed index of the documents; every hit becomes a
single-fragment span.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .corpus import ConceptRef, Corpus, Fragment, Span
from .errors import DataError, ParseError
from .tokenizer import Token, tokenize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VocabEntry:
    concept_id: str
    term: str
    vocabulary: str = ""


def read_vocabulary(path: str | Path) -> list[VocabEntry]:
    """``concept_id<TAB>term<TAB>vocabulary_name``, one synonym per line."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"vocabulary file not found: {path}")
    entries = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), start=1):
            if not row or (len(row) == 1 and not row[0].strip()) or row[0].startswith("#"):
                continue
            if len(row) not in (2, 3):
                raise ParseError(f"expected 2 or 3 columns, got {len(row)}", lineno, str(path))
            concept_id, term = row[0].strip(), row[1].strip()
            if not concept_id or not term:
                raise ParseError("empty concept id or term", lineno, str(path))
            entries.append(VocabEntry(concept_id, term, row[2].strip() if len(row) == 3 else ""))
    return entries


def analyze(text: str) -> list[str]:
    return [t.text.lower() for t in tokenize(text)]


@dataclass
class PhraseIndex:
    # token -> doc_id -> increasing positions
    postings: dict[str, dict[str, list[int]]] = field(default_factory=dict)
    tokens: dict[str, list[Token]] = field(default_factory=dict)
    doc_order: list[str] = field(default_factory=list)

    def positions(self, term: str, doc_id: str) -> list[int]:
        return self.postings.get(term, {}).get(doc_id, [])


def build_index(corpus: Corpus) -> PhraseIndex:
    index = PhraseIndex()
    for doc in corpus:
        toks = tokenize(doc.text)
        index.tokens[doc.doc_id] = toks
        index.doc_order.append(doc.doc_id)
        for pos, tok in enumerate(toks):
            index.postings.setdefault(tok.text.lower(), {}).setdefault(doc.doc_id, []).append(pos)
    return index


def phrase_search(index: PhraseIndex, terms: list[str]) -> dict[str, list[int]]:
    """Start positions of every consecutive occurrence of ``terms``, per document."""
    first = index.postings.get(terms[0])
    if not first:
        return {}
    hits = {}
    for doc_id, starts in first.items():
        candidates = set(starts)
        for offset, term in enumerate(terms[1:], start=1):
            later = index.postings.get(term, {}).get(doc_id)
            if not later:
                candidates = set()
                break
            candidates &= {p - offset for p in later}
            if not candidates:
                break
        if candidates:
            hits[doc_id] = sorted(candidates)
    return hits


def match_vocabulary(index: PhraseIndex, entries: Iterable[VocabEntry], label: str) -> dict[str, list[Span]]:
    """Spans for every phrase occurrence of every entry, per document.

    When several concepts hit the identical character range, the
    lexicographically greatest concept id wins.
    """
    best: dict[tuple[str, int, int], tuple[str, str]] = {}
    query_cache: dict[tuple[str, ...], dict[str, list[int]]] = {}
    for entry in entries:
        terms = tuple(analyze(entry.term))
        if not terms:
            log.warning("vocabulary term %r of %s has no tokens; skipped", entry.term, entry.concept_id)
            continue
        if terms not in query_cache:
            query_cache[terms] = phrase_search(index, list(terms))
        for doc_id, starts in query_cache[terms].items():
            toks = index.tokens[doc_id]
            for p in starts:
                key = (doc_id, toks[p].start, toks[p + len(terms) - 1].end)
                cand = (entry.concept_id, entry.vocabulary)
                if key not in best or cand > best[key]:
                    best[key] = cand

    out: dict[str, list[Span]] = {doc_id: [] for doc_id in index.doc_order}
    for (doc_id, start, end), (cid, vocab) in sorted(best.items()):
        out[doc_id].append(Span((Fragment(start, end),), label, ConceptRef(cid, vocab)))
    return out


def dict_match(corpus: Corpus, entries: Iterable[VocabEntry], label: str, name: str = "") -> Corpus:
    index = build_index(corpus)
    spans = match_vocabulary(index, entries, label)
    return corpus.with_spans(spans, name=name or corpus.name)
