"""Concept normalization by TF-IDF retrieval over vocabulary terms.

Every synonym of every concept is indexed as its own term document. A span's
text is analyzed the same way (lowercase, stop words out, Porter stems) and run
as a disjunctive query; the best-scoring concept is assigned, or the span is
marked concept_less when no term shares a token with it.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

from nltk.stem.porter import PorterStemmer

from .corpus import ConceptRef, Corpus
from .dictmatch import VocabEntry
from .errors import DataError
from .tokenizer import tokenize

log = logging.getLogger(__name__)

_SCORE_DIGITS = 12


def default_stopwords() -> frozenset[str]:
    data = resources.files("adrex").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return frozenset(
        line.strip() for line in data.splitlines() if line.strip() and not line.startswith("#")
    )


_stemmer = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


@lru_cache(maxsize=65536)
def stem(word: str) -> str:
    return _stemmer.stem(word, to_lowercase=False)


@dataclass(frozen=True)
class Analyzer:
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    stemming: bool = True

    def __call__(self, text: str) -> list[str]:
        out = []
        for tok in tokenize(text):
            word = tok.text.lower()
            if word in self.stopwords:
                continue
            out.append(stem(word) if self.stemming else word)
        return out


@dataclass(frozen=True)
class TermDocument:
    concept_id: str
    vocabulary: str
    term: str
    weights: dict[str, float]
    norm: float


def _tf(count: int) -> float:
    return 1.0 + math.log(count)


@dataclass
class TermIndex:
    documents: list[TermDocument]
    idf: dict[str, float]
    postings: dict[str, list[int]]
    analyzer: Analyzer

    def vectorize(self, tokens: list[str]) -> dict[str, float]:
        return {t: _tf(c) * self.idf[t] for t, c in Counter(tokens).items() if t in self.idf}


def read_concept_filter(path: str | Path) -> set[str]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"filter file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    return {line.strip() for line in lines if line.strip() and not line.startswith("#")}


def build_term_index(entries: Iterable[VocabEntry], concept_filter: Iterable[str] | None = None,
                     analyzer: Analyzer | None = None) -> TermIndex:
    analyzer = analyzer or Analyzer()
    allowed = set(concept_filter) if concept_filter is not None else None
    analyzed: list[tuple[VocabEntry, list[str]]] = []
    for entry in entries:
        if allowed is not None and entry.concept_id not in allowed:
            continue
        tokens = analyzer(entry.term)
        if not tokens:
            log.warning("term %r of %s is empty after analysis; skipped", entry.term, entry.concept_id)
            continue
        analyzed.append((entry, tokens))

    n = len(analyzed)
    df: Counter = Counter()
    for _, tokens in analyzed:
        df.update(set(tokens))
    idf = {t: 1.0 + math.log(n / d) for t, d in df.items()}

    documents = []
    postings: dict[str, list[int]] = defaultdict(list)
    for i, (entry, tokens) in enumerate(analyzed):
        weights = {t: _tf(c) * idf[t] for t, c in Counter(tokens).items()}
        norm = math.sqrt(sum(w * w for w in weights.values()))
        documents.append(TermDocument(entry.concept_id, entry.vocabulary, entry.term, weights, norm))
        for t in weights:
            postings[t].append(i)
    return TermIndex(documents, idf, dict(postings), analyzer)


@dataclass(frozen=True)
class Candidate:
    concept: ConceptRef
    score: float
    term: str


@dataclass(frozen=True)
class NormalizationResult:
    concept: ConceptRef
    score: float
    candidates: tuple[Candidate, ...] = ()


def normalize_span(index: TermIndex, span_text: str, top_k: int = 10,
                   vocabulary: str = "") -> NormalizationResult:
    """Rank concepts by the cosine of their best term document against the span text."""
    query = index.vectorize(index.analyzer(span_text))
    qnorm = math.sqrt(sum(w * w for w in query.values()))
    if not query:
        return NormalizationResult(ConceptRef.none(vocabulary), 0.0)

    hits: set[int] = set()
    for t in query:
        hits.update(index.postings.get(t, ()))

    best: dict[str, tuple[float, int]] = {}
    for i in sorted(hits):
        doc = index.documents[i]
        dot = sum(w * doc.weights.get(t, 0.0) for t, w in query.items())
        score = round(dot / (qnorm * doc.norm), _SCORE_DIGITS)
        prev = best.get(doc.concept_id)
        if prev is None or score > prev[0]:
            best[doc.concept_id] = (score, i)

    ranked = sorted(best.items(), key=lambda kv: (kv[1][0], kv[0]), reverse=True)[:top_k]
    candidates = tuple(
        Candidate(ConceptRef(cid, index.documents[i].vocabulary), score, index.documents[i].term)
        for cid, (score, i) in ranked
    )
    top = candidates[0]
    return NormalizationResult(top.concept, top.score, candidates)


def normalize_corpus(corpus: Corpus, index: TermIndex, label: str | None = None,
                     vocabulary: str = "", name: str | None = None) -> Corpus:
    """Attach a concept to every span (of ``label``, if given) of every document."""
    cache: dict[str, NormalizationResult] = {}
    spans = {}
    for doc in corpus:
        out = []
        for span in doc.spans:
            if label is None or span.label == label:
                text = span.surface(doc.text)
                if text not in cache:
                    cache[text] = normalize_span(index, text, vocabulary=vocabulary)
                span = span.with_concept(cache[text].concept)
            out.append(span)
        spans[doc.doc_id] = out
    return corpus.with_spans(spans, name=name)
