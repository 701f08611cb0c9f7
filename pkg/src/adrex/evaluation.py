"""Span-level scoring: strict/relaxed matching, P/R/F, pooled accuracy,
normalization effectiveness and McNemar's test.

Gold and system annotations are passed as ``{doc_id: [Span, ...]}`` mappings
that have already been restricted to one entity class.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import chi2

from .corpus import Corpus, Span

STRICT = "strict"
RELAXED = "relaxed"
FULL = "full"
SIGNIFICANCE_LEVEL = 0.01

SpansByDoc = Mapping[str, Sequence[Span]]


@dataclass
class MatchResult:
    pairs: list[tuple[Span, Span]]
    unmatched_gold: list[Span]
    unmatched_system: list[Span]
    mode: str


def match_spans(gold: Sequence[Span], system: Sequence[Span], mode: str = STRICT) -> MatchResult:
    """One-to-one pairing of gold and system spans of a single document.

    Strict pairs need identical fragments and class. Relaxed pairs need the
    same class and at least one shared character; the pair count is maximized.
    """
    if mode == STRICT:
        pool: dict[tuple, list[int]] = defaultdict(list)
        for j, s in enumerate(system):
            pool[s.key].append(j)
        pairs_idx = []
        for i, g in enumerate(gold):
            free = pool.get(g.key)
            if free:
                pairs_idx.append((i, free.pop(0)))
    elif mode == RELAXED:
        pairs_idx = _max_overlap_matching(gold, system)
    else:
        raise ValueError(f"unknown matching mode {mode!r}")

    used_g = {i for i, _ in pairs_idx}
    used_s = {j for _, j in pairs_idx}
    return MatchResult(
        [(gold[i], system[j]) for i, j in pairs_idx],
        [g for i, g in enumerate(gold) if i not in used_g],
        [s for j, s in enumerate(system) if j not in used_s],
        mode,
    )


def _max_overlap_matching(gold: Sequence[Span], system: Sequence[Span]) -> list[tuple[int, int]]:
    if not gold or not system:
        return []
    rows, cols = [], []
    for i, g in enumerate(gold):
        for j, s in enumerate(system):
            if g.label == s.label and g.overlaps(s):
                rows.append(i)
                cols.append(j)
    if not rows:
        return []
    # prefer identical spans among maximum matchings so strict hits stay paired
    weight = np.zeros((len(gold), len(system)))
    big = len(gold) + len(system) + 1.0
    for i, j in zip(rows, cols):
        weight[i, j] = big + (1.0 if gold[i].key == system[j].key else 0.0)
    r, c = linear_sum_assignment(weight, maximize=True)
    pairs = [(int(i), int(j)) for i, j in zip(r, c) if weight[i, j] > 0]
    return sorted(pairs)


@dataclass
class EvalCounts:
    n_tp: int = 0
    n_fp: int = 0
    n_fn: int = 0
    n_tn: int = 0
    n_correct: int = 0
    t_g: int = 0

    def __post_init__(self):
        if self.n_tp + self.n_fn != self.t_g:
            raise ValueError("n_tp + n_fn must equal t_g")

    def __add__(self, other: EvalCounts) -> EvalCounts:
        return EvalCounts(self.n_tp + other.n_tp, self.n_fp + other.n_fp, self.n_fn + other.n_fn,
                          self.n_tn + other.n_tn, self.n_correct + other.n_correct,
                          self.t_g + other.t_g)

    def as_dict(self) -> dict:
        return {"n_tp": self.n_tp, "n_fp": self.n_fp, "n_fn": self.n_fn, "n_tn": self.n_tn,
                "n_correct": self.n_correct, "t_g": self.t_g}


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f_score: float
    undefined: tuple[str, ...] = ()

    def __iter__(self):
        return iter((self.precision, self.recall, self.f_score))


def prf(counts: EvalCounts) -> PRF:
    """Precision, recall and F-score; a 0/0 ratio is reported as 0 and flagged."""
    undefined = []
    if counts.n_tp + counts.n_fp == 0:
        p = 0.0
        undefined.append("precision")
    else:
        p = counts.n_tp / (counts.n_tp + counts.n_fp)
    if counts.n_tp + counts.n_fn == 0:
        r = 0.0
        undefined.append("recall")
    else:
        r = counts.n_tp / (counts.n_tp + counts.n_fn)
    f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return PRF(p, r, f, tuple(undefined))


def same_concept(gold: Span, system: Span) -> bool:
    """Concept codes agree; two concept_less annotations also agree."""
    if gold.concept is None or system.concept is None:
        return False
    if gold.concept.conceptless or system.concept.conceptless:
        return gold.concept.conceptless and system.concept.conceptless
    return gold.concept.code == system.concept.code


def count(gold: SpansByDoc, system: SpansByDoc, mode: str = STRICT) -> EvalCounts:
    """Aggregate matching counts over documents (n_tn is left at 0).

    ``n_correct`` counts strict matches whose concept is right, whatever ``mode``
    is, because concept correctness is only defined for exact spans.
    """
    total = EvalCounts()
    for doc_id in sorted(set(gold) | set(system)):
        g = list(gold.get(doc_id, ()))
        s = list(system.get(doc_id, ()))
        res = match_spans(g, s, mode)
        strict = res if mode == STRICT else match_spans(g, s, STRICT)
        correct = sum(1 for a, b in strict.pairs if same_concept(a, b))
        total = total + EvalCounts(len(res.pairs), len(res.unmatched_system),
                                   len(res.unmatched_gold), 0, correct, len(g))
    return total


def full_task_counts(gold: SpansByDoc, system: SpansByDoc) -> EvalCounts:
    """Counts where a hit needs the exact span and the right concept."""
    c = count(gold, system, STRICT)
    n_sys = c.n_tp + c.n_fp
    return EvalCounts(c.n_correct, n_sys - c.n_correct, c.t_g - c.n_correct, 0, c.n_correct, c.t_g)


# --- pooled accuracy --------------------------------------------------------

def _concept_id(span: Span):
    if span.concept is None:
        return None
    return "" if span.concept.conceptless else span.concept.code


def _identities(spans: SpansByDoc, with_concept: bool = False) -> set[tuple]:
    if with_concept:
        return {(doc_id, s.key, _concept_id(s)) for doc_id, ss in spans.items() for s in ss}
    return {(doc_id, s.key) for doc_id, ss in spans.items() for s in ss}


def negative_pool(gold: SpansByDoc, runs: Sequence[SpansByDoc], with_concept: bool = False) -> set[tuple]:
    """Every span produced by some run that is not a gold span."""
    pool: set[tuple] = set()
    for run in runs:
        pool |= _identities(run, with_concept)
    return pool - _identities(gold, with_concept)


@dataclass(frozen=True)
class AccuracyResult:
    accuracy: float
    counts: EvalCounts


def pooled_accuracy(gold: SpansByDoc, runs: Sequence[SpansByDoc], mode: str = STRICT) -> list[AccuracyResult]:
    """Accuracy of each run where the negatives are the pooled non-gold spans of all runs.

    Span identity for the pool is exact (fragments and class) under ``strict``
    and ``relaxed``; under ``full`` the concept is part of the identity.
    """
    if not runs:
        raise ValueError("pooled accuracy needs at least one run")
    with_concept = mode == FULL
    pool = negative_pool(gold, runs, with_concept)
    out = []
    for run in runs:
        c = full_task_counts(gold, run) if with_concept else count(gold, run, mode)
        tn = len(pool - _identities(run, with_concept))
        c = EvalCounts(c.n_tp, c.n_fp, c.n_fn, tn, c.n_correct, c.t_g)
        denom = c.n_tp + c.n_fn + c.n_fp + c.n_tn
        if denom == 0:
            raise ValueError("accuracy undefined: no gold spans and an empty negative pool")
        out.append(AccuracyResult((c.n_tp + c.n_tn) / denom, c))
    return out


# --- normalization effectiveness ----------------------------------------------

@dataclass(frozen=True)
class Effectiveness:
    strict: float
    relaxed: float
    undefined: tuple[str, ...] = ()

    def __iter__(self):
        return iter((self.strict, self.relaxed))


def effectiveness_from_counts(counts: EvalCounts) -> Effectiveness:
    undefined = []
    if counts.t_g == 0:
        strict = 0.0
        undefined.append("strict")
    else:
        strict = counts.n_correct / counts.t_g
    if counts.n_tp == 0:
        relaxed = 0.0
        undefined.append("relaxed")
    else:
        relaxed = counts.n_correct / counts.n_tp
    return Effectiveness(strict, relaxed, tuple(undefined))


def effectiveness(gold: SpansByDoc, system: SpansByDoc) -> Effectiveness:
    """Correctly normalized exact spans over all gold spans (strict) or over exact matches (relaxed)."""
    return effectiveness_from_counts(count(gold, system, STRICT))


# --- McNemar ----------------------------------------------------------------

@dataclass(frozen=True)
class Contingency:
    a: int
    b: int
    c: int
    d: int

    @property
    def trials(self) -> int:
        return self.a + self.b + self.c + self.d


@dataclass(frozen=True)
class McNemarResult:
    statistic: float
    p_value: float

    @property
    def significant(self) -> bool:
        return self.p_value < SIGNIFICANCE_LEVEL


def mcnemar(b: int, c: int) -> McNemarResult:
    """Continuity-corrected McNemar test on the discordant counts."""
    if b < 0 or c < 0:
        raise ValueError("discordant counts must be non-negative")
    if b + c == 0:
        raise ValueError("McNemar's test is undefined when b + c = 0")
    stat = max(abs(b - c) - 1, 0) ** 2 / (b + c)
    return McNemarResult(stat, float(chi2.sf(stat, df=1)))


def contingency(gold: SpansByDoc, run1: SpansByDoc, run2: SpansByDoc,
                pool_runs: Sequence[SpansByDoc] | None = None) -> Contingency:
    """Paired correct/wrong table over gold spans plus the pooled negatives.

    A method is correct on a gold span if it produced it exactly, and on a
    pooled negative if it did not produce it.
    """
    pool_runs = list(pool_runs) if pool_runs is not None else [run1, run2]
    gold_ids = _identities(gold)
    trials = gold_ids | negative_pool(gold, pool_runs)
    ids1, ids2 = _identities(run1), _identities(run2)
    tally: Counter = Counter()
    for item in trials:
        ok1 = (item in ids1) == (item in gold_ids)
        ok2 = (item in ids2) == (item in gold_ids)
        tally[(ok1, ok2)] += 1
    return Contingency(tally[(True, True)], tally[(True, False)],
                       tally[(False, True)], tally[(False, False)])


# --- report -----------------------------------------------------------------

def labels_of(*corpora: Corpus) -> list[str]:
    return sorted({s.label for corpus in corpora for d in corpus for s in d.spans})


@dataclass
class RunInput:
    name: str
    corpus: Corpus
    meta: dict = field(default_factory=dict)


def _round(x: float) -> float:
    return round(x, 6)


def build_report(gold: Corpus, runs: Sequence[RunInput], labels: Iterable[str] | None = None) -> dict:
    """Per-class, per-mode metric blocks for each run, with the pool membership listed."""
    labels = list(labels) if labels is not None else labels_of(gold, *(r.corpus for r in runs))
    report: dict = {
        "gold": gold.name,
        "pool": [r.name for r in runs],
        "classes": {},
    }
    for label in labels:
        g = gold.spans_by_doc(label)
        sys_spans = [r.corpus.spans_by_doc(label) for r in runs]
        block: dict = {}
        for mode in (STRICT, RELAXED, FULL):
            acc = pooled_accuracy(g, sys_spans, mode) if sys_spans else []
            entries = {}
            for run, a in zip(runs, acc):
                c = a.counts
                scores = prf(c)
                eff = effectiveness_from_counts(count(g, run.corpus.spans_by_doc(label), STRICT))
                entries[run.name] = {
                    "precision": _round(scores.precision),
                    "recall": _round(scores.recall),
                    "f_score": _round(scores.f_score),
                    "accuracy": _round(a.accuracy),
                    "effectiveness_strict": _round(eff.strict),
                    "effectiveness_relaxed": _round(eff.relaxed),
                    "counts": c.as_dict(),
                    "undefined": list(scores.undefined) + [f"effectiveness_{u}" for u in eff.undefined],
                }
            block[mode] = entries
        block["relaxed"]["_note"] = "pooled accuracy under relaxed matching is experimental"
        report["classes"][label] = block
    return report


def mcnemar_report(gold: Corpus, run1: RunInput, run2: RunInput, label: str,
                   pool: Sequence[RunInput] | None = None) -> dict:
    g = gold.spans_by_doc(label)
    s1, s2 = run1.corpus.spans_by_doc(label), run2.corpus.spans_by_doc(label)
    pool_spans = [r.corpus.spans_by_doc(label) for r in pool] if pool else None
    table = contingency(g, s1, s2, pool_spans)
    out = {"label": label, "method_1": run1.name, "method_2": run2.name,
           "pool": [r.name for r in pool] if pool else [run1.name, run2.name],
           "table": {"a": table.a, "b": table.b, "c": table.c, "d": table.d}}
    if table.b + table.c == 0:
        out.update(statistic=None, p_value=None, significant=False)
    else:
        res = mcnemar(table.b, table.c)
        out.update(statistic=res.statistic, p_value=res.p_value, significant=res.significant)
    return out
