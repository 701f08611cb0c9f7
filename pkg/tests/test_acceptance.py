"""Acceptance criteria, one test each, with their runtime limits.

Run with ``pytest tests/test_acceptance.py`` (a PASS/FAIL line per criterion is
printed in the terminal summary) or ``python tests/test_acceptance.py``.

Criterion 2 needs the CADEC corpus: set ``ADREX_CADEC_DIR`` to a directory
holding ``train`` and ``test`` (standoff directories or JSONL files).
"""

from __future__ import annotations

import os
import random
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from adrex.biocodec import roundtrip_report  # noqa: E402
from adrex.corpus import load_corpus, split_corpus, write_jsonl  # noqa: E402
from adrex.crf import CrfConfig, tag_corpus, train, viterbi_indices  # noqa: E402
from adrex.evaluation import STRICT, count, effectiveness, mcnemar, pooled_accuracy, prf  # noqa: E402

from crf_oracles import brute_force_viterbi, gradient_max_relative_error, random_data, random_model  # noqa: E402
from synth import LEXICON, bio_corpus, lexicon_corpus  # noqa: E402

RESULTS: list[str] = []


class Skip(Exception):
    pass


def _timed(limit):
    def wrap(fn):
        def run():
            t0 = time.perf_counter()
            ok, detail = fn()
            elapsed = time.perf_counter() - t0
            if limit is not None and elapsed >= limit:
                ok, detail = False, f"{detail}; took {elapsed:.1f}s, limit {limit}s"
            return ok, f"{detail} ({elapsed:.1f}s)"
        run.__doc__ = fn.__doc__
        return run
    return wrap


@_timed(5)
def criterion_1():
    """BIO round trip on 1,000 synthetic documents is exact."""
    counts = roundtrip_report(bio_corpus(1000, seed=2024))
    return counts.fp == 0 and counts.fn == 0, f"tp={counts.tp} fp={counts.fp} fn={counts.fn}"


REFERENCE_ROUNDTRIP = {"train": (6325, 122, 66), "test": (2618, 50, 26)}


@_timed(None)
def criterion_2():
    """BIO round trip reproduces the reference counts on CADEC."""
    root = os.environ.get("ADREX_CADEC_DIR")
    if not root:
        raise Skip("ADREX_CADEC_DIR not set; CADEC corpus not supplied")
    ok = True
    parts = []
    for part, expected in REFERENCE_ROUNDTRIP.items():
        candidates = [Path(root) / part, Path(root) / f"{part}.jsonl"]
        path = next((p for p in candidates if p.exists()), None)
        if path is None:
            raise Skip(f"no {part} split under {root}")
        counts = roundtrip_report(load_corpus(path))
        got = (counts.tp, counts.fp, counts.fn)
        note = ""
        if got != expected and (got[0], got[2], got[1]) == expected:
            note = " [matches only with FP/FN swapped]"
        ok &= got == expected
        parts.append(f"{part}: tp/fp/fn={got} expected {expected}, "
                     f"{len(counts.deviations)} documents itemized{note}")
    return ok, "; ".join(parts)


@_timed(30)
def criterion_3():
    """Analytic CRF gradient matches central differences on 50 random models."""
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        model = random_model(rng, max_tags=5, max_features=200)
        worst = max(worst, gradient_max_relative_error(model, random_data(rng, model, max_len=6), step=1e-5))
    return worst < 1e-4, f"max relative error {worst:.2e}"


@_timed(10)
def criterion_4():
    """Viterbi equals brute-force argmax on 200 random models."""
    rng = np.random.default_rng(4)
    bad = 0
    for _ in range(200):
        k, n = int(rng.integers(1, 6)), int(rng.integers(1, 7))
        em, trans = rng.normal(0, 1, (n, k)), rng.normal(0, 1, (k, k))
        bad += viterbi_indices(em, trans) != brute_force_viterbi(em, trans)
    return bad == 0, f"{bad} mismatches out of 200"


@_timed(300)
def criterion_5():
    """Default CRF learns a 20-term lexicon: strict F >= 0.95 on a held-out 30%."""
    corpus = lexicon_corpus(1000, seed=5)
    train_c, test_c = split_corpus(corpus, 0.7, seed=5)
    model = train(train_c, CrfConfig())
    predicted = tag_corpus(model, test_c)
    p, r, f = prf(count(test_c.spans_by_doc("ADR"), predicted.spans_by_doc("ADR"), STRICT))
    return f >= 0.95, f"P={p:.3f} R={r:.3f} F={f:.3f} after {model.stats.iterations} iterations"


@_timed(10)
def criterion_6():
    """Dictionary matching equals a naive sliding-window scan on 100 random instances."""
    from test_dictmatch import run_dictionary_oracle
    return run_dictionary_oracle(100, seed=6), "100 random (corpus, vocabulary) pairs"


@_timed(None)
def criterion_7():
    """Matching oracles and the worked accuracy and effectiveness examples."""
    from adrex.corpus import ConceptRef, Span
    from test_evaluation import run_metric_oracles

    oracles = run_metric_oracles(500, seed=7)
    g1, g2, s1, s2 = (Span.of("ADR", (a, a + 4)) for a in (0, 10, 20, 30))
    a1, a2 = pooled_accuracy({"d": [g1, g2]}, [{"d": [g1, s1]}, {"d": [g2, s1, s2]}])
    c = lambda code: ConceptRef(code)  # noqa: E731
    gold = {"d": [Span.of("ADR", (i * 10, i * 10 + 4), concept=c(k)) for i, k in enumerate("ABCD")]}
    system = {"d": [Span.of("ADR", (0, 4), concept=c("A")), Span.of("ADR", (10, 14), concept=c("B")),
                    Span.of("ADR", (20, 24), concept=c("X")), Span.of("ADR", (40, 44), concept=c("E"))]}
    eff = effectiveness(gold, system)
    ok = oracles and a1.accuracy == 0.5 and a2.accuracy == 0.25 and eff.strict == 0.5 and eff.relaxed == 2 / 3
    return ok, (f"oracles={'ok' if oracles else 'MISMATCH'} accuracy=({a1.accuracy}, {a2.accuracy}) "
                f"effectiveness=({eff.strict}, {eff.relaxed:.6f})")


@_timed(None)
def criterion_8():
    """McNemar (15, 5): chi2 = 4.05, p = 0.0442; symmetric; b + c = 0 rejected."""
    res = mcnemar(15, 5)
    symmetric = mcnemar(5, 15) == res
    try:
        mcnemar(0, 0)
        rejects = False
    except ValueError:
        rejects = True
    ok = abs(res.statistic - 4.05) <= 1e-9 and abs(res.p_value - 0.0442) <= 1e-3 and symmetric and rejects
    return ok, f"chi2={res.statistic:.12f} p={res.p_value:.6f} symmetric={symmetric} b+c=0 rejected={rejects}"


@_timed(None)
def criterion_9():
    """dict-match -> normalize -> evaluate twice gives byte-identical outputs."""
    import subprocess
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        w = Path(tmp)
        corpus = lexicon_corpus(200, seed=9)
        rng = random.Random(9)
        write_jsonl(corpus, w / "gold.jsonl")
        lines = [f"C{i:03d}\t{term}\tSYN" for i, term in enumerate(LEXICON)]
        lines += [f"C{rng.randint(0, 99):03d}\t{term.split()[-1]}\tSYN" for term in LEXICON]
        (w / "vocab.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        outputs = []
        # separate processes with different hash seeds, so set ordering cannot leak into outputs
        for rep, hash_seed in (("a", "1"), ("b", "2")):
            out = w / rep
            out.mkdir()
            env = dict(os.environ, PYTHONHASHSEED=hash_seed)
            steps = [
                ["dict-match", "--vocab", str(w / "vocab.tsv"), "--label", "ADR",
                 "--corpus", str(w / "gold.jsonl"), "--out", str(out / "dict.jsonl")],
                ["normalize", "--vocab", str(w / "vocab.tsv"), "--spans", str(out / "dict.jsonl"),
                 "--label", "ADR", "--out", str(out / "norm.jsonl")],
                ["evaluate", "--corpus", str(w / "gold.jsonl"), "--out", str(out / "report.json"),
                 str(out / "dict.jsonl"), str(out / "norm.jsonl")],
            ]
            for args in steps:
                proc = subprocess.run([sys.executable, "-m", "adrex", *args], env=env,
                                      capture_output=True, text=True)
                if proc.returncode:
                    return False, f"{args[0]} exited {proc.returncode}: {proc.stderr.strip()}"
            outputs.append([(out / f).read_bytes() for f in ("dict.jsonl", "norm.jsonl", "report.json")])
        same = outputs[0] == outputs[1]
        return same, f"{sum(len(b) for b in outputs[0])} bytes compared across two processes"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


def _run(n: int) -> None:
    fn = CRITERIA[n - 1]
    try:
        ok, detail = fn()
    except Skip as exc:
        RESULTS.append(f"criterion {n}: SKIP  {fn.__doc__} {exc}")
        pytest.skip(str(exc))
    RESULTS.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {fn.__doc__} {detail}")
    assert ok, detail


@pytest.mark.parametrize("n", range(1, 10))
def test_criterion(n):
    _run(n)


if __name__ == "__main__":
    failed = False
    for i, fn in enumerate(CRITERIA, start=1):
        try:
            ok, detail = fn()
            status = "PASS" if ok else "FAIL"
            failed |= not ok
        except Skip as exc:
            status, detail = "SKIP", str(exc)
        print(f"criterion {i}: {status}  {fn.__doc__} {detail}", flush=True)
    sys.exit(1 if failed else 0)
