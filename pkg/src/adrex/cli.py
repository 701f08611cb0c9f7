"""Command-line entry point.

Exit status: 0 on success, 1 for usage errors, 2 for data or integrity errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import biocodec
from .corpus import corpus_hash, load_corpus, span_to_json, split_corpus, write_jsonl
from .crf import CrfConfig, CrfModel, tag_corpus, train
from .crf.training import train_on_pairs
from .dictmatch import dict_match, read_vocabulary
from .errors import AdrexError
from .evaluation import mcnemar_report
from .normalize import build_term_index, normalize_corpus, read_concept_filter
from .pipeline import evaluate_runs, load_run, run_pipeline
from .tokenizer import split_sentences, tokenize

log = logging.getLogger("adrex")

EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def cmd_tokenize(args) -> int:
    text = Path(args.input).read_text(encoding="utf-8") if args.input else sys.stdin.read()
    lines = []
    if args.sentences:
        for sent in split_sentences(text):
            lines.extend(f"{t.text}\t{t.start}\t{t.end}" for t in sent.tokens)
            lines.append("")
    else:
        lines = [f"{t.text}\t{t.start}\t{t.end}" for t in tokenize(text)]
    _write("".join(line + "\n" for line in lines), args.out)
    return 0


def cmd_split(args) -> int:
    corpus = load_corpus(args.corpus)
    train_c, test_c = split_corpus(corpus, args.fraction, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(train_c, out / "train.jsonl")
    write_jsonl(test_c, out / "test.jsonl")
    print(f"train\t{len(train_c)}\ntest\t{len(test_c)}")
    return 0


def cmd_dict_match(args) -> int:
    corpus = load_corpus(args.corpus)
    result = dict_match(corpus, read_vocabulary(args.vocab), args.label, name=Path(args.out).stem)
    write_jsonl(result, args.out)
    return 0


def cmd_crf_train(args) -> int:
    config = CrfConfig(window=args.window, l2=args.l2, max_iterations=args.max_iterations,
                       labels=tuple(args.label) if args.label else None)
    if args.conll:
        pairs = biocodec.parse_conll(Path(args.conll).read_text(encoding="utf-8"))
        labels = sorted({biocodec.TagLabel.parse(t).label for _, tags in pairs for t in tags} - {None})
        if args.label:
            labels = sorted(args.label)
        model = train_on_pairs(pairs, biocodec.tag_set(labels), config)
    else:
        model = train(load_corpus(args.corpus), config)
    model.save(args.out)
    s = model.stats
    log.info("iterations=%d nll=%.6f grad_norm=%.3e", s.iterations, s.nll, s.grad_norm)
    return 0


def cmd_crf_tag(args) -> int:
    model = CrfModel.load(args.model)
    corpus = load_corpus(args.corpus)
    write_jsonl(tag_corpus(model, corpus, name=Path(args.out).stem), args.out)
    return 0


def cmd_normalize(args) -> int:
    corpus = load_corpus(args.spans, check_surface=False)
    entries = read_vocabulary(args.vocab)
    concept_filter = read_concept_filter(args.filter) if args.filter else None
    index = build_term_index(entries, concept_filter)
    vocab_name = entries[0].vocabulary if entries else ""
    write_jsonl(normalize_corpus(corpus, index, args.label, vocab_name), args.out)
    return 0


def cmd_evaluate(args) -> int:
    gold = load_corpus(args.corpus)
    report = evaluate_runs(gold, args.runs, [args.label] if args.label else None)
    _write(_json(report), args.out)
    return 0


def cmd_mcnemar(args) -> int:
    gold = load_corpus(args.corpus)
    h = corpus_hash(gold)
    run1, run2 = load_run(args.run1, h), load_run(args.run2, h)
    pool = [load_run(p, h) for p in args.pool] if args.pool else None
    res = mcnemar_report(gold, run1, run2, args.label, pool)
    t = res["table"]
    lines = [
        f"label\t{res['label']}",
        f"\t{run2.name}:correct\t{run2.name}:wrong",
        f"{run1.name}:correct\t{t['a']}\t{t['b']}",
        f"{run1.name}:wrong\t{t['c']}\t{t['d']}",
    ]
    if res["p_value"] is None:
        lines.append("b + c = 0: test undefined")
    else:
        lines.append(f"chi2\t{res['statistic']:.6f}")
        lines.append(f"p_value\t{res['p_value']:.6g}")
        lines.append(f"significant_at_0.01\t{'yes' if res['significant'] else 'no'}")
    _write("\n".join(lines) + "\n", None)
    if args.out:
        Path(args.out).write_text(_json(res), encoding="utf-8")
    return 0


def cmd_roundtrip(args) -> int:
    corpus = load_corpus(args.corpus)
    counts = biocodec.roundtrip_report(corpus, args.label or None)
    print(f"TP\t{counts.tp}\nFP\t{counts.fp}\nFN\t{counts.fn}\ngold\t{counts.gold}")
    print(f"documents_with_deviations\t{len(counts.deviations)}")
    if args.out:
        lines = []
        for dev in counts.deviations:
            lines.append(json.dumps({
                "doc_id": dev.doc_id,
                "missing": [span_to_json(s) for s in dev.missing],
                "spurious": [span_to_json(s) for s in dev.spurious],
                "crossing_sentences": [span_to_json(s) for s in dev.crossing],
            }, ensure_ascii=False))
        Path(args.out).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    if args.conll:
        projections = [biocodec.project_document(d, args.label or None) for d in corpus]
        Path(args.conll).write_text(biocodec.format_conll(projections), encoding="utf-8")
    return 0


def cmd_run(args) -> int:
    manifest = run_pipeline(args.config)
    print(manifest.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="adrex", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("tokenize", help="print tokens with character offsets")
    s.add_argument("input", nargs="?")
    s.add_argument("--sentences", action="store_true", help="blank line after each sentence")
    s.add_argument("--out")
    s.set_defaults(func=cmd_tokenize)

    s = sub.add_parser("split", help="seeded train/test split into train.jsonl and test.jsonl")
    s.add_argument("--corpus", required=True)
    s.add_argument("--fraction", type=float, default=0.7)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("dict-match", help="dictionary phrase matching")
    s.add_argument("--vocab", required=True)
    s.add_argument("--label", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_dict_match)

    s = sub.add_parser("crf-train", help="train the CRF tagger")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--corpus")
    src.add_argument("--conll", help="token<TAB>start<TAB>end<TAB>tag training file")
    s.add_argument("--out", required=True)
    s.add_argument("--label", action="append", help="entity class to learn (repeatable)")
    s.add_argument("--l2", type=float, default=CrfConfig.l2)
    s.add_argument("--window", type=int, default=CrfConfig.window)
    s.add_argument("--max-iterations", type=int, default=CrfConfig.max_iterations)
    s.set_defaults(func=cmd_crf_train)

    s = sub.add_parser("crf-tag", help="tag a corpus with a trained CRF")
    s.add_argument("--model", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_crf_tag)

    s = sub.add_parser("normalize", help="assign vocabulary concepts to spans")
    s.add_argument("--vocab", required=True)
    s.add_argument("--filter")
    s.add_argument("--spans", required=True)
    s.add_argument("--label")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_normalize)

    s = sub.add_parser("evaluate", help="score runs against gold; pooled accuracy over exactly these runs")
    s.add_argument("--corpus", required=True, help="gold corpus")
    s.add_argument("--label")
    s.add_argument("--out")
    s.add_argument("runs", nargs="+", help="run manifests or spans JSONL files")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("mcnemar", help="McNemar's test between two runs")
    s.add_argument("--corpus", required=True, help="gold corpus")
    s.add_argument("--label", required=True)
    s.add_argument("--pool", nargs="*", help="runs forming the negative pool (default: the two runs)")
    s.add_argument("--out")
    s.add_argument("run1")
    s.add_argument("run2")
    s.set_defaults(func=cmd_mcnemar)

    s = sub.add_parser("roundtrip-check", help="encode gold spans to extended BIO and back")
    s.add_argument("--corpus", required=True)
    s.add_argument("--label", action="append")
    s.add_argument("--out", help="write per-document deviations as JSONL")
    s.add_argument("--conll", help="also write the encoded tags in column format")
    s.set_defaults(func=cmd_roundtrip)

    s = sub.add_parser("run", help="run a pipeline from a JSON config")
    s.add_argument("config")
    s.set_defaults(func=cmd_run)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except AdrexError as exc:
        print(f"adrex: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"adrex: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
