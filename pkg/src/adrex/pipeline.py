"""Declarative runs: one JSON config in, spans JSONL plus a manifest out.

Example config::

    {"name": "crf-vsm-adr", "method": "crf+vsm", "corpus": "data/test.jsonl",
     "train_corpus": "data/train.jsonl", "vocab": "vocab/sct.tsv",
     "filter": "vocab/findings.txt", "label": "ADR", "out_dir": "runs"}

Relative paths are taken relative to the config file.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Corpus, corpus_hash, load_corpus, write_jsonl
from .crf import CrfConfig, CrfModel, tag_corpus, train
from .dictmatch import dict_match, read_vocabulary
from .errors import DataError, IntegrityError
from .evaluation import RunInput, build_report
from .normalize import build_term_index, normalize_corpus, read_concept_filter

METHODS = ("dict", "crf", "crf+vsm")
_PATH_KEYS = ("corpus", "vocab", "filter", "model", "train_corpus", "out_dir")


@dataclass(frozen=True)
class RunManifest:
    name: str
    method: str
    corpus_hash: str
    output: str
    config: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> RunManifest:
        path = Path(path)
        if not path.exists():
            raise DataError(f"manifest not found: {path}")
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
            return cls(d["name"], d["method"], d["corpus_hash"], d["output"], d.get("config", {}))
        except (json.JSONDecodeError, KeyError) as exc:
            raise DataError(f"bad manifest {path}: {exc}") from None


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"config not found: {path}")
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"bad config {path}: {exc}") from None
    base = path.parent
    for key in _PATH_KEYS:
        if cfg.get(key) is not None and not Path(cfg[key]).is_absolute():
            cfg[key] = str(base / cfg[key])
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if not cfg.get(k)]
    if missing:
        raise DataError(f"config for method {cfg.get('method')!r} is missing {', '.join(missing)}")


def _vsm(corpus: Corpus, cfg: dict, name: str) -> Corpus:
    entries = read_vocabulary(cfg["vocab"])
    concept_filter = read_concept_filter(cfg["filter"]) if cfg.get("filter") else None
    index = build_term_index(entries, concept_filter)
    vocab_name = cfg.get("vocabulary") or (entries[0].vocabulary if entries else "")
    return normalize_corpus(corpus, index, cfg.get("label"), vocab_name, name=name)


def _crf_model(cfg: dict, out_dir: Path, name: str) -> CrfModel:
    if cfg.get("model"):
        return CrfModel.load(cfg["model"])
    _require(cfg, "train_corpus")
    crf_cfg = dict(cfg.get("crf", {}))
    if cfg.get("label") and "labels" not in crf_cfg:
        crf_cfg["labels"] = [cfg["label"]]
    model = train(load_corpus(cfg["train_corpus"]), CrfConfig.from_json(crf_cfg))
    model.save(out_dir / f"{name}.model")
    return model


def run_pipeline(config: dict | str | Path) -> RunManifest:
    cfg = load_config(config) if not isinstance(config, dict) else dict(config)
    method = cfg.get("method")
    if method not in METHODS:
        raise DataError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    _require(cfg, "corpus", "out_dir")
    name = cfg.get("name") or method.replace("+", "-")
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    corpus = load_corpus(cfg["corpus"])
    if method == "dict":
        _require(cfg, "vocab", "label")
        result = dict_match(corpus, read_vocabulary(cfg["vocab"]), cfg["label"], name=name)
    else:
        if method == "crf+vsm":
            _require(cfg, "vocab")
        model = _crf_model(cfg, out_dir, name)
        result = tag_corpus(model, corpus, name=name)
        if method == "crf+vsm":
            result = _vsm(result, cfg, name)

    output = out_dir / f"{name}.jsonl"
    write_jsonl(result, output)
    snapshot = {k: v for k, v in sorted(cfg.items())}
    manifest = RunManifest(name, method, corpus_hash(corpus), str(output), snapshot)
    manifest.save(out_dir / f"{name}.manifest.json")
    return manifest


def load_run(path: str | Path, expected_hash: str | None = None) -> RunInput:
    """A run from its manifest (``*.manifest.json``) or a bare spans JSONL file."""
    path = Path(path)
    meta: dict = {}
    if path.name.endswith(".manifest.json"):
        manifest = RunManifest.load(path)
        spans_path = Path(manifest.output)
        if not spans_path.is_absolute() and not spans_path.exists():
            spans_path = path.parent / spans_path.name
        corpus = load_corpus(spans_path)
        name = manifest.name
        meta = {"method": manifest.method, "corpus_hash": manifest.corpus_hash}
        if corpus_hash(corpus) != manifest.corpus_hash:
            raise IntegrityError(f"run {name}: output texts do not match the manifest's corpus hash")
    else:
        corpus = load_corpus(path)
        name = path.stem
    if expected_hash is not None and corpus_hash(corpus) != expected_hash:
        raise IntegrityError(
            f"run {name} was produced on a different corpus than the gold standard "
            f"(hash {corpus_hash(corpus)[:12]} vs {expected_hash[:12]}); refusing to compare"
        )
    return RunInput(name, corpus, meta)


def evaluate_runs(gold: Corpus, run_paths: Sequence[str | Path], labels: Sequence[str] | None = None) -> dict:
    expected = corpus_hash(gold)
    runs = [load_run(p, expected) for p in run_paths]
    names = [r.name for r in runs]
    if len(set(names)) != len(names):
        raise DataError(f"duplicate run names: {names}")
    report = build_report(gold, runs, labels)
    report["corpus_hash"] = expected
    return report
