"""Linear-chain CRF parameters, inference and the model file format.

Scores are ``sum_t E[t, y_t] + sum_t T[y_t, y_{t+1}]`` where the emission
score ``E[t, y]`` is the sum of the weights of the features active at ``t``
for tag ``y``. There are no start/stop transitions.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix

from ..errors import DataError, ParseError
from ..tokenizer import Sentence
from .features import FeatureConfig, sentence_features

FORMAT_VERSION = 1
_MAGIC = "# adrex-crf"
_TRANSITION = "__T__"


@dataclass(frozen=True)
class CrfConfig:
    window: int = 2
    ngram_max: int = 6
    l2: float = 1.0
    max_iterations: int = 200
    gtol: float = 1e-4
    history: int = 10
    # entity classes to tag; None means every class present in the training data
    labels: tuple[str, ...] | None = None

    @property
    def features(self) -> FeatureConfig:
        return FeatureConfig(self.window, self.ngram_max)

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["labels"] = list(self.labels) if self.labels is not None else None
        return d

    @classmethod
    def from_json(cls, d: dict) -> CrfConfig:
        d = dict(d)
        if d.get("labels") is not None:
            d["labels"] = tuple(d["labels"])
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class TrainStats:
    iterations: int = 0
    nll: float = float("nan")
    grad_norm: float = float("nan")
    nll_history: list[float] = field(default_factory=list)
    message: str = ""


@dataclass
class CrfModel:
    tags: list[str]
    features: dict[str, int]
    emission: np.ndarray      # (n_features, n_tags)
    transition: np.ndarray    # (n_tags, n_tags), from -> to
    config: CrfConfig = field(default_factory=CrfConfig)
    stats: TrainStats | None = None

    @classmethod
    def zeros(cls, tags: Sequence[str], features: Sequence[str], config: CrfConfig | None = None) -> CrfModel:
        k = len(tags)
        return cls(list(tags), {f: i for i, f in enumerate(features)},
                   np.zeros((len(features), k)), np.zeros((k, k)), config or CrfConfig())

    @property
    def n_tags(self) -> int:
        return len(self.tags)

    @property
    def n_params(self) -> int:
        return self.emission.size + self.transition.size

    def get_params(self) -> np.ndarray:
        return np.concatenate([self.emission.ravel(), self.transition.ravel()])

    def set_params(self, theta: np.ndarray) -> None:
        n = self.emission.size
        self.emission = np.asarray(theta[:n], dtype=float).reshape(self.emission.shape).copy()
        self.transition = np.asarray(theta[n:], dtype=float).reshape(self.transition.shape).copy()

    # -- featurization --

    def feature_matrix(self, feats: Sequence[Sequence[str]]) -> csr_matrix:
        """Binary (positions x features) matrix; unknown feature names are ignored."""
        indptr = [0]
        indices: list[int] = []
        for names in feats:
            ids = sorted({self.features[f] for f in names if f in self.features})
            indices.extend(ids)
            indptr.append(len(indices))
        data = np.ones(len(indices))
        return csr_matrix((data, np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
                          shape=(len(feats), len(self.features)))

    def emissions(self, sentence: Sentence) -> np.ndarray:
        x = self.feature_matrix(sentence_features(sentence, self.config.features))
        return np.asarray(x @ self.emission)

    # -- inference --

    def viterbi(self, emissions: np.ndarray) -> list[int]:
        """Best tag indices; among equal-scoring paths the lexicographically first wins."""
        return viterbi_indices(emissions, self.transition)

    def tag(self, sentence: Sentence) -> list[str]:
        if not sentence.tokens:
            return []
        return [self.tags[k] for k in self.viterbi(self.emissions(sentence))]

    # -- persistence --

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    def dumps(self) -> str:
        lines = [
            f"{_MAGIC} {FORMAT_VERSION}",
            "config\t" + json.dumps(self.config.to_json(), sort_keys=True),
            "tags\t" + " ".join(self.tags),
        ]
        names = sorted(self.features, key=self.features.__getitem__)
        for name in names:
            row = self.emission[self.features[name]]
            for k in np.flatnonzero(row):
                lines.append(f"{name}\t{self.tags[k]}\t{float(row[k])!r}")
        for a in range(self.n_tags):
            for b in range(self.n_tags):
                w = float(self.transition[a, b])
                if w != 0.0:
                    lines.append(f"{_TRANSITION}\t{self.tags[a]}|{self.tags[b]}\t{w!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, path: str | Path) -> CrfModel:
        path = Path(path)
        if not path.exists():
            raise DataError(f"model file not found: {path}")
        return cls.loads(path.read_text(encoding="utf-8"), source=str(path))

    @classmethod
    def loads(cls, data: str, source: str | None = None) -> CrfModel:
        lines = data.splitlines()
        if len(lines) < 3 or not lines[0].startswith(_MAGIC):
            raise ParseError("not a CRF model file", 1, source)
        version = int(lines[0].split()[-1])
        if version != FORMAT_VERSION:
            raise ParseError(f"unsupported model version {version}", 1, source)
        key, _, cfg = lines[1].partition("\t")
        if key != "config":
            raise ParseError("missing config header", 2, source)
        config = CrfConfig.from_json(json.loads(cfg))
        key, _, tags = lines[2].partition("\t")
        if key != "tags":
            raise ParseError("missing tags header", 3, source)
        tag_list = tags.split(" ")
        tag_ix = {t: i for i, t in enumerate(tag_list)}
        features: dict[str, int] = {}
        emission_rows: list[tuple[int, int, float]] = []
        trans = np.zeros((len(tag_list), len(tag_list)))
        for lineno, line in enumerate(lines[3:], start=4):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError("expected 3 columns", lineno, source)
            name, tag, weight = parts
            try:
                w = float(weight)
                if name == _TRANSITION:
                    a, b = tag.split("|")
                    trans[tag_ix[a], tag_ix[b]] = w
                else:
                    fid = features.setdefault(name, len(features))
                    emission_rows.append((fid, tag_ix[tag], w))
            except (KeyError, ValueError) as exc:
                raise ParseError(f"bad model line: {exc}", lineno, source) from None
        emission = np.zeros((len(features), len(tag_list)))
        for fid, k, w in emission_rows:
            emission[fid, k] = w
        return cls(tag_list, features, emission, trans, config)


def viterbi_indices(emissions: np.ndarray, transition: np.ndarray) -> list[int]:
    n, _ = emissions.shape
    if n == 0:
        return []
    # best[t, k]: best score of positions t..n-1 given tag k at t
    best = np.empty_like(emissions)
    best[-1] = emissions[-1]
    for t in range(n - 2, -1, -1):
        best[t] = emissions[t] + np.max(transition + best[t + 1][None, :], axis=1)
    path = [int(np.argmax(best[0]))]
    for t in range(1, n):
        path.append(int(np.argmax(transition[path[-1]] + best[t])))
    return path


def sequence_score(emissions: np.ndarray, transition: np.ndarray, path: Sequence[int]) -> float:
    s = float(sum(emissions[t, k] for t, k in enumerate(path)))
    s += float(sum(transition[a, b] for a, b in zip(path, path[1:])))
    return s


@dataclass
class ForwardBackward:
    log_z: np.ndarray          # (n,)
    log_z_backward: np.ndarray  # (n,)
    node_marginals: np.ndarray  # (n, L, K)
    edge_marginals: np.ndarray  # (K, K), summed over sentences and positions


def logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    # scipy's version carries per-call overhead that dominates on tiny tag sets
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def log_partition(emissions: np.ndarray, transition: np.ndarray) -> np.ndarray:
    """Forward pass only: log Z for each sentence of an (n, L, K) batch."""
    alpha = emissions[:, 0]
    for t in range(1, emissions.shape[1]):
        alpha = logsumexp(alpha[:, :, None] + transition[None], axis=1) + emissions[:, t]
    return logsumexp(alpha, axis=1)


def forward_backward(emissions: np.ndarray, transition: np.ndarray) -> ForwardBackward:
    """Log-space forward-backward for a batch of equal-length sentences, shape (n, L, K)."""
    n, length, k = emissions.shape
    alpha = np.empty_like(emissions)
    beta = np.empty_like(emissions)
    alpha[:, 0] = emissions[:, 0]
    for t in range(1, length):
        alpha[:, t] = logsumexp(alpha[:, t - 1, :, None] + transition[None], axis=1) + emissions[:, t]
    beta[:, -1] = 0.0
    for t in range(length - 2, -1, -1):
        beta[:, t] = logsumexp(transition[None] + (emissions[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
    log_z = logsumexp(alpha[:, -1], axis=1)
    log_z_b = logsumexp(emissions[:, 0] + beta[:, 0], axis=1)
    node = np.exp(alpha + beta - log_z[:, None, None])
    edge = np.zeros((k, k))
    for t in range(length - 1):
        lp = (alpha[:, t, :, None] + transition[None]
              + (emissions[:, t + 1] + beta[:, t + 1])[:, None, :] - log_z[:, None, None])
        edge += np.exp(lp).sum(axis=0)
    return ForwardBackward(log_z, log_z_b, node, edge)
