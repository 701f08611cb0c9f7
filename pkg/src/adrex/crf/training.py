"""Maximum-likelihood training with an L2 penalty, optimized by L-BFGS."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.sparse import csr_matrix, vstack

from ..biocodec import decode, project_document, tag_set
from ..corpus import Corpus, Span, span_sort_key
from ..errors import DataError, TrainingError
from ..tokenizer import Sentence, split_sentences
from .features import sentence_features
from .model import CrfConfig, CrfModel, TrainStats, forward_backward, log_partition

log = logging.getLogger(__name__)


@dataclass
class _Batch:
    """All training sentences of one length, stacked."""
    x: csr_matrix   # (n * L, F), sentence-major
    y: np.ndarray   # (n, L) tag indices


class Dataset:
    def __init__(self, model: CrfModel, data: Sequence[tuple[Sentence | list[list[str]], Sequence[str]]]):
        """``data`` pairs either a Sentence or its per-position feature names with tag strings."""
        k = model.n_tags
        tag_ix = {t: i for i, t in enumerate(model.tags)}
        by_len: dict[int, list[tuple[csr_matrix, np.ndarray]]] = defaultdict(list)
        for item, tags in data:
            feats = item if not isinstance(item, Sentence) else sentence_features(item, model.config.features)
            if len(feats) != len(tags):
                raise DataError("feature and tag sequences differ in length")
            if not tags:
                continue
            try:
                y = np.array([tag_ix[t] for t in tags], dtype=np.int64)
            except KeyError as exc:
                raise DataError(f"tag {exc} is not in the model's tag set") from None
            by_len[len(tags)].append((model.feature_matrix(feats), y))

        self.batches: list[_Batch] = []
        self.empirical_w = np.zeros((len(model.features), k))
        self.empirical_t = np.zeros((k, k))
        for length in sorted(by_len):
            items = by_len[length]
            x = vstack([m for m, _ in items], format="csr")
            y = np.stack([t for _, t in items])
            onehot = np.zeros((y.size, k))
            onehot[np.arange(y.size), y.ravel()] = 1.0
            self.empirical_w += x.T @ onehot
            if length > 1:
                np.add.at(self.empirical_t, (y[:, :-1].ravel(), y[:, 1:].ravel()), 1.0)
            self.batches.append(_Batch(x, y))
        self.n_sentences = sum(b.y.shape[0] for b in self.batches)


def log_likelihood_and_gradient(model: CrfModel, data: Dataset | Sequence, l2: float | None = None,
                                params: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Penalized conditional log-likelihood and its gradient with respect to ``model.get_params()``.

    ``value = sum_i log p(y_i | x_i) - l2/2 * ||theta||^2``; the gradient is
    observed minus expected feature counts minus ``l2 * theta``.
    """
    if not isinstance(data, Dataset):
        data = Dataset(model, data)
    lam = model.config.l2 if l2 is None else l2
    theta = model.get_params() if params is None else np.asarray(params, dtype=float)
    f, k = model.emission.shape
    w = theta[:f * k].reshape(f, k)
    trans = theta[f * k:].reshape(k, k)

    value = float((w * data.empirical_w).sum() + (trans * data.empirical_t).sum())
    grad_w = data.empirical_w.copy()
    grad_t = data.empirical_t.copy()
    for batch in data.batches:
        n, length = batch.y.shape
        em = np.asarray(batch.x @ w).reshape(n, length, k)
        fb = forward_backward(em, trans)
        value -= fb.log_z.sum()
        grad_w -= batch.x.T @ fb.node_marginals.reshape(n * length, k)
        grad_t -= fb.edge_marginals

    value -= 0.5 * lam * float(theta @ theta)
    grad = np.concatenate([grad_w.ravel(), grad_t.ravel()]) - lam * theta
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise TrainingError("non-finite log-likelihood or gradient")
    return float(value), grad


def log_likelihood(model: CrfModel, data: Dataset | Sequence, l2: float | None = None,
                   params: np.ndarray | None = None) -> float:
    """The value of :func:`log_likelihood_and_gradient` without the backward pass."""
    if not isinstance(data, Dataset):
        data = Dataset(model, data)
    lam = model.config.l2 if l2 is None else l2
    theta = model.get_params() if params is None else np.asarray(params, dtype=float)
    f, k = model.emission.shape
    w = theta[:f * k].reshape(f, k)
    trans = theta[f * k:].reshape(k, k)
    value = float((w * data.empirical_w).sum() + (trans * data.empirical_t).sum())
    for batch in data.batches:
        n, length = batch.y.shape
        value -= float(log_partition(np.asarray(batch.x @ w).reshape(n, length, k), trans).sum())
    value -= 0.5 * lam * float(theta @ theta)
    if not np.isfinite(value):
        raise TrainingError("non-finite log-likelihood")
    return value


def training_pairs(corpus: Corpus, labels: Iterable[str] | None = None) -> list[tuple[Sentence, list[str]]]:
    pairs = []
    crossing = 0
    for doc in corpus:
        proj = project_document(doc, labels)
        crossing += len(proj.crossing)
        pairs.extend((sp.sentence, sp.tags) for sp in proj.sentences)
    if crossing:
        log.warning("%d spans cross sentence boundaries and were left out of training", crossing)
    return pairs


def corpus_labels(corpus: Corpus) -> list[str]:
    return sorted({s.label for d in corpus for s in d.spans})


def train_on_pairs(pairs: Sequence[tuple[Sentence, Sequence[str]]], tags: Sequence[str],
                   config: CrfConfig = CrfConfig()) -> CrfModel:
    if not pairs:
        raise TrainingError("no training sentences")
    feats = [sentence_features(s, config.features) for s, _ in pairs]
    vocab = sorted({name for sent in feats for pos in sent for name in pos})
    model = CrfModel.zeros(tags, vocab, config)
    data = Dataset(model, [(fs, t) for fs, (_, t) in zip(feats, pairs)])
    stats = TrainStats()
    model.stats = stats
    if config.max_iterations <= 0:
        value, grad = log_likelihood_and_gradient(model, data)
        stats.nll, stats.grad_norm = -value, float(np.linalg.norm(grad))
        stats.message = "no iterations requested"
        return model

    def objective(theta):
        value, grad = log_likelihood_and_gradient(model, data, params=theta)
        return -value, -grad

    def record(intermediate_result):
        stats.nll_history.append(float(intermediate_result.fun))

    try:
        res = minimize(objective, model.get_params(), jac=True, method="L-BFGS-B", callback=record,
                       options={"maxiter": config.max_iterations, "maxcor": config.history,
                                "gtol": config.gtol, "ftol": 1e-12})
    except TrainingError as exc:
        raise TrainingError(
            f"{exc} after {len(stats.nll_history)} iterations; "
            f"last objective values {stats.nll_history[-3:]}"
        ) from None
    if not np.isfinite(res.fun):
        raise TrainingError(f"objective diverged: {res.message}")
    model.set_params(res.x)
    stats.iterations = int(res.nit)
    stats.nll = float(res.fun)
    stats.grad_norm = float(np.linalg.norm(res.jac))
    stats.message = str(res.message)
    log.info("CRF training: %d iterations, NLL %.4f, |grad| %.2e (%s)",
             stats.iterations, stats.nll, stats.grad_norm, stats.message)
    return model


def train(corpus: Corpus, config: CrfConfig = CrfConfig()) -> CrfModel:
    """Project gold spans to extended-BIO tags and fit a CRF to them."""
    if len(corpus) == 0:
        raise TrainingError("empty training corpus")
    labels = list(config.labels) if config.labels is not None else corpus_labels(corpus)
    if not labels:
        raise TrainingError("training corpus has no annotated spans")
    pairs = training_pairs(corpus, labels)
    return train_on_pairs(pairs, tag_set(labels), config)


def tag_document_spans(model: CrfModel, text: str) -> list[Span]:
    spans: list[Span] = []
    for sent in split_sentences(text):
        spans.extend(decode(sent, model.tag(sent)).spans)
    return sorted(spans, key=span_sort_key)


def tag_corpus(model: CrfModel, corpus: Corpus, name: str | None = None) -> Corpus:
    """Replace every document's spans with the model's predictions."""
    return corpus.with_spans({d.doc_id: tag_document_spans(model, d.text) for d in corpus}, name=name)
