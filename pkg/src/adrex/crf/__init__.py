from .features import FeatureConfig, char_ngrams, extract_features, sentence_features, word_shape
from .model import (
    CrfConfig, CrfModel, TrainStats, forward_backward, log_partition, sequence_score, viterbi_indices,
)
from .training import Dataset, log_likelihood, log_likelihood_and_gradient, tag_corpus, train, train_on_pairs

__all__ = [
    "CrfConfig", "CrfModel", "Dataset", "FeatureConfig", "TrainStats", "char_ngrams",
    "extract_features", "forward_backward", "log_likelihood", "log_likelihood_and_gradient",
    "log_partition", "sentence_features",
    "sequence_score", "tag_corpus", "train", "train_on_pairs", "viterbi_indices", "word_shape",
]


def viterbi(model: CrfModel, sentence) -> list[str]:
    """Most probable tag sequence for ``sentence``."""
    return model.tag(sentence)
