"""Observation features for the CRF tagger.

Three families, all binary:

* surrounding words: lowercased token identity at offsets ``-window..+window``
  keyed by offset (``w[-1]=have``); offsets falling outside the sentence emit nothing.
* character n-grams of the current token (lowercased): every substring of length
  1..n, plus prefixes ``^ab`` and suffixes ``ab$`` of length 1..n.
* word shape: upper ``X``, lower ``x``, digit ``d``, other ``p``, with runs
  longer than two cut to two (``Lipitor`` -> ``Xxx``).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import groupby

from ..tokenizer import Sentence


@dataclass(frozen=True)
class FeatureConfig:
    window: int = 2
    ngram_max: int = 6


def char_class(ch: str) -> str:
    if ch.isupper():
        return "X"
    if ch.islower():
        return "x"
    if ch.isdigit():
        return "d"
    if ch.isalpha():
        # caseless letters (CJK, etc.)
        return "x"
    return "p"


def word_shape(word: str) -> str:
    return "".join(c * min(len(list(run)), 2) for c, run in groupby(char_class(ch) for ch in word))


def char_ngrams(word: str, n_max: int = 6) -> list[str]:
    grams = set()
    n = len(word)
    for size in range(1, min(n_max, n) + 1):
        for i in range(n - size + 1):
            grams.add(word[i:i + size])
        grams.add("^" + word[:size])
        grams.add(word[n - size:] + "$")
    return sorted(grams)


def extract_features(sentence: Sentence, position: int, config: FeatureConfig = FeatureConfig()) -> list[str]:
    """Feature names active at ``position``, sorted and without duplicates."""
    if not 0 <= position < len(sentence.tokens):
        raise IndexError(position)
    return _features_at([t.text.lower() for t in sentence.tokens], sentence.tokens[position].text,
                        position, config)


def sentence_features(sentence: Sentence, config: FeatureConfig = FeatureConfig()) -> list[list[str]]:
    lowered = [t.text.lower() for t in sentence.tokens]
    return [_features_at(lowered, tok.text, i, config) for i, tok in enumerate(sentence.tokens)]


def _features_at(lowered: list[str], raw: str, i: int, config: FeatureConfig) -> list[str]:
    feats = []
    for off in range(-config.window, config.window + 1):
        j = i + off
        if 0 <= j < len(lowered):
            feats.append(f"w[{off}]={lowered[j]}")
    feats.extend("ng=" + g for g in char_ngrams(lowered[i], config.ngram_max))
    feats.append("shape=" + word_shape(raw))
    return sorted(set(feats))
