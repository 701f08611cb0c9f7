"""Word tokens and naive sentences, both carrying character offsets.

Word segmentation follows the default Unicode word-boundary rules (UAX #29)
as implemented by the ``regex`` module's WORD flag. Segments without any letter
or digit (whitespace, punctuation) are dropped, like a standard search-engine
tokenizer does.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import regex

_BOUNDARY = regex.compile(r"\b", flags=regex.WORD | regex.V1)
_HAS_WORD_CHAR = regex.compile(r"[\p{L}\p{N}\p{M}]")
# break after terminal punctuation followed by whitespace, and at every newline
_SENTENCE_BREAK = re.compile(r"(?<=[.!?])(?=\s)|\n")


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    start: int
    end: int

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def words(self) -> list[str]:
        return [t.text for t in self.tokens]


def tokenize(text: str, offset: int = 0) -> list[Token]:
    if not text:
        return []
    bounds = [m.start() for m in _BOUNDARY.finditer(text)]
    if not bounds or bounds[0] != 0:
        bounds.insert(0, 0)
    if bounds[-1] != len(text):
        bounds.append(len(text))
    tokens = []
    for a, b in zip(bounds, bounds[1:]):
        if a < b and _HAS_WORD_CHAR.search(text, a, b):
            tokens.append(Token(text[a:b], a + offset, b + offset))
    return tokens


def split_sentences(text: str) -> list[Sentence]:
    """Cut at ``.``, ``!`` or ``?`` followed by whitespace and at newlines.

    Abbreviations are not special-cased: ``"Dr. Smith said ok."`` yields the
    two sentences ``"Dr."`` and ``"Smith said ok."``. Segments without tokens
    are dropped. Sentence ranges exclude surrounding whitespace.
    """
    cuts = [0]
    for m in _SENTENCE_BREAK.finditer(text):
        cuts.append(m.start())
    cuts.append(len(text))
    sentences = []
    for a, b in zip(cuts, cuts[1:]):
        tokens = tokenize(text[a:b], offset=a)
        if not tokens:
            continue
        seg = text[a:b]
        lead = len(seg) - len(seg.lstrip())
        trail = len(seg.rstrip())
        sentences.append(Sentence(tuple(tokens), a + lead, a + trail))
    return sentences
