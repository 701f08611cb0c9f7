"""Annotated documents in standoff form: types, readers, writers and splitting.

Offsets are Python ``str`` indices, i.e. Unicode code point offsets, so the
same annotations hold whatever encoding the files are stored in.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

from .errors import DataError, IntegrityError, ParseError, ValidationError

ENTITY_CLASSES = ("ADR", "Drug", "Disease", "Symptom", "Finding")
CONCEPT_LESS = "concept_less"


@dataclass(frozen=True, order=True)
class Fragment:
    start: int
    end: int

    def __post_init__(self):
        if not (isinstance(self.start, int) and isinstance(self.end, int)):
            raise ValidationError(f"fragment offsets must be integers: {self.start!r}, {self.end!r}")
        if self.start < 0 or self.start >= self.end:
            raise ValidationError(f"invalid fragment [{self.start},{self.end})")

    def overlaps(self, other: Fragment) -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class ConceptRef:
    code: str
    vocabulary: str = ""
    conceptless: bool = False

    def __post_init__(self):
        if self.conceptless and self.code:
            raise ValidationError("a concept_less reference cannot carry a code")
        if not self.conceptless and not self.code:
            raise ValidationError("concept code is empty")

    @classmethod
    def none(cls, vocabulary: str = "") -> ConceptRef:
        return cls("", vocabulary, conceptless=True)


@dataclass(frozen=True)
class Span:
    fragments: tuple[Fragment, ...]
    label: str
    concept: ConceptRef | None = None

    def __post_init__(self):
        frags = tuple(self.fragments)
        object.__setattr__(self, "fragments", frags)
        if not frags:
            raise ValidationError("span has no fragments")
        if not self.label:
            raise ValidationError("span has an empty label")
        for a, b in zip(frags, frags[1:]):
            if b.start < a.end:
                raise ValidationError(
                    f"fragments must be sorted and disjoint: [{a.start},{a.end}) then [{b.start},{b.end})"
                )

    @classmethod
    def of(cls, label: str, *ranges: tuple[int, int], concept: ConceptRef | None = None) -> Span:
        return cls(tuple(Fragment(s, e) for s, e in ranges), label, concept)

    @property
    def start(self) -> int:
        return self.fragments[0].start

    @property
    def end(self) -> int:
        return self.fragments[-1].end

    @property
    def is_discontinuous(self) -> bool:
        return len(self.fragments) > 1

    @property
    def key(self) -> tuple:
        """Identity used by strict matching: fragment offsets plus class."""
        return (tuple((f.start, f.end) for f in self.fragments), self.label)

    def overlaps(self, other: Span) -> bool:
        return any(f.overlaps(g) for f in self.fragments for g in other.fragments)

    def surface(self, text: str) -> str:
        return " ".join(text[f.start:f.end] for f in self.fragments)

    def with_concept(self, concept: ConceptRef | None) -> Span:
        return Span(self.fragments, self.label, concept)


def span_sort_key(span: Span) -> tuple:
    return (span.start, span.end, span.key, span.concept is not None,
            (span.concept.code, span.concept.vocabulary) if span.concept else ("", ""))


@dataclass(frozen=True)
class AnnotatedDocument:
    doc_id: str
    text: str
    spans: tuple[Span, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "spans", tuple(self.spans))
        n = len(self.text)
        for span in self.spans:
            if span.end > n:
                raise ValidationError(
                    f"{self.doc_id}: fragment end {span.end} beyond text length {n}"
                )

    def check_overlaps(self) -> None:
        """Reject overlaps other than a fragment shared verbatim by several spans."""
        check_overlaps(self.spans, self.doc_id)

    def replace_spans(self, spans: Iterable[Span]) -> AnnotatedDocument:
        return AnnotatedDocument(self.doc_id, self.text, tuple(spans))


def check_overlaps(spans: Iterable[Span], doc_id: str = "") -> None:
    items = sorted(
        (frag, i) for i, span in enumerate(spans) for frag in span.fragments
    )
    for a in range(len(items)):
        fa, ia = items[a]
        for b in range(a + 1, len(items)):
            fb, ib = items[b]
            if fb.start >= fa.end:
                break
            if ia != ib and fa != fb:
                raise ValidationError(
                    f"{doc_id}: spans overlap at [{fa.start},{fa.end}) and "
                    f"[{fb.start},{fb.end}) without sharing an identical fragment"
                )


@dataclass(frozen=True)
class Corpus:
    documents: tuple[AnnotatedDocument, ...] = ()
    name: str = ""
    _index: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        docs = tuple(self.documents)
        object.__setattr__(self, "documents", docs)
        for doc in docs:
            if doc.doc_id in self._index:
                raise ValidationError(f"duplicate doc_id {doc.doc_id!r}")
            self._index[doc.doc_id] = doc

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[AnnotatedDocument]:
        return iter(self.documents)

    def __getitem__(self, doc_id: str) -> AnnotatedDocument:
        return self._index[doc_id]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._index

    @property
    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self.documents]

    def spans_by_doc(self, label: str | None = None) -> dict[str, list[Span]]:
        return {
            d.doc_id: [s for s in d.spans if label is None or s.label == label]
            for d in self.documents
        }

    def with_spans(self, spans: dict[str, Iterable[Span]], name: str | None = None) -> Corpus:
        docs = [d.replace_spans(spans.get(d.doc_id, ())) for d in self.documents]
        return Corpus(tuple(docs), self.name if name is None else name)


def corpus_hash(corpus: Corpus) -> str:
    """Digest of the document ids and texts; annotations do not contribute."""
    h = hashlib.sha256()
    for doc in sorted(corpus.documents, key=lambda d: d.doc_id):
        h.update(doc.doc_id.encode("utf-8"))
        h.update(b"\x00")
        h.update(doc.text.encode("utf-8"))
        h.update(b"\x01")
    return h.hexdigest()


# --- standoff ---------------------------------------------------------------

_SPAN_LINE = re.compile(r"^(\S+)\t(\S+) (\d+ \d+(?:;\d+ \d+)*)(?:\t(.*))?$")
_CONCEPT_LINE = re.compile(r"^(\S+)\t([^\t]*)\t([^\t]*)$")


def parse_standoff(text: str, ann: str, doc_id: str = "", source: str | None = None,
                   check_surface: bool = True) -> AnnotatedDocument:
    """Parse a brat-style ``.ann`` string against its document text.

    Span lines look like ``T1<TAB>ADR 0 4;10 13<TAB>pain arm``; concept lines
    ``T1<TAB>10019211<TAB>MedDRA`` attach a concept to an already named span.
    A code of ``concept_less`` marks the span as having no concept.
    """
    spans: dict[str, tuple[int, Span]] = {}
    concepts: list[tuple[int, str, str, str]] = []
    for lineno, raw in enumerate(ann.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        m = _SPAN_LINE.match(line)
        if m:
            ann_id, label, offsets, surface = m.groups()
            if ann_id in spans:
                raise ParseError(f"duplicate annotation id {ann_id}", lineno, source)
            try:
                frags = []
                for part in offsets.split(";"):
                    s, e = part.split(" ")
                    frags.append(Fragment(int(s), int(e)))
                span = Span(tuple(frags), label)
            except ValidationError as exc:
                raise ValidationError(f"{source or doc_id}: line {lineno}: {exc}") from None
            if span.end > len(text):
                raise ValidationError(
                    f"{source or doc_id}: line {lineno}: offset {span.end} beyond text length {len(text)}"
                )
            if check_surface and surface is not None:
                expected = " ".join(span.surface(text).split())
                if " ".join(surface.split()) != expected:
                    raise IntegrityError(
                        f"{source or doc_id}: line {lineno}: surface {surface!r} "
                        f"does not match text {span.surface(text)!r}"
                    )
            spans[ann_id] = (lineno, span)
            continue
        m = _CONCEPT_LINE.match(line)
        if m:
            concepts.append((lineno, *m.groups()))
            continue
        raise ParseError(f"malformed annotation line {line!r}", lineno, source)

    for lineno, ann_id, code, vocab in concepts:
        if ann_id not in spans:
            raise ParseError(f"concept line refers to unknown span {ann_id}", lineno, source)
        code = code.strip()
        ref = ConceptRef.none(vocab) if code in ("", CONCEPT_LESS) else ConceptRef(code, vocab)
        at, span = spans[ann_id]
        spans[ann_id] = (at, span.with_concept(ref))

    ordered = [span for _, span in sorted(spans.values(), key=lambda p: p[0])]
    doc = AnnotatedDocument(doc_id, text, tuple(ordered))
    doc.check_overlaps()
    return doc


def format_standoff(doc: AnnotatedDocument) -> str:
    lines = []
    concept_lines = []
    for i, span in enumerate(doc.spans, start=1):
        offsets = ";".join(f"{f.start} {f.end}" for f in span.fragments)
        surface = " ".join(span.surface(doc.text).split())
        lines.append(f"T{i}\t{span.label} {offsets}\t{surface}")
        if span.concept is not None:
            code = CONCEPT_LESS if span.concept.conceptless else span.concept.code
            concept_lines.append(f"T{i}\t{code}\t{span.concept.vocabulary}")
    return "".join(line + "\n" for line in lines + concept_lines)


def load_standoff_dir(text_dir: str | Path, ann_dir: str | Path | None = None,
                      name: str | None = None, check_surface: bool = True) -> Corpus:
    """Load ``<docid>.txt`` / ``<docid>.ann`` pairs, ordered by doc_id."""
    text_dir = Path(text_dir)
    ann_dir = Path(ann_dir) if ann_dir is not None else text_dir
    docs = []
    for txt in sorted(text_dir.glob("*.txt")):
        doc_id = txt.stem
        ann_path = ann_dir / f"{doc_id}.ann"
        if not ann_path.exists():
            raise DataError(f"missing annotation file {ann_path}")
        text = txt.read_text(encoding="utf-8")
        ann = ann_path.read_text(encoding="utf-8")
        docs.append(parse_standoff(text, ann, doc_id, str(ann_path), check_surface))
    return Corpus(tuple(docs), name if name is not None else text_dir.name)


def write_standoff_dir(corpus: Corpus, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for doc in corpus:
        (out_dir / f"{doc.doc_id}.txt").write_text(doc.text, encoding="utf-8")
        (out_dir / f"{doc.doc_id}.ann").write_text(format_standoff(doc), encoding="utf-8")


# --- JSONL ------------------------------------------------------------------

def span_to_json(span: Span) -> dict:
    obj = {
        "fragments": [{"start": f.start, "end": f.end} for f in span.fragments],
        "label": span.label,
    }
    if span.concept is not None:
        obj["concept"] = {
            "code": span.concept.code,
            "vocabulary": span.concept.vocabulary,
            "conceptless": span.concept.conceptless,
        }
    return obj


def span_from_json(obj: dict) -> Span:
    frags = tuple(Fragment(int(f["start"]), int(f["end"])) for f in obj["fragments"])
    concept = None
    c = obj.get("concept")
    if c is not None:
        conceptless = bool(c.get("conceptless", False))
        concept = ConceptRef(c.get("code", ""), c.get("vocabulary", ""), conceptless)
    return Span(frags, obj["label"], concept)


def document_to_json(doc: AnnotatedDocument) -> dict:
    return {"doc_id": doc.doc_id, "text": doc.text, "spans": [span_to_json(s) for s in doc.spans]}


def dumps_jsonl(corpus: Corpus) -> str:
    return "".join(
        json.dumps(document_to_json(doc), ensure_ascii=False) + "\n" for doc in corpus
    )


def read_jsonl(source: str | Path | IO[str], name: str = "") -> Corpus:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            return read_jsonl(fh, name or Path(source).stem)
    docs = []
    seen = set()
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            doc_id = str(obj["doc_id"])
            if doc_id in seen:
                raise ValidationError(f"duplicate doc_id {doc_id!r}")
            seen.add(doc_id)
            spans = tuple(span_from_json(s) for s in obj.get("spans", ()))
            docs.append(AnnotatedDocument(doc_id, obj["text"], spans))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise ValidationError(f"line {lineno}: {exc}") from None
            raise ParseError(str(exc), lineno) from None
    return Corpus(tuple(docs), name)


def loads_jsonl(data: str, name: str = "") -> Corpus:
    return read_jsonl(io.StringIO(data), name)


def write_jsonl(corpus: Corpus, dest: str | Path | IO[str]) -> None:
    data = dumps_jsonl(corpus)
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(data, encoding="utf-8")
    else:
        dest.write(data)


def load_corpus(path: str | Path, check_surface: bool = True) -> Corpus:
    """A directory of standoff pairs or a ``.jsonl`` file.

    A directory may also keep texts under ``text/`` and annotations under
    ``original/`` or ``ann/``, the layout of the CADEC release.
    """
    path = Path(path)
    if path.is_dir():
        if not any(path.glob("*.txt")) and (path / "text").is_dir():
            for sub in ("original", "ann"):
                if (path / sub).is_dir():
                    return load_standoff_dir(path / "text", path / sub, name=path.name,
                                             check_surface=check_surface)
        return load_standoff_dir(path, check_surface=check_surface)
    if not path.exists():
        raise DataError(f"no such corpus: {path}")
    return read_jsonl(path)


# --- splitting --------------------------------------------------------------

def split_corpus(corpus: Corpus, train_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Seeded document-level split; the train side gets round(fraction * N) documents."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    if len(corpus) == 0:
        raise DataError("cannot split an empty corpus")
    ids = sorted(corpus.doc_ids)
    random.Random(seed).shuffle(ids)
    n_train = math.floor(train_fraction * len(ids) + 0.5)
    train_ids = set(ids[:n_train])
    train = tuple(d for d in corpus if d.doc_id in train_ids)
    test = tuple(d for d in corpus if d.doc_id not in train_ids)
    base = corpus.name or "corpus"
    return Corpus(train, f"{base}-train"), Corpus(test, f"{base}-test")
