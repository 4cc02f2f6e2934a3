"""Plaintext ingestion: cleaning, paragraph segmentation, labels and corpus statistics."""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CorpusEncodingError, PreconditionError, StructuralError
from .features import word_tokens

DEFAULT_MIN_TOKENS = 5

SOFT_HYPHEN = "\u00ad"
_SPACE_RUN = re.compile(r"[ \t]+")
_BLANK_RUN = re.compile(r"\n{3,}")
_BLOCK_SPLIT = re.compile(r"\n[ \t]*\n")
# A letter, a hyphen ending the line, and a letter starting the next one.
_LINE_HYPHEN = re.compile(r"(?<=[^\W\d_])-\n(?=[^\W\d_])")


@dataclass(frozen=True)
class PartyLabel:
    id: int
    name: str

    def __post_init__(self):
        if self.id < 0:
            raise PreconditionError(f"label id must be non-negative, got {self.id}")
        if not self.name:
            raise PreconditionError("label name must be non-empty")


@dataclass(frozen=True)
class RawDocument:
    source_id: str
    body: str
    label: PartyLabel | None = None


@dataclass(frozen=True)
class Paragraph:
    doc_source_id: str
    index: int
    text: str
    token_count: int


def check_labels(labels: Sequence[PartyLabel]) -> None:
    """Raise unless ids are exactly 0..K-1 in order and names are unique."""
    if [lab.id for lab in labels] != list(range(len(labels))):
        raise StructuralError(f"label ids must be dense 0..K-1 in order, got {[lab.id for lab in labels]}")
    names = [lab.name for lab in labels]
    if len(set(names)) != len(names):
        raise StructuralError(f"duplicate label names in {names}")


@dataclass(frozen=True)
class Corpus:
    labels: tuple[PartyLabel, ...]
    examples: tuple[tuple[Paragraph, PartyLabel], ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "examples", tuple(self.examples))
        check_labels(self.labels)
        known = set(self.labels)
        for para, lab in self.examples:
            if lab not in known:
                raise StructuralError(f"example {para.doc_source_id}#{para.index} has unknown label {lab}")

    def __len__(self) -> int:
        return len(self.examples)

    def label_by_name(self, name: str) -> PartyLabel:
        for lab in self.labels:
            if lab.name == name:
                return lab
        raise PreconditionError(f"no party named {name!r} in {[lab.name for lab in self.labels]}")

    def restrict(self, names: Sequence[str]) -> "Corpus":
        """Keep only the named parties, re-numbering their ids densely in the given order."""
        old = [self.label_by_name(n) for n in names]
        new = {o: PartyLabel(i, o.name) for i, o in enumerate(old)}
        return Corpus(
            labels=tuple(new[o] for o in old),
            examples=tuple((p, new[lab]) for p, lab in self.examples if lab in new),
        )

    def subset(self, positions: Iterable[int]) -> "Corpus":
        return Corpus(self.labels, tuple(self.examples[i] for i in positions))

    def class_counts(self) -> list[int]:
        counts = [0] * len(self.labels)
        for _, lab in self.examples:
            counts[lab.id] += 1
        return counts


def decode_document(data: bytes, source: str = "<bytes>") -> str:
    """Decode UTF-8 (a leading BOM is dropped); errors name the byte offset."""
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise CorpusEncodingError(source, exc.start, exc.reason) from None


def _strip_controls(text: str) -> str:
    out = []
    for ch in text:
        if ch == "\n":
            out.append(ch)
        elif ch == "\t" or unicodedata.category(ch) == "Zs":
            out.append(" ")
        elif unicodedata.category(ch) == "Cc" or ch in (SOFT_HYPHEN, "\ufeff"):
            continue
        else:
            out.append(ch)
    return "".join(out)


def _join_hyphenated(match: re.Match) -> str:
    nxt = match.string[match.end()]
    # "Koali-\ntion" is a broken word; "CDU-\nFraktion" keeps its hyphen.
    return "" if nxt.islower() else "-"


def clean_text(raw: str) -> str:
    """Remove PDF-conversion artefacts from ``raw``.

    Soft hyphens and control characters (except newline) are dropped, words
    split across lines are rejoined, space/tab runs collapse to one space,
    and paragraph gaps are normalized to a single blank line.  Idempotent.
    """
    text = raw.replace("\r\n", "\n").replace("\r", "\n").replace("\u2028", "\n").replace("\u2029", "\n\n")
    text = _strip_controls(text)
    text = _SPACE_RUN.sub(" ", text)
    text = "\n".join(line.strip(" ") for line in text.split("\n"))
    text = _LINE_HYPHEN.sub(_join_hyphenated, text)
    text = _BLANK_RUN.sub("\n\n", text)
    return text.strip("\n")


def segment_paragraphs(cleaned: str, min_tokens: int = DEFAULT_MIN_TOKENS, source_id: str = "") -> list[Paragraph]:
    """Split cleaned text on blank lines and drop blocks shorter than ``min_tokens``."""
    if min_tokens < 1:
        raise PreconditionError(f"min_tokens must be positive, got {min_tokens}")
    paragraphs: list[Paragraph] = []
    for block in _BLOCK_SPLIT.split(cleaned):
        block = block.strip()
        n = len(word_tokens(block))
        if n >= min_tokens:
            paragraphs.append(Paragraph(source_id, len(paragraphs), block, n))
    return paragraphs


def load_document(path: str | Path, label: PartyLabel | None = None) -> RawDocument:
    path = Path(path)
    body = decode_document(path.read_bytes(), str(path))
    if not body.strip():
        raise PreconditionError(f"{path}: document is empty")
    return RawDocument(source_id=path.stem, body=body, label=label)


def document_paragraphs(doc: RawDocument, min_tokens: int = DEFAULT_MIN_TOKENS) -> list[Paragraph]:
    return segment_paragraphs(clean_text(doc.body), min_tokens, doc.source_id)


# -- labels manifest -------------------------------------------------------


@dataclass(frozen=True)
class Manifest:
    """Maps manifesto files to parties; ``target`` is the unlabeled document."""

    parties: tuple[tuple[str, PartyLabel], ...]
    target: str | None = None

    @property
    def labels(self) -> tuple[PartyLabel, ...]:
        return tuple(lab for _, lab in self.parties)


def load_manifest(path: str | Path) -> Manifest:
    """Read a JSON manifest of the form::

        {"parties": [{"file": "afd.txt", "name": "AfD", "id": 0}, ...],
         "target": "coalition.txt"}
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = sorted(data["parties"], key=lambda e: e["id"])
    parties = tuple((e["file"], PartyLabel(int(e["id"]), str(e["name"]))) for e in entries)
    check_labels([lab for _, lab in parties])
    files = [f for f, _ in parties]
    if len(set(files)) != len(files):
        raise StructuralError("manifest lists a file twice")
    return Manifest(parties=parties, target=data.get("target"))


def load_corpus(directory: str | Path, manifest: Manifest, min_tokens: int = DEFAULT_MIN_TOKENS) -> Corpus:
    directory = Path(directory)
    examples = []
    for fname, lab in manifest.parties:
        doc = load_document(directory / fname, lab)
        examples.extend((p, lab) for p in document_paragraphs(doc, min_tokens))
    return Corpus(manifest.labels, tuple(examples))


# -- statistics ------------------------------------------------------------


@dataclass(frozen=True)
class LengthSummary:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float

    def five_numbers(self) -> tuple[float, float, float, float, float]:
        return (self.min, self.q1, self.median, self.q3, self.max)


@dataclass(frozen=True)
class PartyStats:
    party: str
    token_count: int
    paragraph_count: int
    lengths: LengthSummary


@dataclass(frozen=True)
class CorpusStats:
    parties: tuple[PartyStats, ...]

    def by_name(self) -> dict[str, PartyStats]:
        return {p.party: p for p in self.parties}


def length_summary(lengths: Sequence[int]) -> LengthSummary:
    """Five-number summary plus mean; quartiles use linear interpolation (type 7)."""
    arr = np.asarray(lengths, dtype=np.float64)
    q = np.percentile(arr, [0, 25, 50, 75, 100], method="linear")
    return LengthSummary(*(float(x) for x in q), mean=float(arr.mean()))


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Per-party token totals, paragraph counts and paragraph-length summaries.

    Parties without any paragraph are omitted.
    """
    if len(corpus) == 0:
        raise PreconditionError("corpus_stats needs a non-empty corpus")
    lengths: dict[int, list[int]] = {lab.id: [] for lab in corpus.labels}
    for para, lab in corpus.examples:
        lengths[lab.id].append(para.token_count)
    rows = []
    for lab in corpus.labels:
        ls = lengths[lab.id]
        if ls:
            rows.append(PartyStats(lab.name, sum(ls), len(ls), length_summary(ls)))
    return CorpusStats(tuple(rows))


def paragraphs_from_records(records: Iterable[Mapping]) -> list[Paragraph]:
    return [Paragraph(r["doc"], int(r["index"]), r["text"], int(r["tokens"])) for r in records]


def paragraph_record(p: Paragraph, label: PartyLabel | None = None) -> dict:
    rec = {"doc": p.doc_source_id, "index": p.index, "text": p.text, "tokens": p.token_count}
    if label is not None:
        rec["party"] = label.name
        rec["party_id"] = label.id
    return rec
