"""Tokenization and sparse n-gram featurization (raw counts or TF-IDF)."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import PreconditionError, StructuralError

# Letter/digit runs; underscore is a word char for `\w` so it is excluded explicitly.
_TOKEN_RE = re.compile(r"[^\W_]+")

WEIGHTINGS = ("counts", "tf-idf")


@dataclass(frozen=True)
class FeatureConfig:
    ngram_min: int = 1
    ngram_max: int = 2
    lowercase: bool = True
    min_doc_freq: int = 2
    weighting: str = "tf-idf"

    def __post_init__(self):
        if not 1 <= self.ngram_min <= self.ngram_max <= 3:
            raise PreconditionError(
                f"need 1 <= ngram_min <= ngram_max <= 3, got ({self.ngram_min}, {self.ngram_max})"
            )
        if self.min_doc_freq < 1:
            raise PreconditionError(f"min_doc_freq must be >= 1, got {self.min_doc_freq}")
        if self.weighting not in WEIGHTINGS:
            raise PreconditionError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")

    def to_dict(self) -> dict:
        return {
            "ngram_min": self.ngram_min,
            "ngram_max": self.ngram_max,
            "lowercase": self.lowercase,
            "min_doc_freq": self.min_doc_freq,
            "weighting": self.weighting,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FeatureConfig":
        return cls(**{k: data[k] for k in cls().to_dict() if k in data})


def word_tokens(text: str) -> list[str]:
    """Split ``text`` into letter/digit runs, dropping punctuation."""
    return _TOKEN_RE.findall(text)


def tokenize(text: str, config: FeatureConfig | None = None) -> list[str]:
    """Tokenize ``text``; lowercasing keeps umlauts and ß intact.

    >>> tokenize("Die Partei, die Partei!")
    ['die', 'partei', 'die', 'partei']
    """
    config = config or FeatureConfig()
    tokens = word_tokens(text)
    if config.lowercase:
        # str.lower, not casefold: casefold would turn "ß" into "ss".
        tokens = [t.lower() for t in tokens]
    return tokens


def ngrams(tokens: Sequence[str], n_min: int, n_max: int) -> list[str]:
    out = []
    for n in range(n_min, n_max + 1):
        for i in range(len(tokens) - n + 1):
            out.append(" ".join(tokens[i : i + n]))
    return out


def _text_of(item) -> str:
    return item if isinstance(item, str) else item.text


@dataclass(frozen=True)
class Vocabulary:
    """Frozen term index.  ``terms`` is sorted; a term's index is its position."""

    terms: tuple[str, ...]
    doc_freq: tuple[int, ...]
    n_docs: int
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.terms) != len(self.doc_freq):
            raise StructuralError("terms and doc_freq differ in length")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})
        if len(self.index) != len(self.terms):
            raise StructuralError("duplicate terms in vocabulary")

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def df(self, term: str) -> int:
        return self.doc_freq[self.index[term]]

    def idf(self) -> np.ndarray:
        """Smoothed idf, ``ln((1 + N) / (1 + df)) + 1``, one entry per term."""
        df = np.asarray(self.doc_freq, dtype=np.float64)
        return np.log((1.0 + self.n_docs) / (1.0 + df)) + 1.0

    def to_records(self) -> list[list]:
        return [[t, i, d] for i, (t, d) in enumerate(zip(self.terms, self.doc_freq))]

    @classmethod
    def from_records(cls, records: Iterable[Sequence], n_docs: int) -> "Vocabulary":
        records = sorted(records, key=lambda r: r[1])
        for expected, (_, i, _) in enumerate(records):
            if i != expected:
                raise StructuralError(f"vocabulary indices not dense at {expected}")
        return cls(
            terms=tuple(r[0] for r in records),
            doc_freq=tuple(int(r[2]) for r in records),
            n_docs=int(n_docs),
        )


def build_vocabulary(examples: Sequence, config: FeatureConfig) -> Vocabulary:
    """Collect n-grams from the training paragraphs and prune by document frequency.

    ``examples`` may hold Paragraph objects or plain strings.
    """
    if len(examples) == 0:
        raise PreconditionError("cannot build a vocabulary from zero examples")
    df: Counter[str] = Counter()
    for ex in examples:
        toks = tokenize(_text_of(ex), config)
        df.update(set(ngrams(toks, config.ngram_min, config.ngram_max)))
    kept = sorted(t for t, c in df.items() if c >= config.min_doc_freq)
    return Vocabulary(terms=tuple(kept), doc_freq=tuple(df[t] for t in kept), n_docs=len(examples))


@dataclass(frozen=True)
class FeatureVector:
    """Sparse vector: strictly increasing ``indices`` with non-zero ``weights``."""

    indices: tuple[int, ...]
    weights: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.indices)

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        out[list(self.indices)] = self.weights
        return out


def vectorize(paragraph, vocab: Vocabulary, config: FeatureConfig) -> FeatureVector:
    toks = tokenize(_text_of(paragraph), config)
    counts = Counter(
        vocab.index[g] for g in ngrams(toks, config.ngram_min, config.ngram_max) if g in vocab.index
    )
    if not counts:
        return FeatureVector((), ())
    idx = sorted(counts)
    w = [float(counts[i]) for i in idx]
    if config.weighting == "tf-idf":
        w = [tf * (math.log((1.0 + vocab.n_docs) / (1.0 + vocab.doc_freq[i])) + 1.0) for tf, i in zip(w, idx)]
        norm = math.sqrt(math.fsum(x * x for x in w))
        w = [x / norm for x in w]
    return FeatureVector(tuple(idx), tuple(w))


def to_matrix(vectors: Sequence[FeatureVector], n_features: int) -> sp.csr_matrix:
    """Stack feature vectors into a CSR matrix of shape ``(len(vectors), n_features)``."""
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + len(v)
    indices = np.fromiter((j for v in vectors for j in v.indices), dtype=np.int64, count=int(indptr[-1]))
    data = np.fromiter((x for v in vectors for x in v.weights), dtype=np.float64, count=int(indptr[-1]))
    if indices.size and (indices.min() < 0 or indices.max() >= n_features):
        raise StructuralError(f"feature index out of range for dimension {n_features}")
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), n_features))
