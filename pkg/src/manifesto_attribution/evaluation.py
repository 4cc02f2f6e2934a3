"""Train/test splitting, confusion matrices and classification reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import numpy as np

from .corpus import Corpus, PartyLabel, check_labels
from .errors import PreconditionError, StructuralError

REPORT_COLUMNS = ("precision", "recall", "f1-score", "support")


@dataclass(frozen=True)
class SplitConfig:
    test_fraction: float = 0.3
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise PreconditionError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")

    def to_dict(self) -> dict:
        return {"test_fraction": self.test_fraction, "seed": self.seed, "stratified": self.stratified}

    @classmethod
    def from_dict(cls, data) -> "SplitConfig":
        return cls(**{k: data[k] for k in cls().to_dict() if k in data})


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_positions(corpus: Corpus, config: SplitConfig) -> tuple[list[int], list[int]]:
    """Train and test positions into ``corpus.examples``, each sorted ascending."""
    rng = np.random.default_rng(config.seed)
    test: list[int] = []
    if config.stratified:
        by_class: dict[int, list[int]] = {lab.id: [] for lab in corpus.labels}
        for i, (_, lab) in enumerate(corpus.examples):
            by_class[lab.id].append(i)
        for lab in corpus.labels:
            members = by_class[lab.id]
            if len(members) < 2:
                raise PreconditionError(f"class {lab.name!r} has {len(members)} example(s); stratified split needs >= 2")
            n_test = min(max(1, _round_half_up(config.test_fraction * len(members))), len(members) - 1)
            perm = rng.permutation(len(members))
            test.extend(members[j] for j in perm[:n_test])
    else:
        n = len(corpus)
        if n < 2:
            raise PreconditionError("a split needs at least two examples")
        n_test = min(max(1, _round_half_up(config.test_fraction * n)), n - 1)
        test.extend(int(j) for j in rng.permutation(n)[:n_test])
    test_set = set(test)
    train = [i for i in range(len(corpus)) if i not in test_set]
    return train, sorted(test_set)


def stratified_split(corpus: Corpus, config: SplitConfig = SplitConfig()) -> tuple[Corpus, Corpus]:
    """Seeded per-class split; each class sends ``round(fraction * size)`` (at least 1) examples to test."""
    train, test = split_positions(corpus, config)
    return corpus.subset(train), corpus.subset(test)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    counts: np.ndarray
    labels: tuple[PartyLabel, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        c = np.asarray(self.counts, dtype=np.int64)
        k = len(self.labels)
        if c.shape != (k, k):
            raise StructuralError(f"confusion counts have shape {c.shape}, expected ({k}, {k})")
        if np.any(c < 0):
            raise StructuralError("confusion counts must be non-negative")
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def supports(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def normalized(self) -> np.ndarray:
        """Row-normalized matrix; rows without support stay all-zero."""
        rows = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        out = np.zeros(self.counts.shape)
        np.divide(self.counts, rows, out=out, where=rows > 0)
        return out


def _ids(items: Sequence, k: int) -> list[int]:
    out = []
    for it in items:
        i = it.id if isinstance(it, PartyLabel) else int(it)
        if not 0 <= i < k:
            raise StructuralError(f"label {it!r} outside the label set")
        out.append(i)
    return out


def confusion_matrix(truths: Sequence, predictions: Sequence, labels: Sequence[PartyLabel]) -> ConfusionMatrix:
    labels = tuple(labels)
    check_labels(labels)
    if len(truths) != len(predictions):
        raise StructuralError(f"{len(truths)} truths vs {len(predictions)} predictions")
    k = len(labels)
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (_ids(truths, k), _ids(predictions, k)), 1)
    return ConfusionMatrix(counts, labels)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


def f1_score(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


@dataclass(frozen=True)
class EvalReport:
    names: tuple[str, ...]
    per_class: tuple[ClassMetrics, ...]
    accuracy: float
    macro: ClassMetrics
    weighted: ClassMetrics
    total: int
    warnings: tuple[str, ...] = field(default=())

    def by_name(self) -> dict[str, ClassMetrics]:
        return dict(zip(self.names, self.per_class))

    def rows(self) -> list[tuple[str, float | None, float | None, float, int]]:
        """Table rows in the order per-class, accuracy, macro avg, weighted avg."""
        out = [(n, m.precision, m.recall, m.f1, m.support) for n, m in zip(self.names, self.per_class)]
        out.append(("accuracy", None, None, self.accuracy, self.total))
        out.append(("macro avg", self.macro.precision, self.macro.recall, self.macro.f1, self.total))
        out.append(("weighted avg", self.weighted.precision, self.weighted.recall, self.weighted.f1, self.total))
        return out


def aggregate_report(
    names: Sequence[str], per_class: Sequence[ClassMetrics], accuracy: float | None = None
) -> EvalReport:
    """Macro and support-weighted averages over per-class metrics.

    Without an explicit ``accuracy`` it is taken as the support-weighted
    recall, which equals trace/total for any confusion matrix.  Macro F1 is
    the mean of the per-class F1 values.
    """
    if len(names) != len(per_class):
        raise StructuralError("names and metrics differ in length")
    supports = np.array([m.support for m in per_class], dtype=np.float64)
    total = int(supports.sum())
    if total <= 0:
        raise PreconditionError("report needs a positive total support")
    cols = {a: np.array([getattr(m, a) for m in per_class], dtype=np.float64) for a in ("precision", "recall", "f1")}
    macro = ClassMetrics(*(float(cols[a].mean()) for a in ("precision", "recall", "f1")), support=total)
    weighted = ClassMetrics(*(float(cols[a] @ supports / total) for a in ("precision", "recall", "f1")), support=total)
    if accuracy is None:
        accuracy = weighted.recall
    warnings = tuple(f"{n}: zero support" for n, m in zip(names, per_class) if m.support == 0)
    return EvalReport(tuple(names), tuple(per_class), float(accuracy), macro, weighted, total, warnings)


def evaluation_report(confusion: ConfusionMatrix) -> EvalReport:
    if confusion.total == 0:
        raise PreconditionError("cannot report on an empty confusion matrix")
    c = confusion.counts
    diag = np.diag(c).astype(np.float64)
    col = c.sum(axis=0)
    row = c.sum(axis=1)
    per_class = []
    warnings = []
    for i, lab in enumerate(confusion.labels):
        p = diag[i] / col[i] if col[i] else 0.0
        r = diag[i] / row[i] if row[i] else 0.0
        if not col[i]:
            warnings.append(f"{lab.name}: no predictions, precision set to 0")
        per_class.append(ClassMetrics(float(p), float(r), f1_score(p, r), int(row[i])))
    rep = aggregate_report([lab.name for lab in confusion.labels], per_class, confusion.accuracy())
    return EvalReport(**{**rep.__dict__, "warnings": tuple(warnings) + rep.warnings})


# -- presentation ------------------------------------------------------------


def fmt4(x: float) -> str:
    """Four decimals, rounding half up."""
    return str(Decimal(repr(float(x))).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP))


def format_report(report: EvalReport, fmt: str = "text") -> str:
    """Render as ``text`` (aligned), ``csv`` or ``structured`` (JSON lines)."""
    rows = report.rows()
    if fmt == "text":
        width = max(len(r[0]) for r in rows) + 2
        lines = [" " * width + "".join(f"{c:>10}" for c in REPORT_COLUMNS)]
        for name, p, r, f, s in rows:
            cells = ["" if v is None else fmt4(v) for v in (p, r, f)] + [str(s)]
            lines.append(f"{name:<{width}}" + "".join(f"{c:>10}" for c in cells))
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("",) + REPORT_COLUMNS)
        for name, p, r, f, s in rows:
            w.writerow([name] + ["" if v is None else fmt4(v) for v in (p, r, f)] + [s])
        return buf.getvalue()
    if fmt == "structured":
        out = []
        for name, p, r, f, s in rows:
            rec = {"schema_version": 1, "row": name, "precision": p, "recall": r, "f1-score": f, "support": s}
            out.append(json.dumps(rec, sort_keys=True))
        for wmsg in report.warnings:
            out.append(json.dumps({"schema_version": 1, "warning": wmsg}, sort_keys=True))
        return "\n".join(out) + "\n"
    raise PreconditionError(f"unknown report format {fmt!r}")
