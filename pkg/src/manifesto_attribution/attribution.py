"""Apply a trained classifier to an unlabeled document and summarize party shares and certainty."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import numpy as np

from .corpus import Paragraph, PartyLabel
from .errors import PreconditionError, StructuralError
from .model import PredictedDistribution

HIGH_CERTAINTY = 0.99
N_BUCKETS = 10


class Predictor(Protocol):
    labels: tuple[PartyLabel, ...]

    def predict(self, paragraph: Paragraph) -> PredictedDistribution: ...


@dataclass(frozen=True)
class ParagraphAttribution:
    paragraph: Paragraph
    distribution: PredictedDistribution

    @property
    def certainty(self) -> float:
        return self.distribution.max_prob

    @property
    def party(self) -> PartyLabel:
        return self.distribution.argmax_label


@dataclass(frozen=True)
class CertaintyAnalysis:
    high: tuple[ParagraphAttribution, ...]
    low: tuple[ParagraphAttribution, ...]
    histogram: tuple[int, ...]
    edges: tuple[float, ...]
    high_threshold: float
    low_threshold: float


@dataclass(frozen=True)
class AttributionReport:
    labels: tuple[PartyLabel, ...]
    attributions: tuple[ParagraphAttribution, ...]
    shares: tuple[float, ...]
    soft_shares: tuple[float, ...]
    certainty: CertaintyAnalysis

    @property
    def low_certainty(self) -> tuple[ParagraphAttribution, ...]:
        return self.certainty.low

    def share_by_name(self) -> dict[str, float]:
        return {lab.name: s for lab, s in zip(self.labels, self.shares)}

    def counts(self) -> list[int]:
        out = [0] * len(self.labels)
        for a in self.attributions:
            out[a.party.id] += 1
        return out


def default_low_threshold(k: int) -> float:
    return 1.0 / k + 0.1


def _analyse(attrs: Sequence[ParagraphAttribution], k: int, high: float, low: float) -> CertaintyAnalysis:
    if not 0 < low < high <= 1:
        raise PreconditionError(f"need 0 < low_threshold < high_threshold <= 1, got low={low}, high={high}")
    floor = 1.0 / k
    edges = np.linspace(floor, 1.0, N_BUCKETS + 1)
    hist = [0] * N_BUCKETS
    width = (1.0 - floor) / N_BUCKETS
    for a in attrs:
        # Certainty never drops below 1/K in exact arithmetic; clamp float noise.
        b = int((a.certainty - floor) // width) if width > 0 else 0
        hist[min(max(b, 0), N_BUCKETS - 1)] += 1
    return CertaintyAnalysis(
        high=tuple(a for a in attrs if a.certainty > high),
        low=tuple(a for a in attrs if a.certainty < low),
        histogram=tuple(hist),
        edges=tuple(float(e) for e in edges),
        high_threshold=high,
        low_threshold=low,
    )


def build_report(labels: Sequence[PartyLabel], attrs: Sequence[ParagraphAttribution]) -> AttributionReport:
    labels = tuple(labels)
    k = len(labels)
    if not attrs:
        raise PreconditionError("attribution needs at least one paragraph")
    counts = [0] * k
    soft = np.zeros(k)
    for a in attrs:
        if len(a.distribution.probabilities) != k:
            raise StructuralError("distribution length does not match label set")
        counts[a.party.id] += 1
        soft += a.distribution.probabilities
    n = len(attrs)
    return AttributionReport(
        labels=labels,
        attributions=tuple(attrs),
        shares=tuple(c / n for c in counts),
        soft_shares=tuple(float(s) / n for s in soft),
        certainty=_analyse(attrs, k, HIGH_CERTAINTY, default_low_threshold(k)),
    )


def attribute_document(model: Predictor, paragraphs: Sequence[Paragraph]) -> AttributionReport:
    """Predict every paragraph; party shares count argmax wins per paragraph."""
    if not paragraphs:
        raise PreconditionError("the target document has no paragraphs")
    attrs = [ParagraphAttribution(p, model.predict(p)) for p in paragraphs]
    return build_report(model.labels, attrs)


def certainty_analysis(
    report: AttributionReport, high_threshold: float = HIGH_CERTAINTY, low_threshold: float | None = None
):
    """Return ``(high, low, histogram)``.

    ``high`` holds paragraphs with certainty strictly above ``high_threshold``,
    ``low`` those strictly below ``low_threshold`` (default ``1/K + 0.1``).
    The histogram has ten equal-width buckets over ``[1/K, 1]``.
    """
    k = len(report.labels)
    if low_threshold is None:
        low_threshold = default_low_threshold(k)
    ca = _analyse(report.attributions, k, high_threshold, low_threshold)
    return ca.high, ca.low, ca.histogram


@dataclass(frozen=True)
class ShareComparison:
    deltas: dict[str, float]
    over: tuple[str, ...]
    under: tuple[str, ...]


def share_comparison(report: AttributionReport, reference_shares: Mapping[str, float], tol: float = 1e-9) -> ShareComparison:
    """Attributed share minus reference share per party (e.g. against vote shares)."""
    names = [lab.name for lab in report.labels]
    if set(reference_shares) != set(names):
        raise StructuralError(f"reference parties {sorted(reference_shares)} differ from model parties {sorted(names)}")
    total = math.fsum(reference_shares.values())
    if abs(total - 1.0) > 1e-6 or any(v < 0 for v in reference_shares.values()):
        raise PreconditionError(f"reference shares must be non-negative and sum to 1, got sum {total}")
    deltas = {n: s - reference_shares[n] for n, s in zip(names, report.shares)}
    over = tuple(sorted((n for n in names if deltas[n] > tol), key=lambda n: -deltas[n]))
    under = tuple(sorted((n for n in names if deltas[n] < -tol), key=lambda n: deltas[n]))
    return ShareComparison(deltas, over, under)


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def paragraph_records(report: AttributionReport) -> list[dict]:
    return [
        {
            "index": a.paragraph.index,
            "text_sha256": text_hash(a.paragraph.text),
            "distribution": {lab.name: p for lab, p in zip(report.labels, a.distribution.probabilities)},
            "argmax": a.party.name,
            "certainty": a.certainty,
        }
        for a in report.attributions
    ]


def summary_record(report: AttributionReport) -> dict:
    ca = report.certainty
    return {
        "paragraphs": len(report.attributions),
        "counts": dict(zip((lab.name for lab in report.labels), report.counts())),
        "shares": report.share_by_name(),
        "soft_shares": {lab.name: s for lab, s in zip(report.labels, report.soft_shares)},
        "certainty": {
            "high_threshold": ca.high_threshold,
            "low_threshold": ca.low_threshold,
            "above_high": len(ca.high),
            "below_low": len(ca.low),
            "histogram": list(ca.histogram),
            "bucket_edges": list(ca.edges),
            "low_certainty_indices": [a.paragraph.index for a in ca.low],
        },
    }
