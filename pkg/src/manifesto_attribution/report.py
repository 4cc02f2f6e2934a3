"""Renderer-neutral outputs: the corpus-size table and plot payloads (boxplot, heatmap, bar)."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .attribution import AttributionReport
from .corpus import CorpusStats
from .errors import PreconditionError
from .evaluation import ConfusionMatrix

SCHEMA_VERSION = 1
STATS_COLUMNS = ("Party", "Document Length in Tokens", "Number of Paragraphs")
STATS_FORMATS = ("text", "csv", "structured")


def jsonl(records: Iterable[Mapping]) -> bytes:
    """Line-delimited JSON with sorted keys; every record gets a schema version."""
    lines = [json.dumps({"schema_version": SCHEMA_VERSION, **r}, sort_keys=True, ensure_ascii=False) for r in records]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def emit_stats_table(stats: CorpusStats, format: str = "text") -> bytes:
    """Party / token total / paragraph count table; thousands separators only in text mode."""
    rows = [(p.party, p.token_count, p.paragraph_count) for p in stats.parties]
    if format == "text":
        cells = [STATS_COLUMNS] + [(n, f"{t:,}", f"{c:,}") for n, t, c in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(3)]
        lines = []
        for r in cells:
            lines.append(" | ".join([r[0].ljust(widths[0])] + [r[i].rjust(widths[i]) for i in (1, 2)]).rstrip())
        return ("\n".join(lines) + "\n").encode("utf-8")
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(STATS_COLUMNS)
        w.writerows(rows)
        return buf.getvalue().encode("utf-8")
    if format == "structured":
        records = [{"kind": "stats_header", "columns": list(STATS_COLUMNS)}]
        records += [{"kind": "stats_row", **dict(zip(STATS_COLUMNS, r))} for r in rows]
        return jsonl(records)
    raise PreconditionError(f"unknown table format {format!r}; expected one of {STATS_FORMATS}")


def parse_stats_csv(data: bytes) -> list[tuple[str, int, int]]:
    reader = csv.reader(io.StringIO(data.decode("utf-8")))
    header = next(reader)
    if tuple(header) != STATS_COLUMNS:
        raise PreconditionError(f"unexpected header {header}")
    return [(r[0], int(r[1]), int(r[2])) for r in reader]


@dataclass(frozen=True, eq=False)
class PlotData:
    kind: str  # "boxplot" | "heatmap" | "bar"
    labels: tuple[str, ...]
    payload: np.ndarray
    flags: tuple[str, ...] = field(default=())

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "labels": list(self.labels),
            "payload": self.payload.tolist(),
            "flags": list(self.flags),
        }


def emit_plot_data(source) -> PlotData:
    """Boxplot rows from corpus stats, a row-normalized heatmap from a confusion
    matrix, or a share bar chart from an attribution report."""
    if isinstance(source, CorpusStats):
        payload = np.array([p.lengths.five_numbers() for p in source.parties], dtype=np.float64).reshape(-1, 5)
        return PlotData("boxplot", tuple(p.party for p in source.parties), payload)
    if isinstance(source, ConfusionMatrix):
        flags = tuple(f"zero support: {lab.name}" for lab, s in zip(source.labels, source.supports()) if s == 0)
        return PlotData("heatmap", tuple(lab.name for lab in source.labels), source.normalized(), flags)
    if isinstance(source, AttributionReport):
        return PlotData("bar", tuple(lab.name for lab in source.labels), np.array(source.shares, dtype=np.float64))
    raise PreconditionError(f"no plot data for {type(source).__name__}")
