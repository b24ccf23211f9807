"""Inlier-Outlier Propagation Score per predicate node, with ranked reports.

IOP(v) = (f_i(v) - f_o(v)) / f_in(v): +1 means a node's flow goes entirely
to the Inlier terminal, -1 entirely to the Outlier terminal, 0 neutral.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .dpg import (
    INLIER_ID,
    LE,
    OUTLIER_ID,
    DpGraph,
    Predicate,
    predicate_id,
    predicate_label,
)


def iop_score(f_i: float, f_o: float, f_in: float) -> float:
    """(f_i - f_o) / f_in, clamped to [-1, 1].

    Terminal flows and inflow are accumulated in different orders, so a node
    whose flow is entirely terminal can come out a few ulps past an endpoint;
    the clamp restores the documented range.
    """
    if f_in <= 0.0:
        raise ValueError(f"f_in must be positive, got {f_in}")
    if f_i < 0.0 or f_o < 0.0:
        raise ValueError("terminal flows must be non-negative")
    return min(1.0, max(-1.0, (f_i - f_o) / f_in))


@dataclass(frozen=True)
class IopEntry:
    predicate: Predicate
    iop: float
    f_i: float
    f_o: float
    f_in: float


@dataclass(frozen=True)
class IopReport:
    """Per-predicate scores, sorted by descending IOP (ties: feature, LE first)."""

    entries: tuple[IopEntry, ...]
    feature_names: list[str] | None = None

    def label(self, entry: IopEntry) -> str:
        return predicate_label(entry.predicate, self.feature_names)

    def by_predicate(self) -> dict[Predicate, IopEntry]:
        return {e.predicate: e for e in self.entries}


def score_graph(graph: DpGraph) -> IopReport:
    """Score every predicate node of the graph.

    f_in sums all incoming edges including the virtual source and self-loops;
    missing terminal edges count as zero flow.
    """
    inflow: dict[str, float] = {}
    for (_, dst), w in graph.edges.items():
        inflow[dst] = inflow.get(dst, 0.0) + w

    entries = []
    for p in graph.predicates:
        pid = predicate_id(p)
        f_i = graph.edge_weight(pid, INLIER_ID)
        f_o = graph.edge_weight(pid, OUTLIER_ID)
        f_in = inflow.get(pid, 0.0)
        entries.append(
            IopEntry(predicate=p, iop=iop_score(f_i, f_o, f_in), f_i=f_i, f_o=f_o, f_in=f_in)
        )
    entries.sort(
        key=lambda e: (-e.iop, e.predicate.feature_index, 0 if e.predicate.sign == LE else 1)
    )
    names = graph.metadata.get("feature_names")
    return IopReport(entries=tuple(entries), feature_names=names)


def rank_report(report: IopReport, format: str = "table") -> str:
    """Render the report as an aligned text table or a JSON document.

    Table values are rounded to 4 decimals for display; the JSON form keeps
    full precision.
    """
    if format == "table":
        labels = [report.label(e) for e in report.entries]
        width = max([len("Predicate")] + [len(s) for s in labels])
        lines = [f"{'Predicate'.ljust(width)} | IOP-Score"]
        for label, e in zip(labels, report.entries):
            lines.append(f"{label.ljust(width)} | {e.iop:.4f}")
        return "\n".join(lines) + "\n"
    if format == "json":
        doc = {
            "schema_version": 1,
            "entries": [
                {
                    "feature": e.predicate.feature_index,
                    "sign": e.predicate.sign,
                    "label": report.label(e),
                    "iop": e.iop,
                    "f_i": e.f_i,
                    "f_o": e.f_o,
                    "f_in": e.f_in,
                }
                for e in report.entries
            ],
        }
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown report format {format!r}")
