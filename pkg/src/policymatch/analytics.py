"""Categorical distributions, paired comparisons, and scatter exports.

Percentages are always computed within the filtered set under report, so a
per-country or per-type restriction changes the denominator, not just the
rows. Buckets order count-descending then label-ascending for
deterministic exports. Display serialization rounds percentages to one
decimal place; machine (JSON) exports keep raw values so reports
round-trip losslessly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from .matching import CoverageRow
from .model import CofogDivision, Opportunity, OpportunityType
from .openalex import InstitutionStats

__all__ = [
    "DistributionReport",
    "Bucket",
    "ScatterPoint",
    "distribution",
    "compare_distributions",
    "ComparisonRow",
    "scatter",
    "export_report",
    "read_report_json",
    "load_count_table",
    "write_scatter_csv",
    "write_comparison_csv",
]

DIMENSIONS = ("cofog", "country", "opportunity_type")


@dataclass(frozen=True)
class Bucket:
    label: str
    count: int
    pct: float


@dataclass(frozen=True)
class DistributionReport:
    dimension: str
    buckets: tuple[Bucket, ...]
    total: int

    def __post_init__(self):
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension: {self.dimension!r}")
        object.__setattr__(self, "buckets", tuple(self.buckets))

    def pct_of(self, label: str) -> float:
        for bucket in self.buckets:
            if bucket.label == label:
                return bucket.pct
        return 0.0


@dataclass(frozen=True)
class ScatterPoint:
    institution_id: str
    x: int
    y: float
    scope: str


def _label_for(opp: Opportunity, dimension: str) -> str:
    if dimension == "cofog":
        return opp.cofog.label
    if dimension == "country":
        return opp.country
    return opp.opportunity_type.label


def distribution(
    records: Sequence[Opportunity],
    by: str,
    country: Optional[str] = None,
    opportunity_type: Optional[OpportunityType] = None,
    cofog: Optional[CofogDivision] = None,
    predicate: Optional[Callable[[Opportunity], bool]] = None,
) -> DistributionReport:
    """Exact counts and within-filter percentages along one dimension."""
    if by not in DIMENSIONS:
        raise ValueError(f"unknown dimension: {by!r}")
    selected = [
        o
        for o in records
        if (country is None or o.country == country)
        and (opportunity_type is None or o.opportunity_type == opportunity_type)
        and (cofog is None or o.cofog == cofog)
        and (predicate is None or predicate(o))
    ]
    if not selected:
        raise ValueError("no records after filtering; distribution undefined")
    counts: dict[str, int] = {}
    for opp in selected:
        label = _label_for(opp, by)
        counts[label] = counts.get(label, 0) + 1
    total = len(selected)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    buckets = tuple(
        Bucket(label=label, count=count, pct=100.0 * count / total)
        for label, count in ordered
    )
    return DistributionReport(dimension=by, buckets=buckets, total=total)


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    pct_a: float
    pct_b: float
    delta: float


def compare_distributions(
    a: DistributionReport, b: DistributionReport
) -> list[ComparisonRow]:
    """Pair two same-dimension reports over the union of their labels.

    A label absent on one side contributes 0%. Rows sort by label so the
    output is deterministic; deltas are pct_a - pct_b.
    """
    if a.dimension != b.dimension:
        raise ValueError(f"dimension mismatch: {a.dimension!r} vs {b.dimension!r}")
    labels = sorted({bk.label for bk in a.buckets} | {bk.label for bk in b.buckets})
    return [
        ComparisonRow(
            label=label,
            pct_a=a.pct_of(label),
            pct_b=b.pct_of(label),
            delta=a.pct_of(label) - b.pct_of(label),
        )
        for label in labels
    ]


def scatter(
    stats: Mapping[str, InstitutionStats],
    coverage_rows: Optional[Sequence[CoverageRow]] = None,
    mode: str = "absolute",
    scope: str = "all",
) -> list[ScatterPoint]:
    """Institution scatter: x is abstract-bearing publication volume.

    absolute mode: y = count of the institution's papers with at least one
    high-confidence match (n_matched). coverage mode: y is taken verbatim
    from the matching module's CoverageRow for the scope — no recomputation
    here, so plotted values cannot drift from the coverage tables.
    """
    if mode not in ("absolute", "coverage"):
        raise ValueError(f"unknown scatter mode: {mode!r}")
    if mode == "absolute":
        return [
            ScatterPoint(
                institution_id=s.institution_id,
                x=s.n_with_abstracts,
                y=float(s.n_matched),
                scope=scope,
            )
            for _, s in sorted(stats.items())
        ]
    if coverage_rows is None:
        raise ValueError("coverage mode requires coverage rows for the requested scope")
    rows = [r for r in coverage_rows if r.scope == scope]
    if not rows:
        raise ValueError(f"no coverage rows for scope {scope!r}")
    points = []
    for row in sorted(rows, key=lambda r: r.institution_id):
        if row.institution_id not in stats:
            continue
        points.append(
            ScatterPoint(
                institution_id=row.institution_id,
                x=stats[row.institution_id].n_with_abstracts,
                y=row.coverage_pct,
                scope=scope,
            )
        )
    return points


def export_report(
    report: DistributionReport, path: Union[str, Path], format: str = "csv"
) -> None:
    """Write a distribution report; byte-deterministic for identical inputs.

    CSV is the display format (percentages at 1 decimal place, counts
    exact); JSON carries raw percentages and round-trips losslessly.
    """
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([report.dimension, "count", "pct"])
            for bucket in report.buckets:
                writer.writerow([bucket.label, bucket.count, f"{bucket.pct:.1f}"])
    elif format == "json":
        payload = {
            "dimension": report.dimension,
            "total": report.total,
            "buckets": [
                {"label": b.label, "count": b.count, "pct": b.pct} for b in report.buckets
            ],
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        raise ValueError(f"unknown format: {format!r}")


def read_report_json(path: Union[str, Path]) -> DistributionReport:
    payload = json.loads(Path(path).read_text())
    return DistributionReport(
        dimension=payload["dimension"],
        buckets=tuple(
            Bucket(label=b["label"], count=b["count"], pct=b["pct"])
            for b in payload["buckets"]
        ),
        total=payload["total"],
    )


def load_count_table(path: Union[str, Path], dimension: str = "cofog") -> DistributionReport:
    """Build a report from an imported count table (CSV cofog_code,count).

    Used for externally supplied corpora (e.g. policy-document counts)
    whose raw documents are not available; any upstream restrictions are
    the data supplier's responsibility and belong in surrounding metadata.
    """
    counts: dict[str, int] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            label = CofogDivision.parse(row["cofog_code"]).label
            counts[label] = counts.get(label, 0) + int(row["count"])
    total = sum(counts.values())
    if total == 0:
        raise ValueError(f"count table {path} is empty")
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return DistributionReport(
        dimension=dimension,
        buckets=tuple(
            Bucket(label=label, count=count, pct=100.0 * count / total)
            for label, count in ordered
        ),
        total=total,
    )


def write_scatter_csv(points: Iterable[ScatterPoint], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["institution_id", "x", "y", "scope"])
        for p in points:
            writer.writerow([p.institution_id, p.x, repr(p.y), p.scope])


def write_comparison_csv(rows: Iterable[ComparisonRow], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "pct_a", "pct_b", "delta"])
        for row in rows:
            writer.writerow([row.label, f"{row.pct_a:.1f}", f"{row.pct_b:.1f}", f"{row.delta:+.1f}"])
