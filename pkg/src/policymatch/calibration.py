"""Pair-evaluation labels, tier quality tables, and threshold proposal.

The labeled-pair schema mirrors the three-dimension evaluation used to
calibrate the distance tiers: relevance 0-2, author expertise 0-2,
scale/scope alignment 0-1. The composite score is the equal-weight sum
scaled to [0, 1]; it is the minimal strictly-monotone choice and is
deliberately easy to swap out.

Threshold proposal mechanizes "pick cut-points with a monotonic quality
gradient" as a stated, testable objective: exhaustive grid search keeping
monotone candidates with minimum tier occupancy, maximizing the smallest
adjacent-tier gap in the all-dimensions-positive rate.
"""

from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass
from math import ceil
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .matching import classify_tier
from .model import Tier, TierThresholds, validate_thresholds

__all__ = [
    "EvalScores",
    "ScoredPair",
    "TierRow",
    "TierQualityTable",
    "MonotonicityVerdict",
    "composite_score",
    "evaluate_tiers",
    "is_monotonic",
    "propose_thresholds",
    "read_scored_pairs",
    "write_tier_table_csv",
    "load_reference_table",
]

METRICS = ("pct_top_score", "pct_all_positive", "pct_at_least_partial", "pct_not_relevant")


@dataclass(frozen=True)
class EvalScores:
    """Relevance 0-2, expertise 0-2, scale/scope alignment 0-1."""

    relevance: int
    expertise: int
    scope: int

    def __post_init__(self):
        if self.relevance not in (0, 1, 2):
            raise ValueError(f"relevance must be 0-2, got {self.relevance}")
        if self.expertise not in (0, 1, 2):
            raise ValueError(f"expertise must be 0-2, got {self.expertise}")
        if self.scope not in (0, 1):
            raise ValueError(f"scope must be 0-1, got {self.scope}")

    @property
    def is_top(self) -> bool:
        return (self.relevance, self.expertise, self.scope) == (2, 2, 1)

    @property
    def all_positive(self) -> bool:
        return self.relevance >= 1 and self.expertise >= 1 and self.scope == 1

    @property
    def at_least_partial(self) -> bool:
        return self.relevance >= 1


@dataclass(frozen=True)
class ScoredPair:
    opportunity_id: str
    publication_id: str
    distance: float
    scores: EvalScores

    def __post_init__(self):
        if self.distance < 0:
            raise ValueError(f"distance must be non-negative, got {self.distance}")


def composite_score(s: EvalScores) -> float:
    """Equal-weight sum scaled to [0, 1]; strictly monotone in each dimension."""
    return (s.relevance + s.expertise + s.scope) / 5.0


@dataclass(frozen=True)
class TierRow:
    """Quality metrics for one tier; an empty tier has None metrics, not 0%."""

    n_pairs: Optional[int]
    pct_top_score: Optional[float]
    pct_all_positive: Optional[float]
    pct_at_least_partial: Optional[float]
    pct_not_relevant: Optional[float]

    @property
    def populated(self) -> bool:
        return self.pct_all_positive is not None


_EMPTY_ROW = TierRow(n_pairs=0, pct_top_score=None, pct_all_positive=None,
                     pct_at_least_partial=None, pct_not_relevant=None)


@dataclass(frozen=True)
class TierQualityTable:
    green: TierRow
    yellow: TierRow
    orange: TierRow
    red: TierRow
    n_excluded: int = 0

    def row(self, tier: Tier) -> TierRow:
        return {Tier.GREEN: self.green, Tier.YELLOW: self.yellow,
                Tier.ORANGE: self.orange, Tier.RED: self.red}[tier]


def _row_from_counts(n: int, top: int, allpos: int, partial: int, notrel: int) -> TierRow:
    if n == 0:
        return _EMPTY_ROW
    return TierRow(
        n_pairs=n,
        pct_top_score=100.0 * top / n,
        pct_all_positive=100.0 * allpos / n,
        pct_at_least_partial=100.0 * partial / n,
        pct_not_relevant=100.0 * notrel / n,
    )


def evaluate_tiers(
    pairs: Sequence[ScoredPair], t: TierThresholds
) -> TierQualityTable:
    """Band pairs by distance and compute per-tier quality percentages.

    Pairs beyond the Red threshold are dropped from the table; their count
    is reported in n_excluded.
    """
    if not pairs:
        raise ValueError("pairs must be non-empty")
    validate_thresholds(t)
    counts = {tier: [0, 0, 0, 0, 0] for tier in Tier}  # n, top, allpos, partial, notrel
    excluded = 0
    for pair in pairs:
        tier = classify_tier(pair.distance, t)
        if tier is None:
            excluded += 1
            continue
        c = counts[tier]
        s = pair.scores
        c[0] += 1
        c[1] += s.is_top
        c[2] += s.all_positive
        c[3] += s.at_least_partial
        c[4] += not s.at_least_partial
    return TierQualityTable(
        green=_row_from_counts(*counts[Tier.GREEN]),
        yellow=_row_from_counts(*counts[Tier.YELLOW]),
        orange=_row_from_counts(*counts[Tier.ORANGE]),
        red=_row_from_counts(*counts[Tier.RED]),
        n_excluded=excluded,
    )


@dataclass(frozen=True)
class MonotonicityVerdict:
    overall: bool
    per_metric: dict[str, bool]

    def __bool__(self) -> bool:
        return self.overall


def is_monotonic(table: TierQualityTable) -> MonotonicityVerdict:
    """Non-strict quality gradient check across Green -> Red.

    The three positive metrics must be non-increasing and the not-relevant
    share non-decreasing. All four tiers must be populated.
    """
    rows = [table.green, table.yellow, table.orange, table.red]
    for tier, row in zip(Tier, rows):
        if not row.populated:
            raise ValueError(f"tier {tier.label} is empty; monotonicity undefined")
    verdicts = {}
    for metric in METRICS:
        values = [getattr(row, metric) for row in rows]
        if metric == "pct_not_relevant":
            ok = all(a <= b for a, b in zip(values, values[1:]))
        else:
            ok = all(a >= b for a, b in zip(values, values[1:]))
        verdicts[metric] = ok
    return MonotonicityVerdict(overall=all(verdicts.values()), per_metric=verdicts)


class InfeasibleThresholds(ValueError):
    """No grid candidate satisfied the constraints; names the binding one."""

    def __init__(self, constraint: str, message: str):
        self.constraint = constraint
        super().__init__(message)


def propose_thresholds(
    pairs: Sequence[ScoredPair],
    grid_step: float = 0.005,
    min_tier_fraction: float = 0.05,
) -> TierThresholds:
    """Exhaustive search for tier cut-points over the observed distance range.

    Candidate 4-tuples come from the grid [min distance, max distance] at
    grid_step. A candidate is kept iff the induced table is monotone on all
    four metrics and every tier holds at least min_tier_fraction of the
    input pairs (and at least one pair). Among the keepers the one
    maximizing the minimum adjacent-tier gap in pct_all_positive wins;
    exact ties go to the lexicographically smallest tuple.
    """
    if len(pairs) < 100:
        raise ValueError(f"need >= 100 pairs, got {len(pairs)}")
    if not (0 < grid_step <= 0.01):
        raise ValueError(f"grid_step must be in (0, 0.01], got {grid_step}")

    ordered = sorted(pairs, key=lambda p: p.distance)
    dists = [p.distance for p in ordered]
    n_total = len(ordered)

    # Prefix sums aligned with the sorted order: cut c covers the first
    # bisect_right(dists, c) pairs.
    cum_top = [0]
    cum_allpos = [0]
    cum_partial = [0]
    cum_notrel = [0]
    for p in ordered:
        s = p.scores
        cum_top.append(cum_top[-1] + s.is_top)
        cum_allpos.append(cum_allpos[-1] + s.all_positive)
        cum_partial.append(cum_partial[-1] + s.at_least_partial)
        cum_notrel.append(cum_notrel[-1] + (not s.at_least_partial))

    dmin, dmax = dists[0], dists[-1]
    grid: list[float] = []
    i = 0
    while True:
        value = dmin + i * grid_step
        if value > dmax + 1e-12:
            break
        grid.append(value)
        i += 1
    if len(grid) < 4:
        raise InfeasibleThresholds(
            "grid", f"grid over [{dmin}, {dmax}] at step {grid_step} has {len(grid)} < 4 points"
        )

    min_n = max(ceil(min_tier_fraction * n_total), 1)
    cut_idx = [bisect_right(dists, c) for c in grid]

    def span(lo_idx: int, hi_idx: int) -> tuple[int, int, int, int, int]:
        return (
            hi_idx - lo_idx,
            cum_top[hi_idx] - cum_top[lo_idx],
            cum_allpos[hi_idx] - cum_allpos[lo_idx],
            cum_partial[hi_idx] - cum_partial[lo_idx],
            cum_notrel[hi_idx] - cum_notrel[lo_idx],
        )

    best_gap: Optional[float] = None
    best_tuple: Optional[tuple[float, float, float, float]] = None
    any_occupied = False
    any_valid = False
    n_grid = len(grid)

    for a in range(n_grid):
        if grid[a] <= 0:
            continue
        ia = cut_idx[a]
        if ia < min_n:
            continue
        for b in range(a + 1, n_grid):
            ib = cut_idx[b]
            if ib - ia < min_n:
                continue
            for c in range(b + 1, n_grid):
                ic = cut_idx[c]
                if ic - ib < min_n:
                    continue
                for d in range(c + 1, n_grid):
                    idx = cut_idx[d]
                    if idx - ic < min_n:
                        continue
                    any_occupied = True
                    bands = [span(0, ia), span(ia, ib), span(ib, ic), span(ic, idx)]
                    # Same percentage arithmetic as evaluate_tiers, and exact
                    # non-strict comparisons, so the winner is guaranteed to
                    # pass is_monotonic on its own input.
                    rates = []
                    ok = True
                    prev = None
                    for n, top, allpos, partial, notrel in bands:
                        rate = (
                            100.0 * top / n,
                            100.0 * allpos / n,
                            100.0 * partial / n,
                            100.0 * notrel / n,
                        )
                        if prev is not None and (
                            rate[0] > prev[0]
                            or rate[1] > prev[1]
                            or rate[2] > prev[2]
                            or rate[3] < prev[3]
                        ):
                            ok = False
                            break
                        rates.append(rate)
                        prev = rate
                    if not ok:
                        continue
                    any_valid = True
                    gap = min(
                        rates[0][1] - rates[1][1],
                        rates[1][1] - rates[2][1],
                        rates[2][1] - rates[3][1],
                    )
                    candidate = (grid[a], grid[b], grid[c], grid[d])
                    if (
                        best_gap is None
                        or gap > best_gap
                        or (gap == best_gap and candidate < best_tuple)
                    ):
                        best_gap = gap
                        best_tuple = candidate

    if best_tuple is None:
        if not any_occupied:
            raise InfeasibleThresholds(
                "occupancy",
                f"no 4-tuple gives every tier >= {min_n} pairs "
                f"(min_tier_fraction={min_tier_fraction}, n={n_total})",
            )
        if not any_valid:
            raise InfeasibleThresholds(
                "monotonicity", "no occupancy-feasible tuple yields a monotone quality table"
            )
        raise InfeasibleThresholds("validity", "no valid candidate found")

    return validate_thresholds(TierThresholds(*best_tuple))


def read_scored_pairs(path: Union[str, Path]) -> list[ScoredPair]:
    """CSV input: opportunity_id,publication_id,distance,relevance,expertise,scope."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            ScoredPair(
                opportunity_id=row["opportunity_id"],
                publication_id=row["publication_id"],
                distance=float(row["distance"]),
                scores=EvalScores(
                    relevance=int(row["relevance"]),
                    expertise=int(row["expertise"]),
                    scope=int(row["scope"]),
                ),
            )
            for row in reader
        ]


_CSV_METRIC_LABELS = {
    "pct_top_score": "top_score",
    "pct_all_positive": "all_positive",
    "pct_at_least_partial": "at_least_partial",
    "pct_not_relevant": "not_relevant",
}


def write_tier_table_csv(table: TierQualityTable, path: Union[str, Path]) -> None:
    """Metrics as rows, tiers as columns; percentages at 1 decimal place."""
    rows = [table.green, table.yellow, table.orange, table.red]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "Green", "Yellow", "Orange", "Red"])
        for metric, label in _CSV_METRIC_LABELS.items():
            writer.writerow(
                [label]
                + [
                    "" if getattr(r, metric) is None else f"{getattr(r, metric):.1f}"
                    for r in rows
                ]
            )
        writer.writerow(
            ["n_pairs"] + ["" if r.n_pairs is None else str(r.n_pairs) for r in rows]
        )
        writer.writerow(["n_excluded", str(table.n_excluded), "", "", ""])


def load_reference_table(path: Union[str, Path, None] = None) -> TierQualityTable:
    """Load the shipped published reference tier-quality table.

    The reference reports percentages only; n_pairs is unknown (None).
    """
    if path is None:
        path = Path(__file__).parent / "data" / "tier_quality_reference.csv"
    metrics: dict[str, list[Optional[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            values = [
                float(row[t]) if row[t] != "" else None
                for t in ("Green", "Yellow", "Orange", "Red")
            ]
            metrics[row["metric"]] = values
    rows = []
    for i in range(4):
        rows.append(
            TierRow(
                n_pairs=None,
                pct_top_score=metrics["top_score"][i],
                pct_all_positive=metrics["all_positive"][i],
                pct_at_least_partial=metrics["at_least_partial"][i],
                pct_not_relevant=metrics["not_relevant"][i],
            )
        )
    return TierQualityTable(green=rows[0], yellow=rows[1], orange=rows[2], red=rows[3])
