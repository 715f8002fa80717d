"""Tier classification, opportunity-publication matching, ranking, coverage.

Tier boundaries are inclusive on the upper edge of each band; distances
beyond the Red threshold are the out-of-band Excluded outcome (returned as
``None``, never stored). Duplicate (opportunity, publication) pairs keep
the smallest distance so re-runs cannot inflate counts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator

from .knn import ExactNearestNeighbors, SearchConfig, search
from .model import (
    DEFAULT_THRESHOLDS,
    CofogDivision,
    Opportunity,
    Tier,
    TierThresholds,
    validate_thresholds,
)

__all__ = [
    "MatchRecord",
    "RankedResearcher",
    "CoverageRow",
    "TierClassifier",
    "classify_tier",
    "match_opportunity",
    "dedupe_records",
    "rank_researchers",
    "aggregate_institution",
    "coverage",
    "opportunity_coverage",
    "count_matched_publications",
    "write_matches_csv",
    "read_matches_csv",
    "write_coverage_csv",
]


@dataclass(frozen=True)
class MatchRecord:
    opportunity_id: str
    publication_id: str
    distance: float
    tier: Tier


@dataclass(frozen=True)
class RankedResearcher:
    author_id: str
    matched_work_count: int
    best_distance: float
    rank: int


@dataclass(frozen=True)
class CoverageRow:
    institution_id: str
    scope: str  # "all" or a two-digit COFOG code
    n_opportunities: int
    n_covered: int
    coverage_pct: float


def classify_tier(
    distance: float, t: TierThresholds = DEFAULT_THRESHOLDS
) -> Optional[Tier]:
    """Band a non-negative L2 distance; None means Excluded (beyond Red)."""
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    validate_thresholds(t)
    if distance <= t.green:
        return Tier.GREEN
    if distance <= t.yellow:
        return Tier.YELLOW
    if distance <= t.orange:
        return Tier.ORANGE
    if distance <= t.red:
        return Tier.RED
    return None


class TierClassifier(BaseEstimator):
    """sklearn-style wrapper over classify_tier for arrays of distances.

    predict maps each distance to a Tier or None (Excluded). Thresholds are
    plain constructor params so grid tooling can sweep them via get_params.
    """

    def __init__(
        self,
        green: float = DEFAULT_THRESHOLDS.green,
        yellow: float = DEFAULT_THRESHOLDS.yellow,
        orange: float = DEFAULT_THRESHOLDS.orange,
        red: float = DEFAULT_THRESHOLDS.red,
    ):
        self.green = green
        self.yellow = yellow
        self.orange = orange
        self.red = red

    @property
    def thresholds(self) -> TierThresholds:
        return TierThresholds(self.green, self.yellow, self.orange, self.red)

    def fit(self, X=None, y=None) -> "TierClassifier":
        validate_thresholds(self.thresholds)
        return self

    def predict(self, X: Iterable[float]) -> list[Optional[Tier]]:
        t = validate_thresholds(self.thresholds)
        return [classify_tier(float(d), t) for d in np.asarray(list(X), dtype=float)]


def match_opportunity(
    opportunity_id: str,
    opp_vector: np.ndarray,
    index: ExactNearestNeighbors,
    t: TierThresholds = DEFAULT_THRESHOLDS,
    cfg: SearchConfig = SearchConfig(),
) -> list[MatchRecord]:
    """Search top-k publications for one opportunity, classify, drop Excluded."""
    validate_thresholds(t)
    records = []
    for hit in search(index, opp_vector, cfg):
        tier = classify_tier(hit.distance, t)
        if tier is None:
            continue
        records.append(
            MatchRecord(
                opportunity_id=opportunity_id,
                publication_id=hit.record_id,
                distance=hit.distance,
                tier=tier,
            )
        )
    return records


def dedupe_records(records: Iterable[MatchRecord]) -> list[MatchRecord]:
    """Keep the smallest-distance record per (opportunity, publication) pair.

    Output order is the first-occurrence order of each pair, so a dedupe of
    an already-unique list is the identity.
    """
    best: dict[tuple[str, str], MatchRecord] = {}
    order: list[tuple[str, str]] = []
    for rec in records:
        key = (rec.opportunity_id, rec.publication_id)
        if key not in best:
            best[key] = rec
            order.append(key)
        elif rec.distance < best[key].distance:
            best[key] = rec
    return [best[key] for key in order]


def rank_researchers(
    records: Sequence[MatchRecord],
    authorship: Mapping[str, Sequence[str]],
) -> list[RankedResearcher]:
    """Rank authors of the matched set for a single opportunity.

    Key: matched-work count desc, then best (minimum) distance asc, then
    author id asc. Ranks are dense and 1-based; with the id tiebreak the
    key is total, so ranks are simply positional.
    """
    deduped = dedupe_records(records)
    counts: dict[str, int] = {}
    best: dict[str, float] = {}
    for rec in deduped:
        if rec.publication_id not in authorship:
            raise KeyError(f"publication id not resolvable: {rec.publication_id!r}")
        for author_id in authorship[rec.publication_id]:
            counts[author_id] = counts.get(author_id, 0) + 1
            if author_id not in best or rec.distance < best[author_id]:
                best[author_id] = rec.distance
    ordered = sorted(counts, key=lambda a: (-counts[a], best[a], a))
    return [
        RankedResearcher(
            author_id=a, matched_work_count=counts[a], best_distance=best[a], rank=i + 1
        )
        for i, a in enumerate(ordered)
    ]


def aggregate_institution(
    records: Iterable[MatchRecord],
    pub_to_institutions: Mapping[str, Sequence[str]],
) -> dict[tuple[str, str], dict[Tier, int]]:
    """Tier counts per (institution, opportunity).

    A publication affiliated to several institutions counts once for each.
    Duplicated (opportunity, publication) pairs are collapsed first.
    """
    agg: dict[tuple[str, str], dict[Tier, int]] = {}
    for rec in dedupe_records(records):
        for inst in pub_to_institutions.get(rec.publication_id, ()):
            key = (inst, rec.opportunity_id)
            tiers = agg.setdefault(key, {t: 0 for t in Tier})
            tiers[rec.tier] += 1
    return agg


def _scope_label(scope: Optional[CofogDivision]) -> str:
    return "all" if scope is None else scope.code


def _in_scope(opp: Opportunity, scope: Optional[CofogDivision]) -> bool:
    return scope is None or opp.cofog == scope


def coverage(
    agg: Mapping[tuple[str, str], Mapping[Tier, int]],
    opportunities: Sequence[Opportunity],
    scope: Optional[CofogDivision] = None,
    institutions: Optional[Sequence[str]] = None,
) -> list[CoverageRow]:
    """Per-institution share of in-scope opportunities with >=1 Green match.

    Scope restriction uses each opportunity's stored division, never
    re-classification. A scope with zero opportunities is an error (the
    percentage would be undefined), never a silent NaN.
    """
    in_scope_ids = {o.id for o in opportunities if _in_scope(o, scope)}
    if not in_scope_ids:
        raise ValueError(f"no opportunities in scope {_scope_label(scope)}")
    if institutions is None:
        institutions = sorted({inst for inst, _ in agg})
    rows = []
    for inst in institutions:
        covered = {
            opp_id
            for (agg_inst, opp_id), tiers in agg.items()
            if agg_inst == inst and opp_id in in_scope_ids and tiers.get(Tier.GREEN, 0) >= 1
        }
        n_opp = len(in_scope_ids)
        n_cov = len(covered)
        rows.append(
            CoverageRow(
                institution_id=inst,
                scope=_scope_label(scope),
                n_opportunities=n_opp,
                n_covered=n_cov,
                coverage_pct=100.0 * n_cov / n_opp,
            )
        )
    return rows


def opportunity_coverage(
    records: Iterable[MatchRecord], opportunities: Sequence[Opportunity]
) -> float:
    """Percentage of all opportunities with >=1 Green match from any source."""
    if not opportunities:
        raise ValueError("opportunity set is empty")
    green_opps = {r.opportunity_id for r in records if r.tier == Tier.GREEN}
    covered = sum(1 for o in opportunities if o.id in green_opps)
    return 100.0 * covered / len(opportunities)


def count_matched_publications(
    records: Iterable[MatchRecord],
    pub_to_institutions: Mapping[str, Sequence[str]],
    green_only: bool = True,
) -> dict[str, int]:
    """Distinct matched publications per institution (Table-S1-style counting).

    green_only=True is the reporting default; the any-tier variant stays
    available because the source table does not state which definition it
    uses.
    """
    seen: dict[str, set[str]] = {}
    for rec in dedupe_records(records):
        if green_only and rec.tier != Tier.GREEN:
            continue
        for inst in pub_to_institutions.get(rec.publication_id, ()):
            seen.setdefault(inst, set()).add(rec.publication_id)
    return {inst: len(pubs) for inst, pubs in seen.items()}


def write_matches_csv(records: Iterable[MatchRecord], path: Union[str, Path]) -> None:
    """CSV export: distances fixed at 6 decimal places, tiers spelled out."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["opportunity_id", "publication_id", "distance", "tier"])
        for rec in records:
            writer.writerow(
                [rec.opportunity_id, rec.publication_id, f"{rec.distance:.6f}", rec.tier.label]
            )


def read_matches_csv(path: Union[str, Path]) -> list[MatchRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            MatchRecord(
                opportunity_id=row["opportunity_id"],
                publication_id=row["publication_id"],
                distance=float(row["distance"]),
                tier=Tier.parse(row["tier"]),
            )
            for row in reader
        ]


def write_coverage_csv(rows: Iterable[CoverageRow], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["institution_id", "scope", "n_opportunities", "n_covered", "coverage_pct"]
        )
        for row in rows:
            writer.writerow(
                [row.institution_id, row.scope, row.n_opportunities, row.n_covered,
                 repr(row.coverage_pct)]
            )
