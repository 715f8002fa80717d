from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_opportunity
from policymatch.embedding import EMBEDDING_DIM
from policymatch.knn import SearchConfig, brute_force_search, build_index
from policymatch.matching import (
    MatchRecord,
    TierClassifier,
    aggregate_institution,
    classify_tier,
    count_matched_publications,
    coverage,
    dedupe_records,
    match_opportunity,
    opportunity_coverage,
    rank_researchers,
    read_matches_csv,
    write_matches_csv,
)
from policymatch.model import CofogDivision, DEFAULT_THRESHOLDS, Tier, TierThresholds
from policymatch.store import VectorStore


class TestClassifyTier:
    @pytest.mark.parametrize(
        "distance,expected",
        [
            (0.288, Tier.GREEN),
            (0.309, Tier.YELLOW),
            (0.334, Tier.ORANGE),
            (0.39, Tier.RED),
            (0.0, Tier.GREEN),
        ],
    )
    def test_boundaries_inclusive(self, distance, expected):
        assert classify_tier(distance, DEFAULT_THRESHOLDS) == expected

    def test_above_red_excluded(self):
        assert classify_tier(0.3901, DEFAULT_THRESHOLDS) is None
        assert classify_tier(math.nextafter(0.39, math.inf), DEFAULT_THRESHOLDS) is None

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            classify_tier(-0.01, DEFAULT_THRESHOLDS)

    @given(st.floats(min_value=0.0, max_value=2.0, allow_nan=False))
    def test_total_partition(self, distance):
        out = classify_tier(distance, DEFAULT_THRESHOLDS)
        assert out in (Tier.GREEN, Tier.YELLOW, Tier.ORANGE, Tier.RED, None)

    @given(
        st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    )
    def test_monotone_in_distance(self, d1, d2):
        lo, hi = sorted([d1, d2])
        t_lo = classify_tier(lo, DEFAULT_THRESHOLDS)
        t_hi = classify_tier(hi, DEFAULT_THRESHOLDS)
        rank = {Tier.GREEN: 1, Tier.YELLOW: 2, Tier.ORANGE: 3, Tier.RED: 4, None: 5}
        assert rank[t_lo] <= rank[t_hi]

    def test_estimator_wrapper(self):
        clf = TierClassifier()
        assert clf.get_params() == {
            "green": 0.288,
            "yellow": 0.309,
            "orange": 0.334,
            "red": 0.39,
        }
        out = clf.fit().predict([0.1, 0.3, 0.5])
        assert out == [Tier.GREEN, Tier.YELLOW, None]


def vector_at_distance(base: np.ndarray, other_axis: np.ndarray, distance: float) -> np.ndarray:
    """Unit vector at a prescribed L2 distance from unit ``base``.

    Orthogonal-component arithmetic: v = cos*base + sin*axis with
    cos = 1 - d^2/2 (valid for unit vectors, d <= 2).
    """
    cos = 1.0 - distance**2 / 2.0
    sin = math.sqrt(max(0.0, 1.0 - cos**2))
    return cos * base + sin * other_axis


class TestMatchOpportunity:
    def setup_method(self):
        self.base = np.zeros(EMBEDDING_DIM)
        self.base[0] = 1.0

    def _store(self, distances: list[float]) -> VectorStore:
        rows = []
        for i, dist in enumerate(distances):
            axis = np.zeros(EMBEDDING_DIM)
            axis[i + 1] = 1.0
            rows.append(vector_at_distance(self.base, axis, dist))
        return VectorStore(
            vectors=np.asarray(rows, dtype=np.float32),
            ids=tuple(f"pub-{i}" for i in range(len(distances))),
        )

    def test_prescribed_distances_tier_correctly(self):
        distances = [0.1, 0.30, 0.35, 0.50]
        store = self._store(distances)
        # Oracle first: placed distances must be what brute force measures.
        oracle = brute_force_search(store, self.base, SearchConfig(k=4))
        by_id = {h.record_id: h.distance for h in oracle}
        for i, dist in enumerate(distances):
            assert abs(by_id[f"pub-{i}"] - dist) <= 1e-6

        records = match_opportunity(
            "op-x", self.base, build_index(store), DEFAULT_THRESHOLDS, SearchConfig(k=4)
        )
        tiers = {r.publication_id: r.tier for r in records}
        assert tiers == {
            "pub-0": Tier.GREEN,
            "pub-1": Tier.YELLOW,
            "pub-2": Tier.RED,
        }
        assert len(records) == 3  # pub-3 at 0.50 excluded

    def test_all_beyond_red_gives_empty(self):
        store = self._store([0.45, 0.6, 0.9])
        records = match_opportunity("op-x", self.base, build_index(store))
        assert records == []

    def test_identical_vector_single_green_at_zero(self):
        store = VectorStore(
            vectors=np.asarray([self.base], dtype=np.float32), ids=("pub-same",)
        )
        records = match_opportunity("op-x", self.base, build_index(store))
        assert len(records) == 1
        assert records[0].tier == Tier.GREEN
        assert records[0].distance <= 1e-6

    def test_records_in_hit_order(self):
        store = self._store([0.35, 0.1, 0.30])
        records = match_opportunity("op-x", self.base, build_index(store))
        assert [r.publication_id for r in records] == ["pub-1", "pub-2", "pub-0"]


def rec(opp="op-1", pub="pub-1", distance=0.1, tier=Tier.GREEN) -> MatchRecord:
    return MatchRecord(opp, pub, distance, tier)


class TestRankResearchers:
    def test_frequency_dominates(self):
        records = [
            rec(pub="p1", distance=0.2),
            rec(pub="p2", distance=0.25),
            rec(pub="p3", distance=0.05),
        ]
        authorship = {"p1": ["A"], "p2": ["A"], "p3": ["B"]}
        ranked = rank_researchers(records, authorship)
        assert [(r.author_id, r.rank) for r in ranked] == [("A", 1), ("B", 2)]
        assert ranked[0].matched_work_count == 2

    def test_distance_tiebreak(self):
        records = [rec(pub="p1", distance=0.10), rec(pub="p2", distance=0.20)]
        ranked = rank_researchers(records, {"p1": ["A"], "p2": ["B"]})
        assert [r.author_id for r in ranked] == ["A", "B"]
        assert ranked[0].best_distance == 0.10

    def test_id_tiebreak(self):
        records = [rec(pub="p1", distance=0.15), rec(pub="p2", distance=0.15)]
        ranked = rank_researchers(records, {"p1": ["b2"], "p2": ["a1"]})
        assert [r.author_id for r in ranked] == ["a1", "b2"]

    def test_unresolvable_publication_named(self):
        with pytest.raises(KeyError, match="p-missing"):
            rank_researchers([rec(pub="p-missing")], {})

    def test_order_invariant_and_permutation_of_authors(self):
        records = [
            rec(pub="p1", distance=0.2),
            rec(pub="p2", distance=0.1),
            rec(pub="p3", distance=0.3),
            rec(pub="p4", distance=0.05),
        ]
        authorship = {"p1": ["A", "B"], "p2": ["B"], "p3": ["C"], "p4": ["C", "A"]}
        forward = rank_researchers(records, authorship)
        backward = rank_researchers(list(reversed(records)), authorship)
        assert forward == backward
        assert sorted(r.author_id for r in forward) == ["A", "B", "C"]
        assert [r.rank for r in forward] == [1, 2, 3]

    def test_duplicate_pairs_counted_once(self):
        records = [rec(pub="p1", distance=0.2), rec(pub="p1", distance=0.1)]
        ranked = rank_researchers(records, {"p1": ["A"]})
        assert ranked[0].matched_work_count == 1
        assert ranked[0].best_distance == 0.1


class TestAggregateAndCoverage:
    def test_tier_counts(self):
        records = [
            rec(pub="p1", tier=Tier.GREEN),
            rec(pub="p2", tier=Tier.GREEN),
            rec(pub="p3", tier=Tier.GREEN),
            rec(pub="p4", tier=Tier.RED, distance=0.38),
        ]
        pub_inst = {p: ["instX"] for p in ("p1", "p2", "p3", "p4")}
        agg = aggregate_institution(records, pub_inst)
        counts = agg[("instX", "op-1")]
        assert counts[Tier.GREEN] == 3
        assert counts[Tier.YELLOW] == 0
        assert counts[Tier.ORANGE] == 0
        assert counts[Tier.RED] == 1

    def test_multi_affiliation_counts_for_each(self):
        agg = aggregate_institution([rec(pub="p1")], {"p1": ["instX", "instY"]})
        assert ("instX", "op-1") in agg and ("instY", "op-1") in agg

    def test_empty(self):
        assert aggregate_institution([], {}) == {}

    def _opps(self):
        return [
            make_opportunity(id="o1", cofog=CofogDivision.HEALTH),
            make_opportunity(id="o2", cofog=CofogDivision.HEALTH),
            make_opportunity(id="o3", cofog=CofogDivision.DEFENCE),
            make_opportunity(id="o4", cofog=CofogDivision.ECONOMIC_AFFAIRS),
        ]

    def test_coverage_arithmetic(self):
        records = [
            rec(opp="o1", pub="p1"),
            rec(opp="o2", pub="p2"),
            rec(opp="o3", pub="p3"),
            rec(opp="o4", pub="p4", tier=Tier.RED, distance=0.36),
        ]
        agg = aggregate_institution(records, {p: ["instX"] for p in ("p1", "p2", "p3", "p4")})
        rows = coverage(agg, self._opps())
        assert len(rows) == 1
        row = rows[0]
        assert (row.n_opportunities, row.n_covered, row.coverage_pct) == (4, 3, 75.0)
        assert row.scope == "all"

    def test_institution_without_records_is_zero(self):
        rows = coverage({}, self._opps(), institutions=["inst-empty"])
        assert rows[0].coverage_pct == 0.0

    def test_health_scope_denominator(self):
        records = [rec(opp="o1", pub="p1"), rec(opp="o3", pub="p2")]
        agg = aggregate_institution(records, {"p1": ["instX"], "p2": ["instX"]})
        rows = coverage(agg, self._opps(), scope=CofogDivision.HEALTH)
        row = rows[0]
        assert row.scope == "07"
        assert row.n_opportunities == 2  # only the two Health opportunities
        assert row.n_covered == 1
        assert row.coverage_pct == 50.0

    def test_empty_scope_is_error(self):
        with pytest.raises(ValueError, match="scope"):
            coverage({}, self._opps(), scope=CofogDivision.EDUCATION, institutions=["i"])

    def test_duplicate_records_do_not_change_coverage(self):
        records = [rec(opp="o1", pub="p1")]
        agg_once = aggregate_institution(records, {"p1": ["instX"]})
        agg_dup = aggregate_institution(records * 3, {"p1": ["instX"]})
        opps = self._opps()
        assert coverage(agg_once, opps) == coverage(agg_dup, opps)

    def test_coverage_equals_brute_force_recount(self):
        rng = np.random.default_rng(42)
        opps = [
            make_opportunity(id=f"o{i}", cofog=CofogDivision(rng.integers(1, 11)))
            for i in range(12)
        ]
        insts = ["i1", "i2", "i3"]
        pub_inst = {f"p{i}": [insts[i % 3]] for i in range(30)}
        records = []
        for _ in range(120):
            distance = float(rng.uniform(0, 0.39))
            records.append(
                MatchRecord(
                    opportunity_id=f"o{rng.integers(0, 12)}",
                    publication_id=f"p{rng.integers(0, 30)}",
                    distance=distance,
                    tier=classify_tier(distance),
                )
            )
        agg = aggregate_institution(records, pub_inst)
        rows = coverage(agg, opps, institutions=insts)
        # Independent recount: direct scan per (institution, opportunity).
        for row in rows:
            covered = 0
            for opp in opps:
                green = any(
                    r.tier == Tier.GREEN
                    and r.opportunity_id == opp.id
                    and row.institution_id in pub_inst.get(r.publication_id, [])
                    for r in records
                )
                covered += green
            assert row.n_covered == covered
            assert row.coverage_pct == 100.0 * covered / len(opps)


class TestOpportunityCoverage:
    def _opps(self, n):
        return [make_opportunity(id=f"o{i}") for i in range(n)]

    def test_all_covered(self):
        records = [rec(opp=f"o{i}", pub=f"p{i}") for i in range(5)]
        assert opportunity_coverage(records, self._opps(5)) == 100.0

    def test_none_covered(self):
        assert opportunity_coverage([], self._opps(5)) == 0.0

    def test_fraction(self):
        records = [rec(opp=f"o{i}", pub=f"p{i}") for i in range(39)]
        assert opportunity_coverage(records, self._opps(40)) == 97.5

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            opportunity_coverage([], [])


class TestDedupe:
    def test_keeps_smallest_distance(self):
        records = [rec(distance=0.3, tier=Tier.YELLOW), rec(distance=0.1, tier=Tier.GREEN)]
        out = dedupe_records(records)
        assert len(out) == 1
        assert out[0].distance == 0.1

    def test_unique_input_is_identity(self):
        records = [rec(pub="p1"), rec(pub="p2"), rec(pub="p3")]
        assert dedupe_records(records) == records


class TestMatchedPublicationCounts:
    def test_distinct_green_publications(self):
        records = [
            rec(opp="o1", pub="p1"),
            rec(opp="o2", pub="p1"),  # same publication, second opportunity
            rec(opp="o1", pub="p2", tier=Tier.RED, distance=0.35),
        ]
        counts = count_matched_publications(records, {"p1": ["i1"], "p2": ["i1"]})
        assert counts == {"i1": 1}
        any_tier = count_matched_publications(
            records, {"p1": ["i1"], "p2": ["i1"]}, green_only=False
        )
        assert any_tier == {"i1": 2}


class TestCsvRoundTrip:
    def test_matches_round_trip(self, tmp_path):
        records = [
            rec(pub="p1", distance=0.123456789, tier=Tier.GREEN),
            rec(pub="p2", distance=0.31, tier=Tier.ORANGE),
        ]
        path = tmp_path / "matches.csv"
        write_matches_csv(records, path)
        text = path.read_text()
        assert text.splitlines()[0] == "opportunity_id,publication_id,distance,tier"
        assert "0.123457" in text  # 6 decimal places
        loaded = read_matches_csv(path)
        assert [(r.publication_id, r.tier) for r in loaded] == [
            ("p1", Tier.GREEN),
            ("p2", Tier.ORANGE),
        ]
