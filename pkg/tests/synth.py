"""Synthetic fixtures shared between module tests and the acceptance suite."""

from __future__ import annotations

import numpy as np

from policymatch.calibration import EvalScores, ScoredPair

# Step-function quality fixture: four quality plateaus whose distance bands
# end exactly at the planted breakpoints 0.25 / 0.30 / 0.35 / 0.40, plus a
# zero-quality tail beyond 0.40. Pairs sit in the top sliver of each band so
# any cut below a band top starves that tier of occupancy.
STEP_BREAKPOINTS = (0.25, 0.30, 0.35, 0.40)


def _band(lo: float, hi: float, n: int) -> list[float]:
    return [float(d) for d in np.linspace(lo, hi, n)]


def make_step_pairs() -> list[ScoredPair]:
    pairs: list[ScoredPair] = []

    def add(distances, scores_seq):
        for dist, scores in zip(distances, scores_seq):
            pairs.append(
                ScoredPair(
                    opportunity_id=f"op-{len(pairs):03d}",
                    publication_id=f"pub-{len(pairs):03d}",
                    distance=dist,
                    scores=scores,
                )
            )

    top = EvalScores(2, 2, 1)
    good = EvalScores(2, 1, 1)
    mid = EvalScores(1, 1, 1)
    weak = EvalScores(0, 1, 1)
    junk = EvalScores(0, 0, 0)

    # 100% all-positive (and 100% top score)
    add(_band(0.2455, 0.25, 48), [top] * 48)
    # 75% all-positive
    add(_band(0.296, 0.30, 48), [good] * 36 + [junk] * 12)
    # 50% all-positive
    add(_band(0.346, 0.35, 48), [mid] * 24 + [junk] * 24)
    # 25% all-positive
    add(_band(0.396, 0.40, 32), [mid] * 8 + [weak] * 24)
    # zero-quality tail beyond the last breakpoint
    add(_band(0.401, 0.445, 20), [junk] * 20)
    return pairs
