"""Exact top-k nearest-neighbour search by L2 distance.

Flat exact search only: corpus sizes here (~1e5 rows) are tractable without
approximate structures, and the tier thresholds demand exact distances.
Ties are broken on (distance, record_id) so ranks are reproducible.

Reported distances are true L2 (square root taken); all arithmetic is
float64. ``brute_force_search`` is the ground-truth oracle: a full scan
using direct subtract-square-sum and a full sort, deliberately sharing no
selection logic with the optimized path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .embedding import EMBEDDING_DIM
from .store import VectorStore

__all__ = [
    "SearchConfig",
    "SearchHit",
    "ExactNearestNeighbors",
    "build_index",
    "search",
    "batch_search",
    "brute_force_search",
]


@dataclass(frozen=True)
class SearchConfig:
    k: int = 100

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class SearchHit:
    record_id: str
    distance: float


def _check_query(query: np.ndarray) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != EMBEDDING_DIM:
        raise ValueError(f"query has dimension {q.shape[0]}, expected {EMBEDDING_DIM}")
    return q


class ExactNearestNeighbors(BaseEstimator):
    """Flat exact L2 index, immutable once fitted.

    fit accepts a VectorStore; kneighbors returns (distances, ids) sorted
    ascending by (distance, record_id). Distances use the expanded form
    ||x||^2 - 2 x.q + ||q||^2 in float64 with a GEMV per query, negatives
    from rounding clamped to zero before the square root.
    """

    def __init__(self, k: int = 100):
        self.k = k

    def fit(self, X: VectorStore, y=None) -> "ExactNearestNeighbors":
        if not isinstance(X, VectorStore):
            raise TypeError("fit expects a VectorStore")
        if X.count == 0:
            raise ValueError("cannot build an index over an empty store")
        self.vectors_ = X.vectors.astype(np.float64)
        self.norms_sq_ = np.einsum("ij,ij->i", self.vectors_, self.vectors_)
        self.ids_ = np.asarray(X.ids, dtype=str)
        return self

    @property
    def size(self) -> int:
        return self.vectors_.shape[0]

    def _distances(self, q: np.ndarray) -> np.ndarray:
        d2 = self.norms_sq_ - 2.0 * (self.vectors_ @ q) + float(q @ q)
        np.maximum(d2, 0.0, out=d2)
        return np.sqrt(d2)

    def kneighbors(self, query: np.ndarray, k: int | None = None) -> list[SearchHit]:
        q = _check_query(query)
        k = self.k if k is None else k
        n = self.size
        dists = self._distances(q)
        take = min(k, n)
        if take < n:
            # argpartition narrows to k candidates, then ties at the boundary
            # distance are re-admitted so the (distance, id) order is exact.
            part = np.argpartition(dists, take - 1)[:take]
            boundary = dists[part].max()
            candidates = np.flatnonzero(dists <= boundary)
        else:
            candidates = np.arange(n)
        order = np.lexsort((self.ids_[candidates], dists[candidates]))
        chosen = candidates[order][:take]
        return [SearchHit(str(self.ids_[i]), float(dists[i])) for i in chosen]


def build_index(store: VectorStore, k: int = 100) -> ExactNearestNeighbors:
    return ExactNearestNeighbors(k=k).fit(store)


def search(
    index: ExactNearestNeighbors, query: np.ndarray, cfg: SearchConfig = SearchConfig()
) -> list[SearchHit]:
    return index.kneighbors(query, k=cfg.k)


def batch_search(
    index: ExactNearestNeighbors,
    queries: Sequence[np.ndarray] | np.ndarray,
    cfg: SearchConfig = SearchConfig(),
) -> list[list[SearchHit]]:
    """Per-query search over a batch; element i equals search(index, queries[i])."""
    results = []
    for i, query in enumerate(queries):
        try:
            results.append(index.kneighbors(query, k=cfg.k))
        except ValueError as exc:
            raise ValueError(f"query {i}: {exc}") from exc
    return results


def brute_force_search(
    store: VectorStore, query: np.ndarray, cfg: SearchConfig = SearchConfig()
) -> list[SearchHit]:
    """Ground-truth oracle: full scan, direct differences, full stable sort."""
    q = _check_query(query)
    if store.count == 0:
        raise ValueError("cannot search an empty store")
    diff = store.vectors.astype(np.float64) - q
    dists = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    ids = np.asarray(store.ids, dtype=str)
    order = np.lexsort((ids, dists))
    take = min(cfg.k, store.count)
    return [SearchHit(str(ids[i]), float(dists[i])) for i in order[:take]]
