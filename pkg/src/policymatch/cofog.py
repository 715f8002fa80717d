"""Government-function classification by nearest centroid over seed texts.

One seed paragraph per division ships as package data; the default
classifier embeds them with the mock embedder and assigns the division
whose seed embedding is L2-closest. A manually supplied label always wins
without consulting the classifier, and ties resolve to the lowest division
code so results are deterministic.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .embedding import Embedder, MockTextEmbedder, embed
from .model import CofogDivision

__all__ = [
    "CofogCentroidClassifier",
    "load_seed_texts",
    "default_cofog_classifier",
    "default_classify",
    "classify_cofog",
]


def load_seed_texts(path: Optional[Path] = None) -> dict[CofogDivision, str]:
    if path is None:
        path = Path(__file__).parent / "data" / "cofog_seeds.json"
    raw = json.loads(path.read_text(encoding="utf-8"))
    return {CofogDivision.parse(code): text for code, text in raw.items()}


class CofogCentroidClassifier(BaseEstimator):
    """Nearest-centroid text classifier over embedded seed descriptions."""

    def __init__(self, embedder: Optional[Embedder] = None):
        self.embedder = embedder

    def _embedder(self) -> Embedder:
        return self.embedder if self.embedder is not None else MockTextEmbedder()

    def fit(
        self, X: Sequence[str], y: Sequence[CofogDivision]
    ) -> "CofogCentroidClassifier":
        """X: seed texts; y: their divisions (one seed per division here)."""
        if len(X) != len(y) or not X:
            raise ValueError("need equal, non-empty seed texts and divisions")
        order = np.argsort([int(d) for d in y])  # ascending code = tie priority
        self.divisions_ = [y[i] for i in order]
        self.centroids_ = embed([X[i] for i in order], self._embedder()).astype(np.float64)
        return self

    def predict_one(self, text: str) -> CofogDivision:
        if not text or not text.strip():
            raise ValueError("cannot classify empty text")
        vec = embed([text], self._embedder()).astype(np.float64)[0]
        dists = np.linalg.norm(self.centroids_ - vec, axis=1)
        # argmin returns the first minimum; rows are sorted by code, so ties
        # already fall to the lowest division code.
        return self.divisions_[int(np.argmin(dists))]

    def predict(self, X: Sequence[str]) -> list[CofogDivision]:
        return [self.predict_one(text) for text in X]


def default_cofog_classifier(embedder: Optional[Embedder] = None) -> CofogCentroidClassifier:
    seeds = load_seed_texts()
    divisions = sorted(seeds)
    return CofogCentroidClassifier(embedder=embedder).fit(
        [seeds[d] for d in divisions], divisions
    )


_DEFAULT: Optional[CofogCentroidClassifier] = None


def default_classify(text: str) -> CofogDivision:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = default_cofog_classifier()
    return _DEFAULT.predict_one(text)


def classify_cofog(
    text: str,
    classifier: Optional[Callable[[str], CofogDivision]] = None,
    manual_label: object = None,
) -> CofogDivision:
    """Assign exactly one division to a text.

    A manual label (name, code, or division) always overrides and the
    classifier is never invoked for it. Empty text is an error.
    """
    if manual_label is not None:
        return CofogDivision.parse(manual_label)
    if not text or not text.strip():
        raise ValueError("cannot classify empty text")
    if classifier is None:
        classifier = default_classify
    return classifier(text)
