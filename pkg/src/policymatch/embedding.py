"""Text embedding providers and vector normalization.

Vectors are unit-normalized at this boundary. The tier thresholds are only
meaningful on a bounded scale, and normalization makes L2 distance a
monotone function of cosine similarity (||u-v||^2 = 2 - 2*cos for unit u, v).
Whether the production model normalizes is unknown; if a real provider is
plugged in, thresholds may need re-calibration.

The mock embedder is a deterministic stand-in for the fine-tuned model:
signed token hashing into a fixed number of buckets, then L2 normalization.
It is platform-stable (pure integer FNV-1a hashing) so stores and goldens
are bit-reproducible.
"""

from __future__ import annotations

import re
from typing import Callable, Protocol, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

EMBEDDING_DIM = 1024

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


class EmbedderError(RuntimeError):
    """Provider failure; carries the indices of the failing batch entries."""

    def __init__(self, message: str, indices: Sequence[int] = ()):
        super().__init__(message)
        self.indices = list(indices)


class DimensionError(ValueError):
    """A provider returned vectors of the wrong dimension. Hard error."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs; drops empty tokens."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def fnv1a_64(token: str) -> int:
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def token_bucket(token: str) -> tuple[int, float]:
    """Bucket index and sign (+1/-1) a token contributes under the mock scheme."""
    h = fnv1a_64(token)
    sign = 1.0 if (h >> 63) == 0 else -1.0
    return h % EMBEDDING_DIM, sign


def normalize(v: np.ndarray) -> np.ndarray:
    """Scale to unit L2 norm (float32). Zero vectors are rejected."""
    arr = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(arr)
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return (arr / norm).astype(np.float32)


def mock_embed(text: str) -> np.ndarray:
    """Deterministic bag-of-tokens embedding.

    Each token adds +/-1 (sign from the top hash bit) at component
    ``hash mod 1024``; repeated tokens accumulate. The result is
    L2-normalized. An empty token set yields the basis vector e0.
    """
    acc = np.zeros(EMBEDDING_DIM, dtype=np.float64)
    tokens = tokenize(text)
    if not tokens:
        out = np.zeros(EMBEDDING_DIM, dtype=np.float32)
        out[0] = 1.0
        return out
    for token in tokens:
        idx, sign = token_bucket(token)
        acc[idx] += sign
    if not acc.any():
        # Opposite-signed tokens can cancel exactly; fall back like empty input.
        out = np.zeros(EMBEDDING_DIM, dtype=np.float32)
        out[0] = 1.0
        return out
    return normalize(acc)


class Embedder(Protocol):
    """Batch text -> vectors. Implementations need not normalize."""

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


class MockTextEmbedder(BaseEstimator, TransformerMixin):
    """Stateless transformer wrapping the mock embedding scheme.

    fit is a no-op; transform maps a sequence of texts to a float32 matrix
    of shape (n_texts, 1024) with unit rows.
    """

    def fit(self, X: Sequence[str], y=None) -> "MockTextEmbedder":
        return self

    def transform(self, X: Sequence[str]) -> np.ndarray:
        return embed(list(X), self)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), EMBEDDING_DIM), dtype=np.float32)
        for i, text in enumerate(texts):
            out[i] = mock_embed(text)
        return out


class RemoteEmbedder(BaseEstimator, TransformerMixin):
    """HTTP provider: POST {"texts": [...]} -> {"vectors": [[f32;1024], ...]}.

    ``post`` defaults to requests.post and is injectable for tests.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, post: Callable | None = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.post = post

    def fit(self, X: Sequence[str], y=None) -> "RemoteEmbedder":
        return self

    def transform(self, X: Sequence[str]) -> np.ndarray:
        return embed(list(X), self)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        post = self.post
        if post is None:
            import requests

            post = requests.post
        try:
            response = post(self.endpoint, json={"texts": list(texts)}, timeout=self.timeout)
            response.raise_for_status()
            payload = response.json()
            vectors = payload["vectors"]
        except DimensionError:
            raise
        except Exception as exc:
            raise EmbedderError(
                f"remote embedder failed: {exc}", indices=range(len(texts))
            ) from exc
        arr = np.asarray(vectors, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] != len(texts):
            raise EmbedderError(
                f"remote embedder returned {arr.shape} for {len(texts)} texts",
                indices=range(len(texts)),
            )
        return arr


def embed(texts: Sequence[str], provider: Embedder) -> np.ndarray:
    """Embed texts through a provider and normalize each row to unit length.

    Texts must already carry their role prefix ([OPPORTUNITY]/[SCHOLAR]).
    Order is preserved; a dimension mismatch from the provider is a hard
    error, never silently reshaped.
    """
    if len(texts) == 0:
        return np.empty((0, EMBEDDING_DIM), dtype=np.float32)
    vectors = provider.embed_batch(texts)
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or vectors.shape != (len(texts), EMBEDDING_DIM):
        raise DimensionError(
            f"provider returned shape {vectors.shape}, expected ({len(texts)}, {EMBEDDING_DIM})"
        )
    norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise EmbedderError("provider returned zero vectors", indices=bad.tolist())
    return (vectors.astype(np.float64) / norms[:, None]).astype(np.float32)
