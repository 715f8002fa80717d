"""Bit-exact on-disk vector store (*.ovec).

Layout, all integers little-endian:

    magic   4 bytes  b"OVEC"
    version u32      1
    dim     u32      1024
    count   u64
    rows    count * dim float32, row-major
    mlen    u64      byte length of the manifest blob
    manifest NDJSON, one {"row": i, "id": "..."} object per row, in order

The manifest aligns row indexes to record ids; write/read round-trips are
byte-identical. Readers validate every header field and the manifest
alignment before returning, with a distinct error kind per failure mode.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .embedding import EMBEDDING_DIM

MAGIC = b"OVEC"
VERSION = 1

_HEADER = struct.Struct("<4sIIQ")
_U64 = struct.Struct("<Q")


class StoreFormatError(ValueError):
    """Base class for malformed *.ovec files."""


class BadMagicError(StoreFormatError):
    pass


class BadVersionError(StoreFormatError):
    pass


class DimensionMismatchError(StoreFormatError):
    pass


class CountMismatchError(StoreFormatError):
    """Header count disagrees with the manifest (or ids are not unique)."""


class TruncatedPayloadError(StoreFormatError):
    pass


@dataclass(frozen=True, eq=False)
class VectorStore:
    """An immutable packed matrix of unit vectors plus a row-aligned id manifest."""

    vectors: np.ndarray  # float32, shape (count, 1024)
    ids: tuple[str, ...]

    def __eq__(self, other: object) -> bool:
        # Bit-exact: equality means identical payload bytes and manifest.
        if not isinstance(other, VectorStore):
            return NotImplemented
        return self.ids == other.ids and self.vectors.tobytes() == other.vectors.tobytes()

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape[1] != EMBEDDING_DIM:
            raise DimensionMismatchError(
                f"vectors must have shape (n, {EMBEDDING_DIM}), got {vectors.shape}"
            )
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "ids", tuple(self.ids))
        if len(self.ids) != vectors.shape[0]:
            raise CountMismatchError(
                f"manifest has {len(self.ids)} ids for {vectors.shape[0]} rows"
            )
        if len(set(self.ids)) != len(self.ids):
            raise CountMismatchError("manifest ids are not unique")

    @property
    def dim(self) -> int:
        return EMBEDDING_DIM

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    def __len__(self) -> int:
        return self.count

    def row(self, record_id: str) -> np.ndarray:
        return self.vectors[self.ids.index(record_id)]


def write_store(store: VectorStore, path: Union[str, Path]) -> None:
    """Serialize a store; output bytes are a pure function of its contents."""
    manifest = io.BytesIO()
    for i, record_id in enumerate(store.ids):
        manifest.write(json.dumps({"row": i, "id": record_id}, sort_keys=True).encode("utf-8"))
        manifest.write(b"\n")
    blob = manifest.getvalue()

    matrix = np.ascontiguousarray(store.vectors, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, EMBEDDING_DIM, store.count))
        fh.write(matrix.tobytes(order="C"))
        fh.write(_U64.pack(len(blob)))
        fh.write(blob)


def read_store(path: Union[str, Path]) -> VectorStore:
    """Read and validate a *.ovec file; see module docstring for error kinds."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(f"{path}: file shorter than header")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise BadVersionError(f"{path}: unsupported version {version}")
    if dim != EMBEDDING_DIM:
        raise DimensionMismatchError(f"{path}: dim header {dim}, expected {EMBEDDING_DIM}")

    matrix_bytes = count * dim * 4
    offset = _HEADER.size
    if len(data) < offset + matrix_bytes + _U64.size:
        raise TruncatedPayloadError(f"{path}: payload truncated mid-matrix")
    vectors = np.frombuffer(
        data, dtype="<f4", count=count * dim, offset=offset
    ).reshape(count, dim)
    offset += matrix_bytes

    (mlen,) = _U64.unpack_from(data, offset)
    offset += _U64.size
    if len(data) < offset + mlen:
        raise TruncatedPayloadError(f"{path}: manifest truncated")
    blob = data[offset : offset + mlen]

    ids: list[str] = []
    for line_no, line in enumerate(blob.splitlines()):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CountMismatchError(f"{path}: manifest line {line_no} unparsable") from exc
        if entry.get("row") != len(ids):
            raise CountMismatchError(
                f"{path}: manifest row {entry.get('row')} out of order at line {line_no}"
            )
        ids.append(str(entry["id"]))
    if len(ids) != count:
        raise CountMismatchError(f"{path}: header count {count}, manifest has {len(ids)} ids")

    return VectorStore(vectors=vectors.copy(), ids=tuple(ids))


def store_from_texts(ids: Sequence[str], vectors: np.ndarray) -> VectorStore:
    return VectorStore(vectors=vectors, ids=tuple(ids))
