"""Pairwise-distance pose descriptors and exact brute-force nearest-neighbor search."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .skeleton import NUM_KEYPOINTS, BoundingBox, Skeleton

DESCRIPTOR_DIM = NUM_KEYPOINTS * (NUM_KEYPOINTS - 1) // 2
INDEX_MAGIC = b"PKIX"
INDEX_VERSION = 1  # version 1 fixes lexicographic (i < j) pair ordering

# Lexicographic (i, j) pairs with i < j; the canonical descriptor ordering.
_PAIR_I, _PAIR_J = np.triu_indices(NUM_KEYPOINTS, k=1)

# Row chunk for distance computation; keeps temporaries cache-resident.
_QUERY_CHUNK = 1024


class IncompleteSkeletonError(ValueError):
    """Raised when a descriptor is requested for a skeleton with unlabeled points."""


def descriptor(s: Skeleton, b: Optional[BoundingBox] = None) -> np.ndarray:
    """Pairwise euclidean distances between box-normalized keypoints.

    Coordinates are divided by the longest box dimension, then all
    C(25, 2) = 300 pairwise distances are emitted in canonical order as
    float32.  Without a box, the normalizer falls back to the longest
    dimension of the tight box over the keypoints themselves (the
    query-by-skeleton case).  Every keypoint must be labeled.
    """
    if s.num_keypoints != NUM_KEYPOINTS:
        raise IncompleteSkeletonError(
            f"descriptor requires {NUM_KEYPOINTS} keypoints, got {s.num_keypoints}"
        )
    unlabeled = np.nonzero(~s.labeled)[0]
    if unlabeled.size:
        raise IncompleteSkeletonError(
            f"incomplete skeleton: keypoint {int(unlabeled[0])} is unlabeled"
        )
    if b is not None:
        norm = b.longest_dim
    else:
        spans = s.coords.max(axis=0) - s.coords.min(axis=0)
        norm = float(spans.max())
        if norm <= 0:
            raise ValueError("cannot normalize: keypoints have zero spatial extent")
    pts = s.coords / norm
    diffs = pts[_PAIR_I] - pts[_PAIR_J]
    return np.hypot(diffs[:, 0], diffs[:, 1]).astype(np.float32)


@dataclass
class PoseIndex:
    """Immutable (id, descriptor) rows supporting exact k-NN queries."""

    ids: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        if rows.ndim != 2:
            raise ValueError(f"rows must be 2D, got shape {rows.shape}")
        if len(self.ids) != rows.shape[0]:
            raise ValueError(f"{len(self.ids)} ids for {rows.shape[0]} rows")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("index ids must be unique")
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "rows", rows)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]

    def checksum(self) -> str:
        import hashlib

        digest = hashlib.sha256()
        digest.update("\x00".join(self.ids).encode("utf-8"))
        digest.update(self.rows.tobytes(order="C"))
        return digest.hexdigest()


@dataclass
class IndexBuildResult:
    index: PoseIndex
    skipped: list[tuple[str, str]]


def build_index(
    items: Iterable[tuple[str, Skeleton, Optional[BoundingBox]]],
    dim: int = DESCRIPTOR_DIM,
) -> IndexBuildResult:
    """Build an index from (id, skeleton, box) items.

    Items whose skeleton cannot produce a descriptor are skipped and
    tallied with the failure reason; a duplicate id aborts the build.
    """
    ids: list[str] = []
    seen: set[str] = set()
    rows: list[np.ndarray] = []
    skipped: list[tuple[str, str]] = []
    for item_id, skel, box in items:
        if item_id in seen:
            raise ValueError(f"duplicate id in index build: {item_id!r}")
        seen.add(item_id)
        try:
            desc = descriptor(skel, box)
        except (IncompleteSkeletonError, ValueError) as exc:
            skipped.append((item_id, str(exc)))
            continue
        ids.append(item_id)
        rows.append(desc)
    matrix = np.stack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
    return IndexBuildResult(PoseIndex(tuple(ids), matrix), skipped)


@dataclass(frozen=True)
class QueryResult:
    id: str
    distance: float


def _squared_distances(rows: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Exact squared distances: float32 differences, float64 accumulation."""
    out = np.empty(rows.shape[0], dtype=np.float64)
    for start in range(0, rows.shape[0], _QUERY_CHUNK):
        diff = rows[start:start + _QUERY_CHUNK] - q
        d64 = diff.astype(np.float64)
        np.square(d64, out=d64)
        out[start:start + _QUERY_CHUNK] = d64.sum(axis=1)
    return out


def knn(index: PoseIndex, q: np.ndarray, k: int) -> list[QueryResult]:
    """The exact k nearest rows, ascending by distance, ties by id.

    Rows tied at the k-th distance are resolved deterministically by id, so
    results are independent of row order and of any internal partitioning.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.asarray(q, dtype=np.float32)
    if q.shape != (index.dim,):
        raise ValueError(f"query has shape {q.shape}, index dim is {index.dim}")
    n = len(index)
    if n == 0:
        return []
    d2 = _squared_distances(index.rows, q)
    k = min(k, n)
    kth = np.partition(d2, k - 1)[k - 1]
    candidates = np.nonzero(d2 <= kth)[0]
    id_arr = np.array([index.ids[i] for i in candidates], dtype=object)
    order = np.lexsort((id_arr, d2[candidates]))[:k]
    chosen = candidates[order]
    return [QueryResult(index.ids[i], float(np.sqrt(d2[i]))) for i in chosen]


def save_index(index: PoseIndex, destination: str | Path) -> None:
    """Write the PKIX file: magic, u16 version, u32 dim, u64 rows, id table,
    then the row-major float32 little-endian matrix."""
    with open(destination, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(struct.pack("<HIQ", INDEX_VERSION, index.dim, len(index)))
        for item_id in index.ids:
            encoded = item_id.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
        fh.write(np.ascontiguousarray(index.rows, dtype="<f4").tobytes(order="C"))


class IndexFormatError(ValueError):
    """Raised for corrupt or truncated index files; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def load_index(source: str | Path) -> PoseIndex:
    """Load a PKIX file, failing closed on any corruption or truncation."""
    data = Path(source).read_bytes()
    if len(data) < 4 or data[:4] != INDEX_MAGIC:
        raise IndexFormatError(f"bad magic {data[:4]!r}, expected {INDEX_MAGIC!r}", 0)
    header_end = 4 + struct.calcsize("<HIQ")
    if len(data) < header_end:
        raise IndexFormatError("header truncated", len(data))
    version, dim, n_rows = struct.unpack("<HIQ", data[4:header_end])
    if version != INDEX_VERSION:
        raise IndexFormatError(f"unsupported format version {version}", 4)
    offset = header_end
    ids: list[str] = []
    for _ in range(n_rows):
        if offset + 4 > len(data):
            raise IndexFormatError("id table truncated", offset)
        (length,) = struct.unpack("<I", data[offset:offset + 4])
        offset += 4
        if offset + length > len(data):
            raise IndexFormatError("id entry truncated", offset)
        ids.append(data[offset:offset + length].decode("utf-8"))
        offset += length
    matrix_bytes = n_rows * dim * 4
    if len(data) != offset + matrix_bytes:
        raise IndexFormatError(
            f"matrix truncated: expected {matrix_bytes} bytes, got {len(data) - offset}",
            offset,
        )
    rows = np.frombuffer(data, dtype="<f4", offset=offset).reshape(n_rows, dim).copy()
    return PoseIndex(tuple(ids), rows)
