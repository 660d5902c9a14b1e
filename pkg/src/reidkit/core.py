"""Shared dense-array types, metadata records, and vector primitives.

Arrays held by these types are float64, row-major, and made read-only on
construction, so instances are safe to share across threads. Operations
are pure functions.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FeatureMap",
    "Embedding",
    "ItemMeta",
    "ImageTensor",
    "DistanceMatrix",
    "l2_normalize",
    "validate_meta_set",
    "as_vector",
    "as_matrix",
]

UNIT_NORM_TOL = 1e-6


def _frozen_f64(data, name: str) -> np.ndarray:
    arr = np.array(data, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FeatureMap:
    """Backbone activation block of shape (W, H, C)."""

    data: np.ndarray

    def __post_init__(self):
        arr = _frozen_f64(self.data, "FeatureMap.data")
        if arr.ndim != 3 or arr.size == 0:
            raise ValueError("FeatureMap.data must be a non-empty W x H x C array")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Embedding:
    """C-dimensional retrieval vector; `normalized` asserts unit L2 norm."""

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        arr = _frozen_f64(self.data, "Embedding.data")
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("Embedding.data must be a non-empty 1-d vector")
        if self.normalized and abs(np.linalg.norm(arr) - 1.0) > UNIT_NORM_TOL:
            raise ValueError("Embedding flagged normalized but norm is not 1")
        object.__setattr__(self, "data", arr)

    def __len__(self) -> int:
        return self.data.size


@dataclass(frozen=True)
class ItemMeta:
    """Identity, camera, and item labels for one query or gallery entry."""

    item_id: str
    person_id: int
    camera_id: int

    def __post_init__(self):
        if not self.item_id:
            raise ValueError("item_id must be a non-empty string")
        if self.person_id < 0 or self.camera_id < 0:
            raise ValueError("person_id and camera_id must be non-negative")


@dataclass(frozen=True)
class ImageTensor:
    """H x W x 3 image with values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = _frozen_f64(self.data, "ImageTensor.data")
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("ImageTensor.data must be H x W x 3 with positive dims")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("ImageTensor values must lie in [0, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


# metric names whose value ranges are checked on construction
_METRIC_RANGES = {
    "euclidean": (0.0, None),
    "cosine": (0.0, 2.0),
    "dsr": (0.0, 2.0),
}
_RANGE_SLACK = 1e-9


@dataclass(frozen=True)
class DistanceMatrix:
    """|Q| x |G| pairwise distances, lower = more similar."""

    data: np.ndarray
    metric_name: str = "euclidean"

    def __post_init__(self):
        arr = _frozen_f64(self.data, "DistanceMatrix.data")
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("DistanceMatrix.data must be a non-empty 2-d matrix")
        lo_hi = _METRIC_RANGES.get(self.metric_name)
        if lo_hi is not None:
            lo, hi = lo_hi
            if lo is not None and arr.min() < lo - _RANGE_SLACK:
                raise ValueError(f"{self.metric_name} distances must be >= {lo}")
            if hi is not None and arr.max() > hi + _RANGE_SLACK:
                raise ValueError(f"{self.metric_name} distances must be <= {hi}")
        object.__setattr__(self, "data", arr)

    @property
    def num_queries(self) -> int:
        return self.data.shape[0]

    @property
    def num_gallery(self) -> int:
        return self.data.shape[1]


def as_vector(v) -> np.ndarray:
    """Coerce an Embedding or array-like to a float64 1-d array."""
    if isinstance(v, Embedding):
        return v.data
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {arr.shape}")
    return arr


def as_matrix(m) -> np.ndarray:
    """Coerce a stack of embeddings (or a single one) to a float64 (n, d) array."""
    if isinstance(m, Embedding):
        return m.data[None, :]
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected an (n, d) matrix, got shape {arr.shape}")
    return arr


def l2_normalize(v) -> Embedding:
    """Rescale a vector to unit L2 norm, preserving direction.

    Raises ValueError on zero-norm input: downstream cosine math is
    undefined there and silently mapping to zero would hide the bug.
    """
    arr = as_vector(v)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ValueError("cannot l2-normalize a zero-norm vector")
    return Embedding(arr / norm, normalized=True)


def validate_meta_set(items: list[ItemMeta]) -> dict[int, int]:
    """Check item_id uniqueness and return per-person counts.

    Raises ValueError naming the first duplicated item_id.
    """
    seen: set[str] = set()
    for meta in items:
        if meta.item_id in seen:
            raise ValueError(f"duplicate item_id: {meta.item_id!r}")
        seen.add(meta.item_id)
    return dict(Counter(meta.person_id for meta in items))
