"""Distance computation, query expansion, and k-reciprocal re-ranking.

Distance builders clamp tiny negative quadratic-form residue before the
square root, so matrices always satisfy their range invariants. Ties are
broken everywhere by ascending gallery index via stable sorts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DistanceMatrix, Embedding, as_matrix, as_vector

__all__ = [
    "SpatialFeatureSet",
    "RerankParams",
    "QeParams",
    "euclidean_distances",
    "cosine_distances",
    "dsr_score",
    "query_expansion",
    "k_reciprocal_rerank",
    "rank_lists",
    "pairwise_distances",
]


@dataclass(frozen=True)
class SpatialFeatureSet:
    """d x N matrix of local features, one column per spatial location."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("SpatialFeatureSet.data must be a non-empty d x N matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("spatial features must be finite")
        if np.any(np.linalg.norm(arr, axis=0) == 0.0):
            raise ValueError("spatial feature columns must have non-zero norm")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def num_locations(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class RerankParams:
    k1: int = 20
    k2: int = 6
    lam: float = 0.3

    def __post_init__(self):
        if self.k1 < 1 or self.k2 < 1:
            raise ValueError("k1 and k2 must be positive")
        if self.k2 > self.k1:
            raise ValueError("k2 must not exceed k1")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")


@dataclass(frozen=True)
class QeParams:
    m: int = 3
    metric: str = "cosine"

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be >= 0")
        if self.metric not in ("euclidean", "cosine"):
            raise ValueError("qe metric must be euclidean or cosine")


def _euclidean_raw(q: np.ndarray, g: np.ndarray) -> np.ndarray:
    q_sq = np.sum(q * q, axis=1)
    g_sq = np.sum(g * g, axis=1)
    sq = q_sq[:, None] - 2.0 * (q @ g.T) + g_sq[None, :]
    return np.sqrt(np.maximum(sq, 0.0))


def _cosine_raw(q: np.ndarray, g: np.ndarray) -> np.ndarray:
    q_norms = np.linalg.norm(q, axis=1)
    g_norms = np.linalg.norm(g, axis=1)
    if np.any(q_norms == 0.0) or np.any(g_norms == 0.0):
        raise ValueError("cosine distance is undefined for zero vectors")
    sims = (q / q_norms[:, None]) @ (g / g_norms[:, None]).T
    return np.clip(1.0 - sims, 0.0, 2.0)


def euclidean_distances(queries, gallery) -> DistanceMatrix:
    """Pairwise L2 distances via the expanded quadratic form."""
    q = as_matrix(queries)
    g = as_matrix(gallery)
    if q.shape[1] != g.shape[1]:
        raise ValueError(f"dim mismatch: {q.shape[1]} vs {g.shape[1]}")
    return DistanceMatrix(_euclidean_raw(q, g), metric_name="euclidean")


def cosine_distances(queries, gallery) -> DistanceMatrix:
    """Pairwise 1 - cos(q, g), in [0, 2]."""
    q = as_matrix(queries)
    g = as_matrix(gallery)
    if q.shape[1] != g.shape[1]:
        raise ValueError(f"dim mismatch: {q.shape[1]} vs {g.shape[1]}")
    return DistanceMatrix(_cosine_raw(q, g), metric_name="cosine")


def pairwise_distances(queries, gallery, metric: str) -> DistanceMatrix:
    if metric == "euclidean":
        return euclidean_distances(queries, gallery)
    if metric == "cosine":
        return cosine_distances(queries, gallery)
    raise ValueError(f"unknown metric {metric!r}")


def dsr_score(x: SpatialFeatureSet, y: SpatialFeatureSet) -> tuple[float, float]:
    """Local-feature matching score between two spatial sets.

    Each column of x matches its most cosine-similar column of y; the score
    is the sum of those best matches. Returns (score, score / N) where N is
    the number of columns in x.
    """
    if x.data.shape[0] != y.data.shape[0]:
        raise ValueError("spatial sets must share the feature dimension d")
    xu = x.data / np.linalg.norm(x.data, axis=0)
    yu = y.data / np.linalg.norm(y.data, axis=0)
    sims = xu.T @ yu
    best = sims.max(axis=1)
    score = float(best.sum())
    return score, score / x.num_locations


def query_expansion(query, gallery, params: QeParams | None = None):
    """Replace a query with the mean of itself and its m nearest gallery vectors.

    m = 0 returns the query untouched. Returns an Embedding when given one,
    otherwise a plain array.
    """
    prm = params or QeParams()
    vec = as_vector(query)
    gal = as_matrix(gallery)
    if prm.m > gal.shape[0]:
        raise ValueError(f"m={prm.m} exceeds gallery size {gal.shape[0]}")
    if prm.m == 0:
        new = vec.copy()
    else:
        row = pairwise_distances(vec[None, :], gal, prm.metric).data[0]
        nearest = np.argsort(row, kind="stable")[: prm.m]
        new = (vec + gal[nearest].sum(axis=0)) / (prm.m + 1.0)
    if isinstance(query, Embedding):
        return Embedding(new)
    return new


def _k_reciprocal_set(rank: np.ndarray, idx: int, k: int) -> np.ndarray:
    forward = rank[idx, : k + 1]
    backward = rank[forward, : k + 1]
    return forward[np.any(backward == idx, axis=1)]


def k_reciprocal_rerank(
    queries,
    gallery,
    params: RerankParams | None = None,
    metric: str = "euclidean",
) -> DistanceMatrix:
    """K-reciprocal encoding re-rank of query-to-gallery distances.

    Builds reciprocal-neighbor sets over the pooled query+gallery points,
    encodes them as Gaussian-weighted sparse vectors, applies local query
    expansion over k2 neighbors, and blends the resulting Jaccard distance
    with the original distance: d = (1 - lambda) * d_jaccard + lambda * d_orig.
    With lambda = 1 the per-query ranking equals the original ranking.
    """
    prm = params or RerankParams()
    q = as_matrix(queries)
    g = as_matrix(gallery)
    num_q = q.shape[0]
    total = num_q + g.shape[0]
    if total < prm.k1 + 1:
        raise ValueError(f"need |Q|+|G| >= k1+1 = {prm.k1 + 1}, have {total}")
    feats = np.vstack([q, g])
    base = pairwise_distances(feats, feats, metric).data

    orig = base**2
    col_max = orig.max(axis=0)
    col_max[col_max == 0.0] = 1.0
    orig = (orig / col_max).T
    rank = np.argsort(orig, axis=1, kind="stable")

    half_k = int(np.around(prm.k1 / 2.0))
    encoded = np.zeros((total, total))
    for i in range(total):
        neighbors = _k_reciprocal_set(rank, i, prm.k1)
        expanded = [neighbors]
        for cand in neighbors:
            cand_set = _k_reciprocal_set(rank, int(cand), half_k)
            if np.intersect1d(cand_set, neighbors).size > 2.0 / 3.0 * cand_set.size:
                expanded.append(cand_set)
        members = np.unique(np.concatenate(expanded))
        weights = np.exp(-orig[i, members])
        encoded[i, members] = weights / weights.sum()

    orig = orig[:num_q]
    if prm.k2 > 1:
        encoded = np.stack([encoded[rank[i, : prm.k2]].mean(axis=0) for i in range(total)])

    inverted = [np.flatnonzero(encoded[:, col]) for col in range(total)]
    jaccard = np.zeros((num_q, total))
    for i in range(num_q):
        overlap = np.zeros(total)
        for col in np.flatnonzero(encoded[i]):
            rows = inverted[col]
            overlap[rows] += np.minimum(encoded[i, col], encoded[rows, col])
        jaccard[i] = 1.0 - overlap / (2.0 - overlap)

    final = (1.0 - prm.lam) * jaccard + prm.lam * orig
    return DistanceMatrix(final[:, num_q:], metric_name="reranked")


def rank_lists(dist: DistanceMatrix) -> np.ndarray:
    """Per-query gallery permutation, ascending distance, ties by gallery index."""
    return np.argsort(dist.data, axis=1, kind="stable")
