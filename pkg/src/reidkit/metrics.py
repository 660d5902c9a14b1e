"""Ranking evaluation: CMC, mAP, mINP, and ROC over a distance matrix.

Follows the standard cross-camera protocol: gallery entries sharing both
identity and camera with the query are dropped from that query's ranking
when the protocol flag is set. Queries left without any positive are
excluded from the averages and counted in the report.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import DistanceMatrix, ItemMeta

__all__ = ["EvalProtocol", "EvalReport", "evaluate", "roc_curve"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalProtocol:
    exclude_same_camera_same_id: bool = True
    max_rank: int = 10

    def __post_init__(self):
        if self.max_rank < 1:
            raise ValueError("max_rank must be positive")


@dataclass(frozen=True)
class EvalReport:
    """CMC curve, mAP, mINP, and ROC points with AUC.

    auc is None (and roc empty) when the pair lists are degenerate, i.e.
    every valid pair shares one identity status.
    """

    cmc: tuple[float, ...]
    mean_ap: float
    mean_inp: float
    roc: tuple[tuple[float, float], ...]
    auc: float | None
    num_queries: int
    num_excluded: int

    def rank_k(self, k: int) -> float:
        return self.cmc[k - 1]


def roc_curve(same_id_dists, diff_id_dists):
    """Threshold sweep over observed distances; accept means dist <= threshold.

    TAR is the accepted fraction of same-identity pairs, FAR of
    different-identity pairs. Returns (points, auc) where points is a list
    of (FAR, TAR) starting at (0, 0) and auc is the trapezoid-rule area.
    """
    same = np.asarray(same_id_dists, dtype=np.float64)
    diff = np.asarray(diff_id_dists, dtype=np.float64)
    if same.size == 0 or diff.size == 0:
        raise ValueError("both distance lists must be non-empty")
    same = np.sort(same)
    diff = np.sort(diff)
    thresholds = np.unique(np.concatenate([same, diff]))
    # searchsorted(side="right") counts entries <= t in one pass per list
    tar = np.searchsorted(same, thresholds, side="right") / same.size
    far = np.searchsorted(diff, thresholds, side="right") / diff.size
    fars = np.concatenate([[0.0], far])
    tars = np.concatenate([[0.0], tar])
    auc = float(np.trapezoid(tars, fars))
    points = [(float(f), float(t)) for f, t in zip(fars, tars)]
    return points, auc


def evaluate(
    dist: DistanceMatrix,
    query_meta: list[ItemMeta],
    gallery_meta: list[ItemMeta],
    protocol: EvalProtocol | None = None,
) -> EvalReport:
    """Score a distance matrix against identity/camera labels."""
    proto = protocol or EvalProtocol()
    d = dist.data
    if len(query_meta) != d.shape[0] or len(gallery_meta) != d.shape[1]:
        raise ValueError("metadata lengths must match the distance matrix")
    g_pids = np.asarray([m.person_id for m in gallery_meta])
    g_cams = np.asarray([m.camera_id for m in gallery_meta])
    max_rank = proto.max_rank
    if max_rank > d.shape[1]:
        logger.warning(
            "max_rank %d exceeds gallery size %d; clamping", max_rank, d.shape[1]
        )
        max_rank = d.shape[1]

    first_match_counts = np.zeros(max_rank)
    aps: list[float] = []
    inps: list[float] = []
    same_dists: list[np.ndarray] = []
    diff_dists: list[np.ndarray] = []
    num_excluded = 0

    for qi, qmeta in enumerate(query_meta):
        order = np.argsort(d[qi], kind="stable")
        pids = g_pids[order]
        cams = g_cams[order]
        if proto.exclude_same_camera_same_id:
            keep = ~((pids == qmeta.person_id) & (cams == qmeta.camera_id))
        else:
            keep = np.ones(pids.shape, dtype=bool)
        matches = pids[keep] == qmeta.person_id
        kept_dists = d[qi][order][keep]
        same_dists.append(kept_dists[matches])
        diff_dists.append(kept_dists[~matches])
        if not matches.any():
            num_excluded += 1
            continue
        ranks = np.flatnonzero(matches) + 1
        num_pos = ranks.size
        aps.append(float(np.mean(np.arange(1, num_pos + 1) / ranks)))
        inps.append(num_pos / float(ranks[-1]))
        if ranks[0] <= max_rank:
            first_match_counts[ranks[0] - 1] += 1

    num_valid = len(aps)
    if num_valid == 0:
        raise ValueError("no query has a valid positive after exclusion")
    if num_excluded:
        logger.warning("%d queries had no valid positive and were excluded", num_excluded)

    cmc = np.cumsum(first_match_counts) / num_valid
    same_all = np.concatenate(same_dists)
    diff_all = np.concatenate(diff_dists)
    if same_all.size and diff_all.size:
        roc_points, auc = roc_curve(same_all, diff_all)
    else:
        roc_points, auc = [], None
    return EvalReport(
        cmc=tuple(float(v) for v in cmc),
        mean_ap=float(np.mean(aps)),
        mean_inp=float(np.mean(inps)),
        roc=tuple(roc_points),
        auc=auc,
        num_queries=num_valid,
        num_excluded=num_excluded,
    )
