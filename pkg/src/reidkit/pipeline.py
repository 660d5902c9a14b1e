"""Batch-evaluation orchestration: distance -> post-processing -> metrics -> files.

Every artifact (report.json, roc.csv, rank_lists.csv and the rendered
figures) is written with deterministic formatting: LF line endings, '.'
decimal separator, 9 significant digits. Two runs with the same config
produce byte-identical data files. Partial outputs are removed if any
stage fails.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import PipelineConfig, ScheduleConfig
from .core import DistanceMatrix, ItemMeta, validate_meta_set
from .io import load_array, load_embeddings, save_embeddings
from .metrics import EvalReport, evaluate
from .retrieval import (
    SpatialFeatureSet,
    dsr_score,
    k_reciprocal_rerank,
    pairwise_distances,
    query_expansion,
    rank_lists,
)
from .schedule import is_backbone_frozen, lr_at
from . import plots

__all__ = ["run_eval", "run_rerank_only", "gen_synthetic", "dump_schedule", "fmt9"]

logger = logging.getLogger(__name__)

# distances are always computed over fixed-size row blocks so that results
# are bitwise independent of how many worker threads execute the blocks
_ROW_BLOCK = 256


def fmt9(value: float) -> str:
    """Format a float with 9 significant digits and '.' decimal separator."""
    return format(float(value), ".9g")


def _blocked_distances(queries: np.ndarray, gallery: np.ndarray, metric: str, threads: int) -> DistanceMatrix:
    num_q = queries.shape[0]
    out = np.empty((num_q, gallery.shape[0]))
    starts = range(0, num_q, _ROW_BLOCK)

    def fill(start: int) -> None:
        stop = min(start + _ROW_BLOCK, num_q)
        out[start:stop] = pairwise_distances(queries[start:stop], gallery, metric).data

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    else:
        for start in starts:
            fill(start)
    return DistanceMatrix(out, metric_name=metric)


def _load_spatial_sets(directory: str, meta: list[ItemMeta]) -> list[SpatialFeatureSet]:
    base = Path(directory)
    sets = []
    for m in meta:
        path = base / f"{m.item_id}.reid"
        # files store one spatial location per row; columns are the d axis
        sets.append(SpatialFeatureSet(load_array(path).T))
    return sets


def _dsr_distances(cfg: PipelineConfig, qmeta, gmeta) -> DistanceMatrix:
    if not cfg.dsr_query_dir or not cfg.dsr_gallery_dir:
        raise ValueError("dsr metric needs dsr.query_dir and dsr.gallery_dir")
    q_sets = _load_spatial_sets(cfg.dsr_query_dir, qmeta)
    g_sets = _load_spatial_sets(cfg.dsr_gallery_dir, gmeta)
    out = np.empty((len(q_sets), len(g_sets)))
    for i, qs in enumerate(q_sets):
        for j, gs in enumerate(g_sets):
            # normalized best-match similarity in [-1, 1] -> distance in [0, 2]
            out[i, j] = 1.0 - dsr_score(qs, gs)[1]
    return DistanceMatrix(np.clip(out, 0.0, 2.0), metric_name="dsr")


def _apply_post_processing(cfg, queries, gallery, dist, threads):
    for step in cfg.post_order:
        if step == "qe" and cfg.qe is not None:
            queries = np.stack(
                [query_expansion(queries[i], gallery, cfg.qe) for i in range(queries.shape[0])]
            )
            dist = _blocked_distances(queries, gallery, cfg.metric, threads)
        elif step == "rerank" and cfg.rerank is not None:
            dist = k_reciprocal_rerank(queries, gallery, cfg.rerank, metric=cfg.metric)
    return queries, dist


def _report_payload(report: EvalReport) -> dict:
    return {
        "auc": float(fmt9(report.auc)),
        "cmc": [float(fmt9(v)) for v in report.cmc],
        "map": float(fmt9(report.mean_ap)),
        "minp": float(fmt9(report.mean_inp)),
        "num_excluded": report.num_excluded,
        "num_queries": report.num_queries,
        "num_roc_points": len(report.roc),
    }


def _write_rank_lists(path, dist, qmeta, gmeta, protocol) -> None:
    order = rank_lists(dist)
    g_pids = np.asarray([m.person_id for m in gmeta])
    g_cams = np.asarray([m.camera_id for m in gmeta])
    with open(path, "w", newline="") as fh:
        fh.write("query_id,rank,gallery_id,distance,correct\n")
        for qi, qm in enumerate(qmeta):
            row = order[qi]
            if protocol.exclude_same_camera_same_id:
                keep = ~((g_pids[row] == qm.person_id) & (g_cams[row] == qm.camera_id))
                row = row[keep]
            for rank, gi in enumerate(row[: protocol.max_rank], start=1):
                correct = int(g_pids[gi] == qm.person_id)
                fh.write(
                    f"{qm.item_id},{rank},{gmeta[gi].item_id},{fmt9(dist.data[qi, gi])},{correct}\n"
                )


def _write_roc_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("far,tar\n")
        for far, tar in points:
            fh.write(f"{fmt9(far)},{fmt9(tar)}\n")


class _OutputTracker:
    """Removes everything it registered if the run dies half-way."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.written.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)


def run_eval(cfg: PipelineConfig, out_dir=None, threads: int | None = None) -> EvalReport:
    """Run the full evaluation pipeline and write its artifacts.

    Writes report.json, roc.csv, rank_lists.csv plus roc.png and cmc.png
    into the output directory and returns the in-memory report.
    """
    workers = threads if threads is not None else cfg.threads
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    if not cfg.query_path or not cfg.gallery_path:
        raise ValueError("config must name query and gallery embedding files")

    queries, qmeta = load_embeddings(cfg.query_path)
    gallery, gmeta = load_embeddings(cfg.gallery_path)
    validate_meta_set(qmeta)
    validate_meta_set(gmeta)

    if cfg.metric == "dsr":
        dist = _dsr_distances(cfg, qmeta, gmeta)
    else:
        dist = _blocked_distances(queries, gallery, cfg.metric, workers)
        queries, dist = _apply_post_processing(cfg, queries, gallery, dist, workers)

    report = evaluate(dist, qmeta, gmeta, cfg.protocol)

    out.mkdir(parents=True, exist_ok=True)
    tracker = _OutputTracker(out)
    try:
        tracker.path("report.json").write_text(
            json.dumps(_report_payload(report), indent=2, sort_keys=True) + "\n"
        )
        _write_roc_csv(tracker.path("roc.csv"), report.roc)
        _write_rank_lists(tracker.path("rank_lists.csv"), dist, qmeta, gmeta, cfg.protocol)
        plots.save_roc_figure(report.roc, report.auc, tracker.path("roc.png"))
        plots.save_cmc_figure(report.cmc, tracker.path("cmc.png"))
    except Exception:
        tracker.cleanup()
        raise
    logger.info(
        "evaluated %d queries: mAP=%s mINP=%s rank-1=%s",
        report.num_queries, fmt9(report.mean_ap), fmt9(report.mean_inp), fmt9(report.cmc[0]),
    )
    return report


def run_rerank_only(cfg: PipelineConfig, out_dir=None) -> DistanceMatrix:
    """Compute the re-ranked distance matrix and write it with its rank lists."""
    if cfg.rerank is None:
        raise ValueError("config has no rerank section")
    if cfg.metric == "dsr":
        raise ValueError("rerank needs flat embeddings, not dsr spatial sets")
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    queries, qmeta = load_embeddings(cfg.query_path)
    gallery, gmeta = load_embeddings(cfg.gallery_path)
    dist = k_reciprocal_rerank(queries, gallery, cfg.rerank, metric=cfg.metric)

    out.mkdir(parents=True, exist_ok=True)
    tracker = _OutputTracker(out)
    try:
        with open(tracker.path("reranked_distances.csv"), "w", newline="") as fh:
            fh.write("query_id," + ",".join(m.item_id for m in gmeta) + "\n")
            for qi, qm in enumerate(qmeta):
                fh.write(qm.item_id + "," + ",".join(fmt9(v) for v in dist.data[qi]) + "\n")
        _write_rank_lists(tracker.path("rank_lists.csv"), dist, qmeta, gmeta, cfg.protocol)
    except Exception:
        tracker.cleanup()
        raise
    return dist


def gen_synthetic(
    num_ids: int,
    per_id: int,
    dim: int,
    noise_sigma: float,
    seed: int,
    out_dir,
    width: int = 4,
) -> dict[str, Path]:
    """Write a synthetic query/gallery pair for desk-scale experiments.

    Each identity gets a random unit mean; its items are the mean plus
    gaussian noise, renormalized. The first item per identity becomes the
    query, the rest go to the gallery; camera ids alternate by item index.
    """
    if num_ids < 1 or dim < 1:
        raise ValueError("num_ids and dim must be positive")
    if per_id < 2:
        raise ValueError("per_id must be >= 2 so each identity reaches the gallery")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    rng = np.random.Generator(np.random.Philox(seed))
    q_vecs, q_meta, g_vecs, g_meta = [], [], [], []
    for pid in range(num_ids):
        mean = rng.standard_normal(dim)
        mean /= np.linalg.norm(mean)
        for j in range(per_id):
            vec = mean + noise_sigma * rng.standard_normal(dim)
            vec /= np.linalg.norm(vec)
            meta = ItemMeta(f"id{pid:04d}_{j}", pid, j % 2)
            if j == 0:
                q_vecs.append(vec)
                q_meta.append(meta)
            else:
                g_vecs.append(vec)
                g_meta.append(meta)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    query_path = out / "query.reid"
    gallery_path = out / "gallery.reid"
    save_embeddings(query_path, np.stack(q_vecs), q_meta, width=width)
    save_embeddings(gallery_path, np.stack(g_vecs), g_meta, width=width)
    return {"query": query_path, "gallery": gallery_path}


def dump_schedule(sched_cfg: ScheduleConfig, out_dir, stride: int | None = None) -> list[tuple[int, float, bool]]:
    """Write the (iter, lr, frozen) table and its figure; returns the rows."""
    if sched_cfg is None:
        raise ValueError("config has no schedule section")
    step = stride if stride is not None else sched_cfg.stride
    if step < 1:
        raise ValueError("stride must be positive")
    s = sched_cfg.schedule
    rows = [
        (it, lr_at(it, s), is_backbone_frozen(it, sched_cfg.freeze_iters))
        for it in range(0, s.total_iters + 1, step)
    ]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "schedule.csv", "w", newline="") as fh:
        fh.write("iter,lr,frozen\n")
        for it, lr, frozen in rows:
            fh.write(f"{it},{fmt9(lr)},{int(frozen)}\n")
    plots.save_schedule_figure(
        [r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows], out / "schedule.png"
    )
    return rows
