"""Knowledge-distillation losses: logit L1, probabilistic transfer, combined total.

Teacher quantities are constants here (the teacher stays frozen), so
gradients flow only to the student logits and features.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "KdBatch",
    "KdWeights",
    "logit_l1",
    "conditional_probs",
    "pkt_loss",
    "kd_total",
]

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class KdWeights:
    """Weight on the probabilistic-transfer term in the combined loss."""

    alpha: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0.0:
            raise ValueError("alpha must be finite and >= 0")


@dataclass(frozen=True)
class KdBatch:
    """Paired student/teacher logits and features for one batch."""

    student_logits: np.ndarray
    teacher_logits: np.ndarray
    student_feats: np.ndarray
    teacher_feats: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("student_logits", "teacher_logits", "student_feats", "teacher_feats"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite 2-d matrix")
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        m = arrays["student_logits"].shape[0]
        if m < 2:
            raise ValueError("batch needs m >= 2 rows")
        for name, arr in arrays.items():
            if arr.shape[0] != m:
                raise ValueError(f"{name} row count differs from the batch size")
        if arrays["student_logits"].shape[1] != arrays["teacher_logits"].shape[1]:
            raise ValueError("student and teacher logit widths must match")


def logit_l1(student_logits, teacher_logits):
    """Sum of absolute logit differences; subgradient sign(l_s - l_t), 0 at ties.

    Returns (loss, grad wrt student logits).
    """
    ls = np.asarray(student_logits, dtype=np.float64)
    lt = np.asarray(teacher_logits, dtype=np.float64)
    if ls.shape != lt.shape:
        raise ValueError(f"logit shapes differ: {ls.shape} vs {lt.shape}")
    diff = ls - lt
    return float(np.abs(diff).sum()), np.sign(diff)


def _cond_internals(feats: np.ndarray):
    norms = np.linalg.norm(feats, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm feature row")
    units = feats / norms[:, None]
    cos = np.clip(units @ units.T, -1.0, 1.0)
    kernel = (cos + 1.0) / 2.0
    np.fill_diagonal(kernel, 0.0)
    row_sums = kernel.sum(axis=1)
    if np.any(row_sums <= 0.0):
        raise ValueError("a feature row has zero total kernel mass")
    probs = kernel / row_sums[:, None]
    return probs, cos, units, norms, row_sums


def conditional_probs(feats) -> np.ndarray:
    """Row-stochastic pairwise similarity distribution.

    Kernel is cosine similarity shifted to [0, 1] via (cos+1)/2, normalized
    over j != i; the diagonal is zero and each row sums to 1.
    """
    arr = np.asarray(feats, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise ValueError("feats must be an (m, d) matrix with m >= 2")
    return _cond_internals(arr)[0]


def pkt_loss(student_feats, teacher_feats):
    """KL divergence from teacher to student conditional distributions.

    L = sum_i sum_{j != i} t_{ij} log(t_{ij} / s_{ij}), with student terms
    floored at 1e-12 instead of erroring. Returns (loss, grad wrt student
    features).
    """
    fs = np.asarray(student_feats, dtype=np.float64)
    ft = np.asarray(teacher_feats, dtype=np.float64)
    if fs.ndim != 2 or ft.ndim != 2 or fs.shape[0] != ft.shape[0]:
        raise ValueError("student/teacher features must share the batch dimension")
    if fs.shape[0] < 2:
        raise ValueError("need m >= 2 rows")
    s_probs, cos, units, norms, row_sums = _cond_internals(fs)
    t_probs = _cond_internals(ft)[0]

    m = fs.shape[0]
    off = ~np.eye(m, dtype=bool)
    support = off & (t_probs > 0.0)
    s_floored = np.maximum(s_probs, PROB_FLOOR)
    loss = float(np.sum(t_probs[support] * (np.log(t_probs[support]) - np.log(s_floored[support]))))

    # dL/dS is -t/s on the support; flat (zero) where the floor engaged
    g_s = np.zeros_like(s_probs)
    live = support & (s_probs >= PROB_FLOOR)
    g_s[live] = -t_probs[live] / s_probs[live]
    # through row normalization S = K / R, then the kernel shift K = (cos+1)/2
    h = (g_s * s_probs).sum(axis=1)
    g_cos = np.where(off, (g_s - h[:, None]) / row_sums[:, None], 0.0) * 0.5
    sym = g_cos + g_cos.T
    scale = (sym * cos).sum(axis=1)
    grad = (sym @ units - scale[:, None] * units) / norms[:, None]
    return loss, grad


def kd_total(
    batch: KdBatch,
    weights: KdWeights | None = None,
    reid_loss: float = 0.0,
    reid_grad_logits=None,
    reid_grad_feats=None,
):
    """Combined distillation objective: L1 + alpha * PKT + reid term.

    The re-id loss and its gradients come from the caller (they live in the
    losses module); gradients add linearly. Returns
    (loss, grad wrt student logits, grad wrt student features).
    """
    w = weights or KdWeights()
    l1, g_logits = logit_l1(batch.student_logits, batch.teacher_logits)
    pkt, g_feats = pkt_loss(batch.student_feats, batch.teacher_feats)
    total = l1 + w.alpha * pkt + float(reid_loss)
    g_feats = w.alpha * g_feats
    if reid_grad_logits is not None:
        g_logits = g_logits + np.asarray(reid_grad_logits, dtype=np.float64)
    if reid_grad_feats is not None:
        g_feats = g_feats + np.asarray(reid_grad_feats, dtype=np.float64)
    return total, g_logits, g_feats
