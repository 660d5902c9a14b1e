"""Classification and metric-learning losses, each with analytic gradients.

Every loss returns its value together with the gradient with respect to its
direct inputs, so finite-difference checks can be run against the exact same
callable. Gradients differentiate through the self-paced weights of the
circle loss (they are part of the function, not detached constants).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import UNIT_NORM_TOL, as_vector

__all__ = [
    "SmoothedTarget",
    "ArcfaceParams",
    "CircleParams",
    "TripletParams",
    "softmax_probs",
    "cross_entropy_ls",
    "arcface_logits",
    "arcface_ce_loss",
    "circle_loss",
    "triplet_loss",
    "batch_hard_mine",
]


@dataclass(frozen=True)
class SmoothedTarget:
    """Label-smoothed class target: 1-delta on the true class, delta/(C-1) elsewhere."""

    class_index: int
    num_classes: int
    delta: float = 0.1

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if not 0 <= self.class_index < self.num_classes:
            raise ValueError("class_index out of range")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("delta must lie in [0, 1)")

    def vector(self) -> np.ndarray:
        y = np.full(self.num_classes, self.delta / (self.num_classes - 1))
        y[self.class_index] = 1.0 - self.delta
        return y


@dataclass(frozen=True)
class ArcfaceParams:
    """Additive angular margin m and logit scale s."""

    scale: float = 64.0
    margin: float = 0.5

    def __post_init__(self):
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")
        if not 0.0 <= self.margin < np.pi / 2:
            raise ValueError("margin must lie in [0, pi/2)")


@dataclass(frozen=True)
class CircleParams:
    gamma: float = 80.0
    margin: float = 0.25

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if not 0.0 < self.margin < 1.0:
            raise ValueError("margin must lie in (0, 1)")


@dataclass(frozen=True)
class TripletParams:
    """Hinge margin; soft_margin switches to log(1+exp(d_ap-d_an)).

    clamped=False gives the raw unclamped sum m + d_ap - d_an.
    """

    margin: float = 0.3
    soft_margin: bool = False
    clamped: bool = True

    def __post_init__(self):
        if self.margin < 0.0:
            raise ValueError("margin must be >= 0")


def _logsumexp(v: np.ndarray) -> float:
    peak = float(np.max(v))
    return peak + float(np.log(np.sum(np.exp(v - peak))))


def softmax_probs(logits) -> np.ndarray:
    """Softmax with max-subtraction; entries positive and summing to 1."""
    z = as_vector(logits)
    e = np.exp(z - z.max())
    return e / e.sum()


def cross_entropy_ls(logits, target: SmoothedTarget, form: str = "categorical"):
    """Cross-entropy against a label-smoothed target.

    form="categorical" (default): -sum_i y_i log p_i with p = softmax(logits).
    form="binary": the per-class binary variant
    -sum_i [y_i log p_i + (1-y_i) log(1-p_i)].

    Returns (loss, gradient wrt logits).
    """
    z = as_vector(logits)
    if z.shape[0] != target.num_classes:
        raise ValueError("logit width does not match target.num_classes")
    y = target.vector()
    shifted = z - z.max()
    log_norm = np.log(np.sum(np.exp(shifted)))
    log_p = shifted - log_norm
    p = np.exp(log_p)
    if form == "categorical":
        loss = -float(np.dot(y, log_p))
        grad = p - y
    elif form == "binary":
        q = np.clip(1.0 - p, 1e-300, None)
        loss = -float(np.dot(y, log_p) + np.dot(1.0 - y, np.log(q)))
        dldp = -y / np.clip(p, 1e-300, None) + (1.0 - y) / q
        grad = p * (dldp - np.dot(dldp, p))
    else:
        raise ValueError(f"unknown form {form!r}")
    return loss, grad


def _check_unit(vec: np.ndarray, what: str) -> None:
    if abs(np.linalg.norm(vec) - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"{what} must be l2-normalized")


def arcface_logits(f, weights, target_index: int, params: ArcfaceParams) -> np.ndarray:
    """Angular-margin logits: s*cos(theta_c + m) on the target row, s*cos(theta) elsewhere.

    Both the embedding and every classifier row must already be unit-norm.
    """
    vec = as_vector(f)
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != vec.shape[0]:
        raise ValueError("weights must be (num_classes, dim) matching the embedding")
    if not 0 <= target_index < w.shape[0]:
        raise ValueError("target_index out of range")
    _check_unit(vec, "embedding")
    for i in range(w.shape[0]):
        _check_unit(w[i], f"weight row {i}")
    cos = np.clip(w @ vec, -1.0, 1.0)
    out = params.scale * cos
    c = cos[target_index]
    sin = np.sqrt(max(0.0, 1.0 - c * c))
    out[target_index] = params.scale * (c * np.cos(params.margin) - sin * np.sin(params.margin))
    return out


def arcface_ce_loss(
    f,
    weights,
    target_index: int,
    params: ArcfaceParams,
    delta: float = 0.0,
):
    """Composition of arcface logits with smoothed softmax cross-entropy.

    Normalizes the raw embedding internally and returns (loss, gradient wrt the
    raw embedding), chaining through the normalization jacobian.
    """
    raw = as_vector(f)
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        raise ValueError("zero-norm embedding")
    unit = raw / norm
    w = np.asarray(weights, dtype=np.float64)
    w_unit = w / np.linalg.norm(w, axis=1, keepdims=True)

    cos = np.clip(w_unit @ unit, -1.0, 1.0)
    z = params.scale * cos
    c = cos[target_index]
    sin = np.sqrt(max(1e-300, 1.0 - c * c))
    z = z.copy()
    z[target_index] = params.scale * (c * np.cos(params.margin) - sin * np.sin(params.margin))

    target = SmoothedTarget(target_index, w.shape[0], delta)
    loss, dldz = cross_entropy_ls(z, target)

    dzdc = np.full_like(cos, params.scale)
    dzdc[target_index] = params.scale * (np.cos(params.margin) + c / sin * np.sin(params.margin))
    dldc = dldz * dzdc
    dldu = w_unit.T @ dldc
    grad = (dldu - np.dot(unit, dldu) * unit) / norm
    return loss, grad


def circle_loss(sim_p, sim_n, params: CircleParams | None = None):
    """Circle loss over positive/negative similarity sets.

    L = log(1 + sum_n exp(g*a_n*(s_n - D_n)) * sum_p exp(-g*a_p*(s_p - D_p)))
    with self-paced weights a_p = max(0, 1+m-s_p), a_n = max(0, s_n+m) and
    optima D_p = 1-m, D_n = m. Returns (loss, grad_p, grad_n).
    """
    prm = params or CircleParams()
    sp = np.atleast_1d(np.asarray(sim_p, dtype=np.float64))
    sn = np.atleast_1d(np.asarray(sim_n, dtype=np.float64))
    if sp.size == 0 or sn.size == 0:
        raise ValueError("need at least one positive and one negative similarity")
    for name, s in (("positive", sp), ("negative", sn)):
        if s.min() < -1.0 - 1e-9 or s.max() > 1.0 + 1e-9:
            raise ValueError(f"{name} similarities must lie in [-1, 1]")
    g, m = prm.gamma, prm.margin

    alpha_n = np.maximum(0.0, sn + m)
    alpha_p = np.maximum(0.0, 1.0 + m - sp)
    a = g * alpha_n * (sn - m)
    b = -g * alpha_p * (sp - (1.0 - m))
    log_a = _logsumexp(a)
    log_b = _logsumexp(b)
    loss = float(np.logaddexp(0.0, log_a + log_b))

    # d a_n / d s_n = 2 g s_n on the active branch, 0 where alpha_n == 0
    da = np.where(alpha_n > 0.0, 2.0 * g * sn, 0.0)
    db = np.where(alpha_p > 0.0, -2.0 * g * (1.0 - sp), 0.0)
    grad_n = np.exp(a + log_b - loss) * da
    grad_p = np.exp(b + log_a - loss) * db
    return loss, grad_p, grad_n


def triplet_loss(dist_ap, dist_an, params: TripletParams | None = None):
    """Triplet loss summed over anchors; scalars or same-shape arrays.

    Hinge form max(0, m + d_ap - d_an) by default; soft_margin uses
    log(1 + exp(d_ap - d_an)); clamped=False keeps the raw sum.
    Returns (loss, grad_ap, grad_an).
    """
    prm = params or TripletParams()
    ap = np.asarray(dist_ap, dtype=np.float64)
    an = np.asarray(dist_an, dtype=np.float64)
    ap, an = np.broadcast_arrays(ap, an)
    if ap.size and (ap.min() < 0.0 or an.min() < 0.0):
        raise ValueError("distances must be >= 0")
    diff = ap - an
    if prm.soft_margin:
        per = np.logaddexp(0.0, diff)
        sig = 1.0 / (1.0 + np.exp(-diff))
        grad_ap, grad_an = sig, -sig
    elif prm.clamped:
        per = np.maximum(0.0, prm.margin + diff)
        active = (per > 0.0).astype(np.float64)
        grad_ap, grad_an = active, -active
    else:
        per = prm.margin + diff
        grad_ap = np.ones_like(per)
        grad_an = -np.ones_like(per)
    return float(per.sum()), grad_ap, grad_an


def batch_hard_mine(dist, labels):
    """Hardest positive / hardest negative distance per anchor.

    Per row i of a square distance matrix: max over same-label entries
    (excluding self) and min over different-label entries. Every label must
    occur at least twice and at least two distinct labels must be present.
    """
    d = np.asarray(dist, dtype=np.float64)
    lab = np.asarray(labels)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("dist must be square")
    if lab.shape[0] != d.shape[0]:
        raise ValueError("labels length must match dist")
    uniq, counts = np.unique(lab, return_counts=True)
    if uniq.size < 2:
        raise ValueError("need at least 2 distinct labels")
    if counts.min() < 2:
        scarce = uniq[np.argmin(counts)]
        raise ValueError(f"label {scarce!r} occurs fewer than 2 times")
    same = lab[:, None] == lab[None, :]
    eye = np.eye(d.shape[0], dtype=bool)
    pos_mask = same & ~eye
    neg_mask = ~same
    dist_ap = np.where(pos_mask, d, -np.inf).max(axis=1)
    dist_an = np.where(neg_mask, d, np.inf).min(axis=1)
    return dist_ap, dist_an
