"""Post-aggregation transforms: batch normalization, reduction, decision layer.

Forward/inference semantics only. Batch normalization uses the statistics
of the batch it is given (biased 1/m variance); there is no running-moment
tracking here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_vector

__all__ = [
    "BnParams",
    "LinearParams",
    "batchnorm_forward",
    "reduction_forward",
    "decision_logits",
]


@dataclass(frozen=True)
class BnParams:
    """Per-channel scale/shift and the variance stabilizer epsilon."""

    gamma: np.ndarray
    beta: np.ndarray
    epsilon: float = 1e-5

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=np.float64)
        beta = np.asarray(self.beta, dtype=np.float64)
        if gamma.ndim != 1 or beta.shape != gamma.shape:
            raise ValueError("gamma and beta must be 1-d vectors of equal length")
        if not (np.all(np.isfinite(gamma)) and np.all(np.isfinite(beta))):
            raise ValueError("gamma and beta must be finite")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)


@dataclass(frozen=True)
class LinearParams:
    """Dense map y = W x (+ bias), W of shape (out, in)."""

    weight: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        weight = np.asarray(self.weight, dtype=np.float64)
        if weight.ndim != 2 or not np.all(np.isfinite(weight)):
            raise ValueError("weight must be a finite (out, in) matrix")
        object.__setattr__(self, "weight", weight)
        if self.bias is not None:
            bias = np.asarray(self.bias, dtype=np.float64)
            if bias.shape != (weight.shape[0],) or not np.all(np.isfinite(bias)):
                raise ValueError("bias must be a finite vector of length out")
            object.__setattr__(self, "bias", bias)

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]


def batchnorm_forward(batch, params: BnParams) -> np.ndarray:
    """Normalize each column by batch mean and biased variance, then affine.

    Requires m >= 2 rows; batch statistics are undefined for a single sample.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("batch must be an (m, C) matrix")
    m, c = x.shape
    if m < 2:
        raise ValueError(f"batchnorm needs m >= 2 rows, got {m}")
    if params.gamma.shape[0] != c:
        raise ValueError(f"BnParams sized for C={params.gamma.shape[0]}, batch has C={c}")
    mu = x.mean(axis=0)
    var = np.mean((x - mu) ** 2, axis=0)
    return params.gamma * (x - mu) / np.sqrt(var + params.epsilon) + params.beta


def _apply_linear(x: np.ndarray, p: LinearParams) -> np.ndarray:
    if x.shape[1] != p.in_dim:
        raise ValueError(f"linear expects input dim {p.in_dim}, got {x.shape[1]}")
    out = x @ p.weight.T
    if p.bias is not None:
        out = out + p.bias
    return out


def reduction_forward(
    batch,
    conv: LinearParams,
    conv_bn: BnParams,
    reduce: LinearParams,
    dropout_prob: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> np.ndarray:
    """Reduction head: linear -> batchnorm -> relu -> dropout -> reduction linear.

    The leading "conv" acts on a 1x1 spatial vector, so it degenerates to a
    dense map. Dropout is identity at inference; in training mode it zeroes
    units with probability dropout_prob and rescales survivors by 1/(1-p),
    drawing the mask from `rng`.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("batch must be an (m, C) matrix")
    if not 0.0 <= dropout_prob < 1.0:
        raise ValueError("dropout_prob must be in [0, 1)")
    if reduce.out_dim >= x.shape[1]:
        raise ValueError(
            f"reduction must shrink the feature: C'={reduce.out_dim} >= C={x.shape[1]}"
        )
    h = _apply_linear(x, conv)
    h = batchnorm_forward(h, conv_bn)
    h = np.maximum(h, 0.0)
    if training and dropout_prob > 0.0:
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        mask = rng.random(h.shape) >= dropout_prob
        h = h * mask / (1.0 - dropout_prob)
    return _apply_linear(h, reduce)


def decision_logits(f, params: LinearParams) -> np.ndarray:
    """Class logits W f (+ bias) for a single embedding."""
    vec = as_vector(f)
    if vec.shape[0] != params.in_dim:
        raise ValueError(f"decision layer expects dim {params.in_dim}, got {vec.shape[0]}")
    out = params.weight @ vec
    if params.bias is not None:
        out = out + params.bias
    return out
