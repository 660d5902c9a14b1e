"""Spatial pooling operators that collapse a feature map into an embedding.

All poolings reduce the two spatial axes of a (W, H, C) map independently
per channel. Generalized-mean pooling is evaluated in log space so large
exponents neither overflow nor lose the power-mean ordering avg <= gem <= max.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Embedding, FeatureMap

__all__ = [
    "GemParams",
    "AttentionWeights",
    "spatial_softmax",
    "max_pool",
    "avg_pool",
    "gem_pool",
    "attention_pool",
]

DEFAULT_GEM_ALPHA = 3.0
GEM_CLAMP = 1e-6


@dataclass(frozen=True)
class GemParams:
    """Control coefficient for generalized-mean pooling (alpha >= 1)."""

    alpha: float = DEFAULT_GEM_ALPHA

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 1.0:
            raise ValueError("GemParams.alpha must be finite and >= 1")


@dataclass(frozen=True)
class AttentionWeights:
    """Non-negative spatial weights, one (W, H) grid per channel."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.size == 0:
            raise ValueError("AttentionWeights.data must be W x H x C")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0:
            raise ValueError("attention weights must be finite and non-negative")
        if np.any(arr.sum(axis=(0, 1)) <= 0.0):
            raise ValueError("each channel needs a positive total weight")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)


def spatial_softmax(scores) -> AttentionWeights:
    """Build attention weights by a per-channel softmax over spatial positions."""
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError("scores must be W x H x C")
    shifted = arr - arr.max(axis=(0, 1), keepdims=True)
    expd = np.exp(shifted)
    return AttentionWeights(expd / expd.sum(axis=(0, 1), keepdims=True))


def max_pool(x: FeatureMap) -> Embedding:
    """Per-channel spatial maximum."""
    return Embedding(x.data.max(axis=(0, 1)))


def avg_pool(x: FeatureMap) -> Embedding:
    """Per-channel spatial arithmetic mean."""
    return Embedding(x.data.mean(axis=(0, 1)))


def gem_pool(x: FeatureMap, params: GemParams | None = None) -> Embedding:
    """Per-channel generalized mean (mean of x**alpha) ** (1/alpha).

    Entries below GEM_CLAMP are lifted to it first: fractional powers of
    negatives are undefined and the upstream activations are rectified.
    """
    p = params or GemParams()
    clamped = np.maximum(x.data, GEM_CLAMP)
    logs = p.alpha * np.log(clamped)
    peak = logs.max(axis=(0, 1))
    # log-space evaluation of (mean(x**alpha))**(1/alpha)
    log_mean = peak + np.log(np.mean(np.exp(logs - peak), axis=(0, 1)))
    return Embedding(np.exp(log_mean / p.alpha))


def attention_pool(x: FeatureMap, weights: AttentionWeights) -> Embedding:
    """Weighted spatial mean, normalized by the per-channel weight total.

    With uniform weights this reduces exactly to avg_pool; a one-hot weight
    grid selects the value at that position.
    """
    if weights.data.shape != x.data.shape:
        raise ValueError(
            f"weight shape {weights.data.shape} != feature shape {x.data.shape}"
        )
    num = (weights.data * x.data).sum(axis=(0, 1))
    den = weights.data.sum(axis=(0, 1))
    return Embedding(num / den)
