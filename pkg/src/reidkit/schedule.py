"""Training-strategy computations: learning rate curve, freeze gate, PK batches.

The learning rate follows linear warmup, a constant plateau, then cosine
decay. Defaults reproduce the 18k-iteration curve: 3.5e-5 warmup start,
3.5e-4 plateau over iterations 2000..9000, cosine decay to 7.7e-7 at 18000.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ItemMeta

__all__ = [
    "LrSchedule",
    "PkSpec",
    "lr_at",
    "is_backbone_frozen",
    "pk_sample",
    "DEFAULT_FREEZE_ITERS",
]

DEFAULT_FREEZE_ITERS = 2000


@dataclass(frozen=True)
class LrSchedule:
    warmup_start_lr: float = 3.5e-5
    base_lr: float = 3.5e-4
    final_lr: float = 7.7e-7
    warmup_iters: int = 2000
    plateau_end_iter: int = 9000
    total_iters: int = 18000

    def __post_init__(self):
        if not (0 <= self.warmup_iters <= self.plateau_end_iter <= self.total_iters):
            raise ValueError("need warmup_iters <= plateau_end_iter <= total_iters")
        if self.total_iters < 1:
            raise ValueError("total_iters must be positive")
        if not self.warmup_start_lr <= self.base_lr:
            raise ValueError("warmup_start_lr must not exceed base_lr")
        if not self.final_lr <= self.base_lr:
            raise ValueError("final_lr must not exceed base_lr")


@dataclass(frozen=True)
class PkSpec:
    """Batch composition: P distinct identities, K items each."""

    p: int = 4
    k: int = 16

    def __post_init__(self):
        if self.p < 2 or self.k < 2:
            raise ValueError("need P >= 2 and K >= 2")

    @property
    def batch_size(self) -> int:
        return self.p * self.k


def lr_at(iteration: int, schedule: LrSchedule | None = None) -> float:
    """Learning rate at an iteration of the warmup/plateau/cosine curve."""
    s = schedule or LrSchedule()
    if not 0 <= iteration <= s.total_iters:
        raise ValueError(f"iteration {iteration} outside [0, {s.total_iters}]")
    if iteration <= s.warmup_iters:
        if s.warmup_iters == 0:
            return s.base_lr
        frac = iteration / s.warmup_iters
        return s.warmup_start_lr + (s.base_lr - s.warmup_start_lr) * frac
    if iteration <= s.plateau_end_iter:
        return s.base_lr
    t = (iteration - s.plateau_end_iter) / (s.total_iters - s.plateau_end_iter)
    return s.final_lr + (s.base_lr - s.final_lr) * (1.0 + math.cos(math.pi * t)) / 2.0


def is_backbone_frozen(iteration: int, freeze_iters: int = DEFAULT_FREEZE_ITERS) -> bool:
    """True while only the classifier trains: the half-open window [0, freeze_iters)."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    return iteration < freeze_iters


def pk_sample(meta: list[ItemMeta], spec: PkSpec, rng: np.random.Generator) -> np.ndarray:
    """Sample a P*K batch of item indices: P distinct identities, K items each.

    Identities holding fewer than K items are sampled with replacement.
    Raises if fewer than P identities exist at all.
    """
    by_pid: dict[int, list[int]] = {}
    for idx, item in enumerate(meta):
        by_pid.setdefault(item.person_id, []).append(idx)
    pids = sorted(by_pid)
    if len(pids) < spec.p:
        raise ValueError(f"need at least P={spec.p} identities, have {len(pids)}")
    chosen = rng.choice(len(pids), size=spec.p, replace=False)
    batch: list[int] = []
    for pid_pos in chosen:
        pool = by_pid[pids[int(pid_pos)]]
        picks = rng.choice(len(pool), size=spec.k, replace=len(pool) < spec.k)
        batch.extend(pool[int(i)] for i in picks)
    return np.asarray(batch, dtype=np.int64)
