"""Seedable image pre-processing: resize, flip, and the rectangle erasers.

All randomness flows through an explicit numpy Generator backed by the
Philox 4x64 counter-based bit generator, whose output stream is fixed by
the algorithm specification, so every operator replays bit-exactly across
platforms and processes for the same seed. Operators never mutate their
inputs; callers own any parallelism across images.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ImageTensor

__all__ = [
    "AugmentConfig",
    "make_rng",
    "resize",
    "horizontal_flip",
    "random_erasing",
    "cutout",
    "random_patch",
    "MAX_RECT_ATTEMPTS",
]

MAX_RECT_ATTEMPTS = 10


@dataclass(frozen=True)
class AugmentConfig:
    target_h: int = 256
    target_w: int = 128
    flip_prob: float = 0.5
    erase_prob: float = 0.5
    erase_area_range: tuple[float, float] = (0.02, 0.4)
    erase_aspect_range: tuple[float, float] = (0.3, 10.0 / 3.0)
    seed: int = 0

    def __post_init__(self):
        if self.target_h < 1 or self.target_w < 1:
            raise ValueError("target dims must be positive")
        for name, prob in (("flip_prob", self.flip_prob), ("erase_prob", self.erase_prob)):
            if not 0.0 <= prob <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        lo, hi = self.erase_area_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError("erase_area_range must satisfy 0 < lo <= hi <= 1")
        alo, ahi = self.erase_aspect_range
        if not (0.0 < alo <= ahi):
            raise ValueError("erase_aspect_range must satisfy 0 < lo <= hi")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox 4x64) for reproducible augmentation."""
    return np.random.Generator(np.random.Philox(seed))


def resize(img: ImageTensor, target_h: int, target_w: int) -> ImageTensor:
    """Bilinear resize with half-pixel (align_corners=False) sampling."""
    if target_h < 1 or target_w < 1:
        raise ValueError("target dims must be positive")
    src = img.data
    h, w = src.shape[:2]
    ys = np.clip((np.arange(target_h) + 0.5) * (h / target_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(target_w) + 0.5) * (w / target_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    top = src[y0][:, x0] * (1.0 - wx) + src[y0][:, x1] * wx
    bot = src[y1][:, x0] * (1.0 - wx) + src[y1][:, x1] * wx
    out = top * (1.0 - wy) + bot * wy
    return ImageTensor(np.clip(out, 0.0, 1.0))


def horizontal_flip(img: ImageTensor) -> ImageTensor:
    """Mirror the image left-right; channels untouched."""
    return ImageTensor(img.data[:, ::-1, :])


def _sample_rect(h: int, w: int, cfg: AugmentConfig, rng: np.random.Generator):
    """Rejection-sample an in-bounds rectangle; None after MAX_RECT_ATTEMPTS."""
    lo, hi = cfg.erase_area_range
    alo, ahi = cfg.erase_aspect_range
    for _ in range(MAX_RECT_ATTEMPTS):
        area = rng.uniform(lo, hi) * h * w
        aspect = rng.uniform(alo, ahi)  # aspect = height / width
        rect_h = int(round(np.sqrt(area * aspect)))
        rect_w = int(round(np.sqrt(area / aspect)))
        if 1 <= rect_h <= h and 1 <= rect_w <= w:
            top = int(rng.integers(0, h - rect_h, endpoint=True))
            left = int(rng.integers(0, w - rect_w, endpoint=True))
            return top, left, rect_h, rect_w
    return None


def random_erasing(img: ImageTensor, cfg: AugmentConfig, rng: np.random.Generator) -> ImageTensor:
    """Overwrite one sampled rectangle with i.i.d. uniform [0, 1) noise."""
    if rng.random() >= cfg.erase_prob:
        return img
    rect = _sample_rect(img.height, img.width, cfg, rng)
    if rect is None:
        return img
    top, left, h, w = rect
    out = img.data.copy()
    out[top : top + h, left : left + w] = rng.random((h, w, 3))
    return ImageTensor(out)


def cutout(img: ImageTensor, cfg: AugmentConfig, rng: np.random.Generator) -> ImageTensor:
    """Zero out one sampled rectangle."""
    if rng.random() >= cfg.erase_prob:
        return img
    rect = _sample_rect(img.height, img.width, cfg, rng)
    if rect is None:
        return img
    top, left, h, w = rect
    out = img.data.copy()
    out[top : top + h, left : left + w] = 0.0
    return ImageTensor(out)


def random_patch(
    img: ImageTensor,
    patch_source: ImageTensor,
    cfg: AugmentConfig,
    rng: np.random.Generator,
) -> ImageTensor:
    """Paste a same-size crop of patch_source over one sampled rectangle.

    The crop is pasted verbatim (no photometric change). Raises if the
    source cannot contain the sampled rectangle.
    """
    if rng.random() >= cfg.erase_prob:
        return img
    rect = _sample_rect(img.height, img.width, cfg, rng)
    if rect is None:
        return img
    top, left, h, w = rect
    if patch_source.height < h or patch_source.width < w:
        raise ValueError(
            f"patch source {patch_source.height}x{patch_source.width} cannot fit a {h}x{w} rectangle"
        )
    src_top = int(rng.integers(0, patch_source.height - h, endpoint=True))
    src_left = int(rng.integers(0, patch_source.width - w, endpoint=True))
    out = img.data.copy()
    out[top : top + h, left : left + w] = patch_source.data[
        src_top : src_top + h, src_left : src_left + w
    ]
    return ImageTensor(out)
