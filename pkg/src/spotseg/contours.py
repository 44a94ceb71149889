"""Morphological region contours for mask refinement.

The evolution minimizes an internal-plus-image energy with three moves per
iteration: a two-phase data step (boundary pixels join the region whose mean
intensity is closer), a balloon step whose strength is the contraction bias
(negative grows the region, positive shrinks it), and a curvature-smoothing
majority filter.  Seeds come from a prior segmentation; growing a seed
outward corrects under-segmentation while seeds without image support shrink
away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imagecore import _require_gray, _require_mask, connected_components


@dataclass(frozen=True)
class SnakeConfig:
    contraction_bias: float = -0.4
    max_iterations: int = 100
    smoothing_passes: int = 1

    def __post_init__(self):
        if not -1.0 <= self.contraction_bias <= 1.0:
            raise ValueError(f"contraction_bias must be in [-1, 1], got {self.contraction_bias}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.smoothing_passes < 0:
            raise ValueError("smoothing_passes must be >= 0")


def _box3_sum(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    p = np.pad(mask.astype(np.int32), 1, constant_values=0)
    out = np.zeros((h, w), dtype=np.int32)
    for dy in range(3):
        for dx in range(3):
            out += p[dy : dy + h, dx : dx + w]
    return out


def _dilate(mask: np.ndarray) -> np.ndarray:
    return (_box3_sum(mask) > mask.astype(np.int32) * 0 + 0).astype(np.uint8) if False else (_box3_sum(mask) > 0).astype(np.uint8)


def _erode(mask: np.ndarray) -> np.ndarray:
    return (_box3_sum(mask) == 9).astype(np.uint8)


def _smooth(mask: np.ndarray) -> np.ndarray:
    # 3x3 majority vote: curvature smoothing that also deletes isolated pixels
    return (_box3_sum(mask) >= 5).astype(np.uint8)


def _data_step(gray: np.ndarray, mask: np.ndarray, sum_total: float, n_total: int) -> np.ndarray:
    n_in = int(mask.sum())
    if n_in == 0 or n_in == n_total:
        return mask.copy()
    sum_in = float(gray[mask == 1].sum())
    c_in = sum_in / n_in
    c_out = (sum_total - sum_in) / (n_total - n_in)

    boundary = (_dilate(mask) == 1) & (_erode(mask) == 0)
    v = gray.astype(np.float64)
    din = (v - c_in) ** 2
    dout = (v - c_out) ** 2
    new = mask.copy()
    new[boundary & (din < dout)] = 1
    new[boundary & (din > dout)] = 0
    return new


def _evolve(gray: np.ndarray, seed: np.ndarray, cfg: SnakeConfig, sum_total: float, n_total: int) -> np.ndarray:
    mask = seed.copy()
    bias = cfg.contraction_bias
    stable = 0
    for k in range(1, cfg.max_iterations + 1):
        prev = mask
        mask = _data_step(gray, mask, sum_total, n_total)
        if bias != 0.0 and math.floor(k * abs(bias)) > math.floor((k - 1) * abs(bias)):
            mask = _dilate(mask) if bias < 0.0 else _erode(mask)
        for _ in range(cfg.smoothing_passes):
            mask = _smooth(mask)
        if np.array_equal(mask, prev):
            stable += 1
            if stable >= 3:
                break
        else:
            stable = 0
    # settle the boundary so a trailing balloon step cannot leak into the output
    return _data_step(gray, mask, sum_total, n_total)


def refine(gray: np.ndarray, seeds: np.ndarray, cfg: SnakeConfig | None = None) -> np.ndarray:
    """Evolve a seed mask against the gray image; returns the refined mask."""
    _require_gray(gray)
    _require_mask(seeds, "seeds")
    if gray.shape != seeds.shape:
        raise ValueError(f"gray {gray.shape} and seeds {seeds.shape} dimensions differ")
    cfg = cfg or SnakeConfig()
    if not seeds.any():
        return np.zeros_like(seeds, dtype=np.uint8)
    return _evolve(gray, seeds.astype(np.uint8), cfg, float(gray.sum()), gray.size)


def refine_per_region(gray: np.ndarray, seeds: np.ndarray, cfg: SnakeConfig | None = None) -> np.ndarray:
    """Refine each connected seed component independently and union the results.

    Components evolve in private windows (grown on demand) so they cannot
    interact; regions that expand into contact simply merge in the union.
    The outside mean each component competes against is computed over the
    whole image, identical to running refine on that component alone.
    """
    _require_gray(gray)
    _require_mask(seeds, "seeds")
    if gray.shape != seeds.shape:
        raise ValueError(f"gray {gray.shape} and seeds {seeds.shape} dimensions differ")
    cfg = cfg or SnakeConfig()
    h, w = gray.shape
    out = np.zeros((h, w), dtype=np.uint8)
    regions = connected_components(seeds, connectivity=8)
    if regions.region_count == 0:
        return out

    sum_total = float(gray.sum())
    n_total = gray.size
    margin = 8

    for rid in range(1, regions.region_count + 1):
        ys, xs = np.nonzero(regions.labels == rid)
        y0, y1 = ys.min(), ys.max() + 1
        x0, x1 = xs.min(), xs.max() + 1
        while True:
            wy0, wy1 = max(0, y0 - margin), min(h, y1 + margin)
            wx0, wx1 = max(0, x0 - margin), min(w, x1 + margin)
            window_seed = np.zeros((wy1 - wy0, wx1 - wx0), dtype=np.uint8)
            window_seed[ys - wy0, xs - wx0] = 1
            refined = _evolve(gray[wy0:wy1, wx0:wx1], window_seed, cfg, sum_total, n_total)
            if _touches_open_border(refined, wy0, wy1, wx0, wx1, h, w):
                margin *= 2
                if margin > max(h, w):
                    # window already spans the image; accept the result
                    break
                continue
            break
        out[wy0:wy1, wx0:wx1] = np.maximum(out[wy0:wy1, wx0:wx1], refined)
    return out


def _touches_open_border(mask, wy0, wy1, wx0, wx1, h, w) -> bool:
    """True if the mask reaches a window edge that is not an image edge."""
    pad = 2
    if wy0 > 0 and mask[:pad, :].any():
        return True
    if wy1 < h and mask[-pad:, :].any():
        return True
    if wx0 > 0 and mask[:, :pad].any():
        return True
    if wx1 < w and mask[:, -pad:].any():
        return True
    return False
