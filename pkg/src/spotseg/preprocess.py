"""Contrast enhancement and thresholding operators.

Covers the compared single-step methods (global/adaptive threshold, Otsu,
histogram equalization, contrast correction, CLAHE, saturation correction)
and the proposed enhancement chain: CLAHE on the L* channel in Lab space
followed by a saturation boost in HSI space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .accel import USING_NUMBA, njit
from .imagecore import (
    _require_gray,
    _require_rgb,
    hsi_to_rgb,
    lab_to_rgb,
    rgb_to_hsi,
    rgb_to_lab,
)


@dataclass(frozen=True)
class ClaheParams:
    """Tile grid and clip limit for contrast-limited adaptive equalization.

    ``clip_limit`` is a multiple of the uniform histogram height
    (tile_pixels / 256); ``math.inf`` disables clipping.
    """

    tiles_x: int = 8
    tiles_y: int = 8
    clip_limit: float = 2.0

    def __post_init__(self):
        if self.tiles_x < 1 or self.tiles_y < 1:
            raise ValueError("tile counts must be >= 1")
        if not (self.clip_limit >= 1.0):
            raise ValueError(f"clip_limit must be >= 1, got {self.clip_limit}")


@dataclass(frozen=True)
class PreprocessConfig:
    clahe: ClaheParams = field(default_factory=ClaheParams)
    saturation_gain: float = 1.5

    def __post_init__(self):
        if not (0.0 < self.saturation_gain <= 4.0):
            raise ValueError(f"saturation_gain must be in (0, 4], got {self.saturation_gain}")


class OtsuResult(NamedTuple):
    threshold: int
    degenerate: bool


def global_threshold(gray: np.ndarray, t: int) -> np.ndarray:
    """Binary mask with label 1 where value > t (strict)."""
    _require_gray(gray)
    if not 0 <= t <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {t}")
    return (gray > t).astype(np.uint8)


def otsu_threshold(gray: np.ndarray) -> OtsuResult:
    """Threshold maximizing between-class variance over the 256-bin histogram.

    Ties break toward the smallest threshold.  A constant image is degenerate:
    the constant value is returned with the flag set.
    """
    _require_gray(gray)
    hist = np.bincount(gray.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    if np.count_nonzero(hist) < 2:
        return OtsuResult(int(gray.flat[0]), True)

    bins = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)
    s0 = np.cumsum(hist * bins)
    w1 = total - w0
    s1 = s0[-1] - s0
    valid = (w0 > 0) & (w1 > 0)
    mu0 = np.divide(s0, w0, out=np.zeros_like(s0), where=valid)
    mu1 = np.divide(s1, w1, out=np.zeros_like(s1), where=valid)
    var_between = np.where(valid, w0 * w1 * (mu0 - mu1) ** 2, -1.0)
    return OtsuResult(int(np.argmax(var_between)), False)


def _equalize_lut(hist: np.ndarray) -> np.ndarray:
    """Float LUT mapping [0,255] through the anchored CDF of ``hist``.

    The lowest occupied bin maps to 0 and the top of the CDF to 255; a
    single-bin histogram yields the identity map.
    """
    cdf = np.cumsum(hist)
    total = cdf[-1]
    occupied = np.flatnonzero(hist > 0)
    cdf_min = cdf[occupied[0]]
    if total <= cdf_min:
        return np.arange(256, dtype=np.float64)
    scale = 255.0 / (total - cdf_min)
    return np.maximum((cdf - cdf_min) * scale, 0.0)


def histogram_equalize(gray: np.ndarray) -> np.ndarray:
    """Global histogram equalization via CDF remap to [0, 255]."""
    _require_gray(gray)
    hist = np.bincount(gray.ravel(), minlength=256).astype(np.float64)
    lut = np.floor(_equalize_lut(hist) + 0.5).astype(np.uint8)
    return lut[gray]


def contrast_correct(gray: np.ndarray, c: float) -> np.ndarray:
    """Multiply intensities by c in [1, 3] and clamp to 255."""
    _require_gray(gray)
    if not 1.0 <= c <= 3.0:
        raise ValueError(f"contrast factor must be in [1, 3], got {c}")
    val = np.floor(gray.astype(np.float64) * c + 0.5)
    return np.minimum(val, 255.0).astype(np.uint8)


def adaptive_threshold(gray: np.ndarray, window: int, offset: float) -> np.ndarray:
    """Label 1 where value > (local mean over window) - offset.

    The window is an odd square; borders use mirror padding.  Sums are kept
    in integers so the strict comparison has no floating-point ambiguity.
    """
    _require_gray(gray)
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    h, w = gray.shape
    r = window // 2
    padded = np.pad(gray.astype(np.int64), r, mode="symmetric")
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(padded, axis=0), axis=1, out=integral[1:, 1:])
    sums = (
        integral[window : window + h, window : window + w]
        - integral[0:h, window : window + w]
        - integral[window : window + h, 0:w]
        + integral[0:h, 0:w]
    )
    area = window * window
    return (gray.astype(np.int64) * area > sums - offset * area).astype(np.uint8)


# ---------------------------------------------------------------------------
# CLAHE


def _clip_histogram(hist: np.ndarray, n_pixels: int, clip_limit: float) -> np.ndarray:
    """Clip bins at clip_limit * uniform height, spreading the excess evenly.

    Single-pass: the redistributed excess may push bins back above the clip;
    no re-clipping happens.  The excess sum is accumulated sequentially so the
    result is bit-identical to a scalar implementation.
    """
    out = hist.astype(np.float64)
    if not math.isfinite(clip_limit):
        return out
    ceiling = clip_limit * n_pixels / 256.0
    excess = 0.0
    for v in out:
        if v > ceiling:
            excess += v - ceiling
    if excess > 0.0:
        out = np.minimum(out, ceiling) + excess / 256.0
    return out


def _tile_lut(hist: np.ndarray, n_pixels: int, clip_limit: float) -> np.ndarray:
    if np.count_nonzero(hist) <= 1:
        # No contrast information in the tile; map values to themselves.
        return np.arange(256, dtype=np.float64)
    return _equalize_lut(_clip_histogram(hist, n_pixels, clip_limit))


def _axis_centers(extent: int, tiles: int) -> np.ndarray:
    edges = np.array([(k * extent) // tiles for k in range(tiles + 1)], dtype=np.int64)
    return (edges[:-1] + edges[1:] - 1) / 2.0


def _axis_weights(extent: int, centers: np.ndarray):
    """Per-coordinate interpolation (lower tile index, upper tile index, weight)."""
    coords = np.arange(extent, dtype=np.float64)
    lo = np.searchsorted(centers, coords, side="right") - 1
    lo = np.clip(lo, 0, len(centers) - 1)
    hi = np.minimum(lo + 1, len(centers) - 1)
    w = np.zeros(extent, dtype=np.float64)
    interior = (coords > centers[0]) & (coords < centers[-1]) & (hi > lo)
    span = centers[hi] - centers[lo]
    np.divide(coords - centers[lo], span, out=w, where=interior)
    below = coords <= centers[0]
    lo[below] = 0
    hi[below] = 0
    w[below] = 0.0
    above = coords >= centers[-1]
    lo[above] = len(centers) - 1
    hi[above] = len(centers) - 1
    w[above] = 0.0
    return lo.astype(np.int64), hi.astype(np.int64), w


@njit(cache=True)
def _clahe_render_kernel(gray, luts, iy0, iy1, wy, ix0, ix1, wx, out):
    h, w = gray.shape
    for y in range(h):
        a = iy0[y]
        b = iy1[y]
        fy = wy[y]
        for x in range(w):
            v = gray[y, x]
            l00 = luts[a, ix0[x], v]
            l01 = luts[a, ix1[x], v]
            l10 = luts[b, ix0[x], v]
            l11 = luts[b, ix1[x], v]
            top = l00 + wx[x] * (l01 - l00)
            bot = l10 + wx[x] * (l11 - l10)
            val = top + fy * (bot - top)
            val = math.floor(val + 0.5)
            if val < 0.0:
                val = 0.0
            elif val > 255.0:
                val = 255.0
            out[y, x] = np.uint8(val)


def _clahe_render_numpy(gray, luts, iy0, iy1, wy, ix0, ix1, wx):
    l00 = luts[iy0[:, None], ix0[None, :], gray]
    l01 = luts[iy0[:, None], ix1[None, :], gray]
    l10 = luts[iy1[:, None], ix0[None, :], gray]
    l11 = luts[iy1[:, None], ix1[None, :], gray]
    top = l00 + wx[None, :] * (l01 - l00)
    bot = l10 + wx[None, :] * (l11 - l10)
    val = top + wy[:, None] * (bot - top)
    return np.clip(np.floor(val + 0.5), 0.0, 255.0).astype(np.uint8)


def clahe(gray: np.ndarray, params: ClaheParams) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization.

    Per-tile clipped-histogram equalization maps, blended per pixel by
    bilinear interpolation between the four nearest tile centers.  With a
    1x1 grid and infinite clip limit this equals histogram_equalize exactly.
    """
    _require_gray(gray)
    h, w = gray.shape
    if params.tiles_y > h or params.tiles_x > w:
        raise ValueError(
            f"tile grid {params.tiles_y}x{params.tiles_x} larger than image {h}x{w}"
        )

    ys = [(k * h) // params.tiles_y for k in range(params.tiles_y + 1)]
    xs = [(k * w) // params.tiles_x for k in range(params.tiles_x + 1)]
    luts = np.empty((params.tiles_y, params.tiles_x, 256), dtype=np.float64)
    for i in range(params.tiles_y):
        for j in range(params.tiles_x):
            tile = gray[ys[i] : ys[i + 1], xs[j] : xs[j + 1]]
            hist = np.bincount(tile.ravel(), minlength=256)
            luts[i, j] = _tile_lut(hist, tile.size, params.clip_limit)

    iy0, iy1, wy = _axis_weights(h, _axis_centers(h, params.tiles_y))
    ix0, ix1, wx = _axis_weights(w, _axis_centers(w, params.tiles_x))

    if USING_NUMBA:
        out = np.empty((h, w), dtype=np.uint8)
        _clahe_render_kernel(gray, luts, iy0, iy1, wy, ix0, ix1, wx, out)
        return out
    return _clahe_render_numpy(gray, luts, iy0, iy1, wy, ix0, ix1, wx)


def saturation_correct(img: np.ndarray, gain: float) -> np.ndarray:
    """Scale HSI saturation by ``gain`` (clamped at 1) and convert back."""
    _require_rgb(img)
    if not (0.0 < gain <= 4.0):
        raise ValueError(f"gain must be in (0, 4], got {gain}")
    hsi = rgb_to_hsi(img)
    hsi[..., 1] = np.minimum(hsi[..., 1] * gain, 1.0)
    return hsi_to_rgb(hsi)


def preprocess_pipeline(img: np.ndarray, cfg: PreprocessConfig | None = None) -> np.ndarray:
    """Proposed enhancement chain.

    CLAHE runs on the L* channel (rescaled to [0, 255] for the integer
    histogram), the image returns to RGB, and a saturation boost in HSI
    space brightens chromatic detail relative to glare.
    """
    _require_rgb(img)
    cfg = cfg or PreprocessConfig()
    lab = rgb_to_lab(img)
    l8 = np.floor(lab[..., 0] * (255.0 / 100.0) + 0.5).astype(np.uint8)
    lab[..., 0] = clahe(l8, cfg.clahe) * (100.0 / 255.0)
    balanced = lab_to_rgb(lab)
    return saturation_correct(balanced, cfg.saturation_gain)
