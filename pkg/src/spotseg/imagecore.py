"""Image containers, color conversions, and connected-component labeling.

Array conventions used throughout the package:

* RGB image   -- ``(H, W, 3) uint8``
* gray image  -- ``(H, W)   uint8``
* Lab image   -- ``(H, W, 3) float64``, L* in [0, 100]
* HSI image   -- ``(H, W, 3) float64``, H in degrees [0, 360), S and I in [0, 1]
* label mask  -- ``(H, W)   uint8`` with values {0 = background, 1 = spot}

All functions return freshly allocated arrays and never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .accel import USING_NUMBA, njit

# sRGB <-> XYZ (D65 white point)
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])

_GRAY_WEIGHTS = (0.299, 0.587, 0.114)


class ImageError(ValueError):
    """Raised for unreadable or malformed image inputs."""


def _require_rgb(img: np.ndarray, name: str = "image") -> None:
    if not (isinstance(img, np.ndarray) and img.ndim == 3 and img.shape[2] == 3):
        raise ValueError(f"{name} must be an (H, W, 3) array, got shape {getattr(img, 'shape', None)}")
    if img.dtype != np.uint8:
        raise ValueError(f"{name} must be uint8, got {img.dtype}")


def _require_gray(img: np.ndarray, name: str = "image") -> None:
    if not (isinstance(img, np.ndarray) and img.ndim == 2):
        raise ValueError(f"{name} must be an (H, W) array, got shape {getattr(img, 'shape', None)}")
    if img.dtype != np.uint8:
        raise ValueError(f"{name} must be uint8, got {img.dtype}")


def _require_mask(mask: np.ndarray, name: str = "mask") -> None:
    if not (isinstance(mask, np.ndarray) and mask.ndim == 2):
        raise ValueError(f"{name} must be an (H, W) array, got shape {getattr(mask, 'shape', None)}")
    if mask.size and mask.max() > 1:
        raise ValueError(f"{name} must be binary with values in {{0, 1}}")


def load_png(path: str | Path) -> np.ndarray:
    """Decode an 8-bit PNG into an (H, W, 3) uint8 RGB array.

    Grayscale, palette, and RGBA inputs are converted to RGB.  Higher bit
    depths and undecodable files raise ImageError.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise ImageError(f"{path}: unsupported bit depth (mode {im.mode}); expected 8-bit")
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except FileNotFoundError:
        raise
    except ImageError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImageError(f"{path}: cannot decode image ({exc})") from exc
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImageError(f"{path}: decoded to unexpected shape {arr.shape}")
    return arr


def save_png(path: str | Path, img: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 array as PNG."""
    _require_rgb(img)
    Image.fromarray(img, mode="RGB").save(Path(path), format="PNG")


def load_mask_png(path: str | Path) -> np.ndarray:
    """Read a mask PNG (any mode) into a {0, 1} uint8 array; nonzero means spot."""
    rgb = load_png(path)
    return (to_gray(rgb) > 127).astype(np.uint8)


def save_mask_png(path: str | Path, mask: np.ndarray) -> None:
    """Write a {0, 1} mask as a single-channel PNG with values {0, 255}."""
    _require_mask(mask)
    Image.fromarray((mask.astype(np.uint8) * 255), mode="L").save(Path(path), format="PNG")


def to_gray(img: np.ndarray) -> np.ndarray:
    """Luma grayscale: round(0.299 R + 0.587 G + 0.114 B), half away from zero."""
    _require_rgb(img)
    r, g, b = (img[..., i].astype(np.float64) for i in range(3))
    val = _GRAY_WEIGHTS[0] * r + _GRAY_WEIGHTS[1] * g + _GRAY_WEIGHTS[2] * b
    return np.floor(val + 0.5).astype(np.uint8)


def gray_to_rgb(gray: np.ndarray) -> np.ndarray:
    """Replicate a gray plane into the three RGB channels."""
    _require_gray(gray)
    return np.repeat(gray[:, :, None], 3, axis=2)


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c: np.ndarray) -> np.ndarray:
    c = np.clip(c, 0.0, 1.0)
    return np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1.0 / 2.4) - 0.055)


def rgb_to_lab(img: np.ndarray) -> np.ndarray:
    """sRGB (D65) to CIE L*a*b*; returns float64 with L* in [0, 100]."""
    _require_rgb(img)
    rgb = img.astype(np.float64) / 255.0
    lin = _srgb_to_linear(rgb)
    xyz = lin @ _RGB_TO_XYZ.T
    t = xyz / _WHITE_D65
    eps = (6.0 / 29.0) ** 3
    f = np.where(t > eps, np.cbrt(t), t / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * fy - 16.0
    lab[..., 1] = 500.0 * (fx - fy)
    lab[..., 2] = 200.0 * (fy - fz)
    return lab


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """CIE L*a*b* back to sRGB uint8, clamping out-of-gamut values."""
    if lab.ndim != 3 or lab.shape[2] != 3:
        raise ValueError(f"lab image must be (H, W, 3), got {lab.shape}")
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    delta = 6.0 / 29.0
    t = np.where(f > delta, f**3, 3.0 * delta**2 * (f - 4.0 / 29.0))
    xyz = t * _WHITE_D65
    lin = xyz @ _XYZ_TO_RGB.T
    srgb = _linear_to_srgb(lin)
    return np.floor(srgb * 255.0 + 0.5).astype(np.uint8)


def rgb_to_hsi(img: np.ndarray) -> np.ndarray:
    """RGB to hue/saturation/intensity.

    I = (R+G+B)/3 scaled to [0, 1]; S = 1 - min/mean; H from the arccos
    formulation in degrees.  Achromatic pixels get H = 0, S = 0.
    """
    _require_rgb(img)
    r, g, b = (img[..., i].astype(np.float64) for i in range(3))
    total = r + g + b
    i = total / (3.0 * 255.0)

    chromatic = total > 0
    mn = np.minimum(np.minimum(r, g), b)
    s = np.zeros_like(r)
    np.divide(3.0 * mn, total, out=s, where=chromatic)
    s = np.where(chromatic, 1.0 - s, 0.0)
    s = np.clip(s, 0.0, 1.0)

    num = 0.5 * ((r - g) + (r - b))
    den = np.sqrt((r - g) ** 2 + (r - b) * (g - b))
    defined = den > 1e-12
    cosang = np.zeros_like(r)
    np.divide(num, den, out=cosang, where=defined)
    ang = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
    h = np.where(b > g, 360.0 - ang, ang)
    h = np.where(defined & (s > 0.0), h, 0.0)
    h = np.where(h >= 360.0, 0.0, h)

    return np.stack([h, s, i], axis=-1)


def hsi_to_rgb(hsi: np.ndarray) -> np.ndarray:
    """HSI back to RGB uint8 via the standard 120-degree sector formulas."""
    if hsi.ndim != 3 or hsi.shape[2] != 3:
        raise ValueError(f"hsi image must be (H, W, 3), got {hsi.shape}")
    h = np.mod(hsi[..., 0], 360.0)
    s = np.clip(hsi[..., 1], 0.0, 1.0)
    i = np.clip(hsi[..., 2], 0.0, 1.0)

    sector = np.floor_divide(h, 120.0).astype(np.int64)  # 0, 1, 2
    hp = np.radians(h - 120.0 * sector)
    cos_term = np.cos(hp) / np.cos(np.radians(60.0) - hp)

    first = i * (1.0 - s)          # channel at (sector start + 240 degrees)
    second = i * (1.0 + s * cos_term)
    third = 3.0 * i - (first + second)

    r = np.where(sector == 0, second, np.where(sector == 1, first, third))
    g = np.where(sector == 0, third, np.where(sector == 1, second, first))
    b = np.where(sector == 0, first, np.where(sector == 1, third, second))
    rgb = np.stack([r, g, b], axis=-1)
    return np.floor(np.clip(rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


# ---------------------------------------------------------------------------
# Connected components


@dataclass(frozen=True)
class RegionMap:
    """Connected-component decomposition of a binary mask.

    ``labels`` holds a region id per pixel (0 = background, ids 1..region_count
    assigned in raster-scan order of each region's first pixel).  ``sizes[i]``
    is the pixel count of region ``i + 1``.
    """

    labels: np.ndarray
    region_count: int
    sizes: np.ndarray

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@njit(cache=True)
def _ccl_union_find(mask, connectivity):
    h, w = mask.shape
    n = h * w
    parent = np.arange(n, dtype=np.int64)

    def find(parent, x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            nxt = parent[x]
            parent[x] = root
            x = nxt
        return root

    for y in range(h):
        for x in range(w):
            if mask[y, x] == 0:
                continue
            p = y * w + x
            if x > 0 and mask[y, x - 1] != 0:
                ra, rb = find(parent, p), find(parent, p - 1)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
            if y > 0 and mask[y - 1, x] != 0:
                ra, rb = find(parent, p), find(parent, p - w)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
            if connectivity == 8 and y > 0:
                if x > 0 and mask[y - 1, x - 1] != 0:
                    ra, rb = find(parent, p), find(parent, p - w - 1)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
                if x < w - 1 and mask[y - 1, x + 1] != 0:
                    ra, rb = find(parent, p), find(parent, p - w + 1)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)

    labels = np.zeros((h, w), dtype=np.int32)
    region_of_root = np.full(n, -1, dtype=np.int64)
    count = 0
    for y in range(h):
        for x in range(w):
            if mask[y, x] == 0:
                continue
            root = find(parent, y * w + x)
            if region_of_root[root] < 0:
                count += 1
                region_of_root[root] = count
            labels[y, x] = region_of_root[root]

    sizes = np.zeros(count, dtype=np.int64)
    for y in range(h):
        for x in range(w):
            if labels[y, x] > 0:
                sizes[labels[y, x] - 1] += 1
    return labels, count, sizes


def _ccl_numpy(mask: np.ndarray, connectivity: int):
    # Iterative min-label propagation; converges in O(component diameter) sweeps.
    h, w = mask.shape
    fg = mask != 0
    big = np.iinfo(np.int64).max
    labels = np.where(fg, np.arange(h * w, dtype=np.int64).reshape(h, w), big)
    offsets = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if connectivity == 8:
        offsets += [(-1, -1), (-1, 1), (1, -1), (1, 1)]

    while True:
        padded = np.pad(labels, 1, constant_values=big)
        best = labels.copy()
        for dy, dx in offsets:
            np.minimum(best, padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w], out=best)
        best = np.where(fg, best, big)
        if np.array_equal(best, labels):
            break
        labels = best

    out = np.zeros((h, w), dtype=np.int32)
    flat = labels[fg]
    # Each component carries its minimum flat index, i.e. its raster-first
    # pixel, so the sorted roots are already in id order.
    roots = np.unique(flat)
    out[fg] = (np.searchsorted(roots, flat) + 1).astype(np.int32)
    count = len(roots)
    sizes = np.bincount(out[fg], minlength=count + 1)[1:].astype(np.int64) if count else np.zeros(0, dtype=np.int64)
    return out, count, sizes


def connected_components(mask: np.ndarray, connectivity: int = 8) -> RegionMap:
    """Decompose the foreground of a binary mask into connected regions.

    Region ids are assigned in raster order of each region's first pixel,
    which makes the labeling deterministic and independent of the kernel used.
    """
    _require_mask(mask)
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    m = np.ascontiguousarray(mask, dtype=np.uint8)
    if USING_NUMBA:
        labels, count, sizes = _ccl_union_find(m, connectivity)
    else:
        labels, count, sizes = _ccl_numpy(m, connectivity)
    return RegionMap(labels=labels, region_count=int(count), sizes=sizes)
