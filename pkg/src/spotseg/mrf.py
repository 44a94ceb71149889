"""Binary-label energy models over the 4-connected pixel grid.

A model holds one cost per pixel for each of the two labels (0 = background,
1 = spot) plus a constant Potts penalty charged on every 4-neighbor pair with
differing labels.  The spot-label cost is ``250 - gray``; gray values above
250 therefore yield negative costs, which is fine because minimizers are
invariant to per-pixel constant shifts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .imagecore import _require_gray, _require_mask, _require_rgb
from .preprocess import otsu_threshold

SPOT_COST_BASE = 250.0

ENERGY_FUNCTIONS = (1, 2, 3)
LEVEL_RULES = ("otsu", "literal")


@dataclass(frozen=True)
class EnergyModel:
    """Per-pixel unary costs for the two labels and the Potts edge weight."""

    cost_label0: np.ndarray
    cost_label1: np.ndarray
    potts_weight: float

    def __post_init__(self):
        if self.cost_label0.shape != self.cost_label1.shape or self.cost_label0.ndim != 2:
            raise ValueError("unary cost planes must share an (H, W) shape")
        if not self.potts_weight >= 0.0:
            raise ValueError(f"potts_weight must be >= 0, got {self.potts_weight}")

    @property
    def height(self) -> int:
        return self.cost_label0.shape[0]

    @property
    def width(self) -> int:
        return self.cost_label0.shape[1]


class QuantizeResult(NamedTuple):
    plane: np.ndarray
    degenerate: bool


def quantize_two_levels(gray: np.ndarray) -> QuantizeResult:
    """Two-level quantization of a gray image.

    Pixels falling in the upper Otsu class become 1, the rest 0.  A constant
    image is degenerate and quantizes to all zeros.
    """
    _require_gray(gray)
    t, degenerate = otsu_threshold(gray)
    if degenerate:
        return QuantizeResult(np.zeros_like(gray, dtype=np.uint8), True)
    return QuantizeResult((gray > t).astype(np.uint8), False)


def color_indicator(img: np.ndarray) -> np.ndarray:
    """Bit plane marking blue-dominant pixels: 1 iff R < B and G < B (strict)."""
    _require_rgb(img)
    r = img[..., 0].astype(np.int16)
    g = img[..., 1].astype(np.int16)
    b = img[..., 2].astype(np.int16)
    return ((r < b) & (g < b)).astype(np.uint8)


def build_energy(
    img: np.ndarray,
    gray: np.ndarray,
    function: int,
    potts_weight: float,
    level_rule: str = "otsu",
) -> EnergyModel:
    """Assemble the unary cost planes for one of the three data terms.

    All three share the spot cost ``250 - gray``.  The background cost is the
    gray value (function 1), optionally gated by the two-level quantization
    plane (function 2) or by the blue-dominance indicator (function 3).
    ``level_rule`` selects how function 2 reads "two levels": ``otsu``
    quantization (default) or the literal ``gray == 255`` plane.
    """
    _require_rgb(img)
    _require_gray(gray)
    if img.shape[:2] != gray.shape:
        raise ValueError(f"image {img.shape[:2]} and gray {gray.shape} dimensions differ")
    if function not in ENERGY_FUNCTIONS:
        raise ValueError(f"energy function must be one of {ENERGY_FUNCTIONS}, got {function}")
    if level_rule not in LEVEL_RULES:
        raise ValueError(f"level_rule must be one of {LEVEL_RULES}, got {level_rule}")

    g = gray.astype(np.float64)
    cost1 = SPOT_COST_BASE - g
    if function == 1:
        cost0 = g.copy()
    elif function == 2:
        if level_rule == "literal":
            plane = (gray == 255).astype(np.uint8)
        else:
            plane = quantize_two_levels(gray).plane
        cost0 = g * plane
    else:
        cost0 = g * color_indicator(img)
    return EnergyModel(cost_label0=cost0, cost_label1=cost1, potts_weight=float(potts_weight))


def total_energy(model: EnergyModel, mask: np.ndarray) -> float:
    """Sum of chosen unary costs plus the Potts penalty on disagreeing edges."""
    _require_mask(mask)
    if mask.shape != model.cost_label0.shape:
        raise ValueError(f"mask {mask.shape} does not match model {model.cost_label0.shape}")
    unary = np.where(mask == 1, model.cost_label1, model.cost_label0).sum()
    disagree = np.count_nonzero(mask[:, 1:] != mask[:, :-1]) + np.count_nonzero(
        mask[1:, :] != mask[:-1, :]
    )
    return float(unary + model.potts_weight * disagree)
