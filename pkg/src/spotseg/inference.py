"""Solvers for the binary Potts energy: exact graph cut, approximate min-sum
loopy belief propagation, and an exhaustive oracle for tiny instances.

All ties in label decisions resolve to background (label 0) so outputs are
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .accel import USING_NUMBA, njit
from .maxflow import build_flow_network, min_cut_mask
from .mrf import EnergyModel, total_energy

BRUTE_FORCE_LIMIT = 20


@dataclass(frozen=True)
class LbpConfig:
    """Synchronous min-sum schedule parameters."""

    damping: float = 0.5
    tolerance: float = 1e-3
    max_iterations: int = 100

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise ValueError(f"damping must be in [0, 1), got {self.damping}")
        if self.tolerance < 0.0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


def solve_graphcut(model: EnergyModel) -> tuple[np.ndarray, dict]:
    """Globally minimize the energy via max-flow/min-cut.

    Returns the optimal mask and a diagnostics dict (flow value, energy,
    push-relabel counters).
    """
    network = build_flow_network(model)
    mask, flow, counters = min_cut_mask(network)
    info = {
        "algorithm": "graphcut",
        "flow": flow,
        "energy": total_energy(model, mask),
    }
    info.update(counters)
    return mask, info


# ---------------------------------------------------------------------------
# Loopy belief propagation
#
# msg[d, y, x, k] is the message INTO pixel (y, x) for label k, sent by its
# neighbor in direction d: 0 = from above, 1 = from below, 2 = from the left,
# 3 = from the right.  Messages at image borders with no sender stay zero.

_OPPOSITE = (1, 0, 3, 2)


@njit(cache=True)
def _lbp_sweep_kernel(cost0, cost1, lam, damping, msg, new_msg, t0, t1):
    h, w = cost0.shape
    for y in range(h):
        for x in range(w):
            t0[y, x] = cost0[y, x] + (((msg[0, y, x, 0] + msg[1, y, x, 0]) + msg[2, y, x, 0]) + msg[3, y, x, 0])
            t1[y, x] = cost1[y, x] + (((msg[0, y, x, 1] + msg[1, y, x, 1]) + msg[2, y, x, 1]) + msg[3, y, x, 1])
    max_delta = 0.0
    for y in range(h):
        for x in range(w):
            for d in range(4):
                if d == 0:
                    if y == 0:
                        continue
                    py, px, opp = y - 1, x, 1
                elif d == 1:
                    if y == h - 1:
                        continue
                    py, px, opp = y + 1, x, 0
                elif d == 2:
                    if x == 0:
                        continue
                    py, px, opp = y, x - 1, 3
                else:
                    if x == w - 1:
                        continue
                    py, px, opp = y, x + 1, 2

                a = t0[py, px] - msg[opp, py, px, 0]
                b = t1[py, px] - msg[opp, py, px, 1]
                raw0 = a if a < b + lam else b + lam
                raw1 = b if b < a + lam else a + lam
                base = raw0 if raw0 < raw1 else raw1
                n0 = raw0 - base
                n1 = raw1 - base

                old0 = msg[d, y, x, 0]
                old1 = msg[d, y, x, 1]
                v0 = (1.0 - damping) * n0 + damping * old0
                v1 = (1.0 - damping) * n1 + damping * old1
                lo = v0 if v0 < v1 else v1
                v0 -= lo
                v1 -= lo

                d0 = abs(v0 - old0)
                d1 = abs(v1 - old1)
                if d0 > max_delta:
                    max_delta = d0
                if d1 > max_delta:
                    max_delta = d1
                new_msg[d, y, x, 0] = v0
                new_msg[d, y, x, 1] = v1
    return max_delta


_RECV_SLICES = (
    (slice(1, None), slice(None)),
    (slice(None, -1), slice(None)),
    (slice(None), slice(1, None)),
    (slice(None), slice(None, -1)),
)
_SEND_SLICES = (
    (slice(None, -1), slice(None)),
    (slice(1, None), slice(None)),
    (slice(None), slice(None, -1)),
    (slice(None), slice(1, None)),
)


def _lbp_sweep_numpy(cost0, cost1, lam, damping, msg, new_msg):
    t0 = cost0 + (((msg[0, :, :, 0] + msg[1, :, :, 0]) + msg[2, :, :, 0]) + msg[3, :, :, 0])
    t1 = cost1 + (((msg[0, :, :, 1] + msg[1, :, :, 1]) + msg[2, :, :, 1]) + msg[3, :, :, 1])
    max_delta = 0.0
    for d in range(4):
        opp = _OPPOSITE[d]
        rs = _RECV_SLICES[d]
        ss = _SEND_SLICES[d]
        a = t0[ss] - msg[opp][ss + (0,)]
        b = t1[ss] - msg[opp][ss + (1,)]
        raw0 = np.minimum(a, b + lam)
        raw1 = np.minimum(b, a + lam)
        base = np.minimum(raw0, raw1)
        n0 = raw0 - base
        n1 = raw1 - base
        old0 = msg[d][rs + (0,)]
        old1 = msg[d][rs + (1,)]
        v0 = (1.0 - damping) * n0 + damping * old0
        v1 = (1.0 - damping) * n1 + damping * old1
        lo = np.minimum(v0, v1)
        v0 = v0 - lo
        v1 = v1 - lo
        new_msg[d][rs + (0,)] = v0
        new_msg[d][rs + (1,)] = v1
        delta = max(
            float(np.max(np.abs(v0 - old0), initial=0.0)),
            float(np.max(np.abs(v1 - old1), initial=0.0)),
        )
        if delta > max_delta:
            max_delta = delta
    return max_delta


def solve_lbp(model: EnergyModel, config: LbpConfig | None = None) -> tuple[np.ndarray, dict]:
    """Approximately minimize the energy by synchronous min-sum message passing.

    Messages are normalized to a zero min component, mixed with the previous
    iterate by the damping factor, and iterated until the largest message
    change drops to the tolerance or the iteration cap is hit.  Each pixel
    then takes the label with the smaller belief.  Non-convergence is
    reported in the diagnostics, not raised.
    """
    cfg = config or LbpConfig()
    h, w = model.height, model.width
    cost0 = np.ascontiguousarray(model.cost_label0)
    cost1 = np.ascontiguousarray(model.cost_label1)
    lam = float(model.potts_weight)

    msg = np.zeros((4, h, w, 2), dtype=np.float64)
    new_msg = np.zeros_like(msg)
    t0 = np.empty((h, w), dtype=np.float64)
    t1 = np.empty((h, w), dtype=np.float64)

    iterations = 0
    converged = False
    delta = 0.0
    for _ in range(cfg.max_iterations):
        if USING_NUMBA:
            delta = _lbp_sweep_kernel(cost0, cost1, lam, cfg.damping, msg, new_msg, t0, t1)
        else:
            delta = _lbp_sweep_numpy(cost0, cost1, lam, cfg.damping, msg, new_msg)
        msg, new_msg = new_msg, msg
        iterations += 1
        if delta <= cfg.tolerance:
            converged = True
            break

    belief0 = cost0 + (((msg[0, :, :, 0] + msg[1, :, :, 0]) + msg[2, :, :, 0]) + msg[3, :, :, 0])
    belief1 = cost1 + (((msg[0, :, :, 1] + msg[1, :, :, 1]) + msg[2, :, :, 1]) + msg[3, :, :, 1])
    mask = (belief1 < belief0).astype(np.uint8)
    info = {
        "algorithm": "lbp",
        "iterations": iterations,
        "converged": converged,
        "final_delta": float(delta),
        "energy": total_energy(model, mask),
    }
    return mask, info


def brute_force(model: EnergyModel) -> np.ndarray:
    """Exhaustively enumerate labelings of a tiny model (at most 20 pixels).

    Returns the global minimizer; among ties, the lexicographically smallest
    labeling in raster order.
    """
    n = model.height * model.width
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"instance too large for enumeration: {n} pixels > {BRUTE_FORCE_LIMIT}")

    c0 = model.cost_label0.ravel()
    c1 = model.cost_label1.ravel()
    base = c0.sum()
    delta = c1 - c0

    w = model.width
    idx = np.arange(n).reshape(model.height, model.width)
    edges_a = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    edges_b = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])

    # enumerate with the first pixel in the most significant bit so numeric
    # order equals lexicographic order of labelings
    shifts = (n - 1 - np.arange(n)).astype(np.int64)

    best_energy = np.inf
    best_code = -1
    chunk = 1 << 16
    for start in range(0, 1 << n, chunk):
        codes = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        bits = ((codes[:, None] >> shifts[None, :]) & 1).astype(np.float64)
        energy = base + bits @ delta
        if model.potts_weight != 0.0 and edges_a.size:
            disagree = (bits[:, edges_a] != bits[:, edges_b]).sum(axis=1)
            energy = energy + model.potts_weight * disagree
        k = int(np.argmin(energy))
        if energy[k] < best_energy:
            best_energy = float(energy[k])
            best_code = int(codes[k])

    bits = (best_code >> shifts) & 1
    return bits.astype(np.uint8).reshape(model.height, model.width)
