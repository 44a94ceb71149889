"""Min-cut reduction of the binary Potts model and a FIFO push-relabel solver.

Every pixel becomes a node with a source arc carrying the (shifted)
background-label cost and a sink arc carrying the (shifted) spot-label cost;
4-neighbor pairs get a pair of opposing arcs with the Potts weight.  Shifting
adds ``max(0, -min(cost0, cost1))`` to both terminal arcs of a pixel so all
capacities are nonnegative without moving the argmin.

The solver is the FIFO active-queue variant with the gap heuristic and a
global relabeling pass every |V| discharges.  Arcs live in CSR arrays so the
kernel JIT-compiles; with numba disabled the same code runs interpreted
(slow, see benchmarks).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .accel import njit
from .mrf import EnergyModel


@dataclass(frozen=True)
class FlowNetwork:
    """CSR arc arrays for the s-t network of one energy model.

    ``offs[v]:offs[v+1]`` indexes the arcs leaving node ``v``; ``rev[a]`` is
    the index of the reverse arc of ``a``.  Nodes 0..N-1 are pixels in raster
    order, then source, then sink.
    """

    offs: np.ndarray
    to: np.ndarray
    rev: np.ndarray
    cap: np.ndarray
    height_px: int
    width_px: int

    @property
    def n_nodes(self) -> int:
        return self.height_px * self.width_px + 2

    @property
    def source(self) -> int:
        return self.height_px * self.width_px

    @property
    def sink(self) -> int:
        return self.height_px * self.width_px + 1


@njit(cache=True)
def _build_grid_arcs(h, w, cap_bg, cap_spot, lam):
    n_px = h * w
    s = n_px
    t = n_px + 1
    n_nodes = n_px + 2

    offs = np.zeros(n_nodes + 1, dtype=np.int64)
    for y in range(h):
        for x in range(w):
            deg = 2
            if y > 0:
                deg += 1
            if y < h - 1:
                deg += 1
            if x > 0:
                deg += 1
            if x < w - 1:
                deg += 1
            offs[y * w + x + 1] = deg
    offs[s + 1] = n_px
    offs[t + 1] = n_px
    for v in range(n_nodes):
        offs[v + 1] += offs[v]

    m = offs[n_nodes]
    to = np.empty(m, dtype=np.int64)
    rev = np.empty(m, dtype=np.int64)
    cap = np.zeros(m, dtype=np.float64)

    for y in range(h):
        for x in range(w):
            p = y * w + x
            base = offs[p]
            to[base] = s
            rev[base] = offs[s] + p
            cap[base] = 0.0
            to[base + 1] = t
            rev[base + 1] = offs[t] + p
            cap[base + 1] = cap_spot[p]
            k = base + 2
            # neighbor arcs in up/down/left/right order; the reverse arc
            # position is the opposite direction's slot at the neighbor
            if y > 0:
                q = p - w
                to[k] = q
                rev[k] = offs[q] + 2 + (1 if y - 1 > 0 else 0)
                cap[k] = lam
                k += 1
            if y < h - 1:
                q = p + w
                to[k] = q
                rev[k] = offs[q] + 2
                cap[k] = lam
                k += 1
            if x > 0:
                q = p - 1
                to[k] = q
                pos = 0
                if y > 0:
                    pos += 1
                if y < h - 1:
                    pos += 1
                if x - 1 > 0:
                    pos += 1
                rev[k] = offs[q] + 2 + pos
                cap[k] = lam
                k += 1
            if x < w - 1:
                q = p + 1
                pos = 0
                if y > 0:
                    pos += 1
                if y < h - 1:
                    pos += 1
                to[k] = q
                rev[k] = offs[q] + 2 + pos
                cap[k] = lam

    for p in range(n_px):
        a = offs[s] + p
        to[a] = p
        rev[a] = offs[p]
        cap[a] = cap_bg[p]
        b = offs[t] + p
        to[b] = p
        rev[b] = offs[p] + 1
        cap[b] = 0.0

    return offs, to, rev, cap


@njit(cache=True)
def _global_relabel(offs, to, rev, cap, n, s, t, height, cur, cnt, bfsq):
    unreached = 2 * n
    for v in range(n):
        height[v] = unreached

    # exact distances to the sink through the residual graph
    height[t] = 0
    head = 0
    tail = 0
    bfsq[tail] = t
    tail += 1
    while head < tail:
        u = bfsq[head]
        head += 1
        d = height[u] + 1
        for a in range(offs[u], offs[u + 1]):
            v = to[a]
            if v != s and height[v] == unreached and cap[rev[a]] > 0.0:
                height[v] = d
                bfsq[tail] = v
                tail += 1

    # nodes cut off from the sink route excess back toward the source
    height[s] = n
    head = 0
    tail = 0
    bfsq[tail] = s
    tail += 1
    while head < tail:
        u = bfsq[head]
        head += 1
        d = height[u] + 1
        for a in range(offs[u], offs[u + 1]):
            v = to[a]
            if height[v] == unreached and cap[rev[a]] > 0.0:
                height[v] = d
                bfsq[tail] = v
                tail += 1

    for i in range(len(cnt)):
        cnt[i] = 0
    for v in range(n):
        cnt[height[v]] += 1
        cur[v] = offs[v]


@njit(cache=True)
def _max_flow_fifo(offs, to, rev, cap, n, s, t):
    height = np.zeros(n, dtype=np.int64)
    excess = np.zeros(n, dtype=np.float64)
    cur = np.empty(n, dtype=np.int64)
    cnt = np.zeros(2 * n + 2, dtype=np.int64)
    bfsq = np.empty(n, dtype=np.int64)
    qcap = n + 2
    queue = np.empty(qcap, dtype=np.int64)
    inq = np.zeros(n, dtype=np.uint8)

    discharges = 0
    relabels = 0
    globals_done = 0
    gaps = 0

    _global_relabel(offs, to, rev, cap, n, s, t, height, cur, cnt, bfsq)

    qhead = 0
    qtail = 0
    for a in range(offs[s], offs[s + 1]):
        d = cap[a]
        if d > 0.0:
            v = to[a]
            cap[a] = 0.0
            cap[rev[a]] += d
            excess[v] += d
            if v != t and inq[v] == 0:
                queue[qtail] = v
                qtail = (qtail + 1) % qcap
                inq[v] = 1

    period = n
    since_global = 0

    while qhead != qtail:
        u = queue[qhead]
        qhead = (qhead + 1) % qcap
        inq[u] = 0
        if height[u] >= 2 * n:
            continue

        while excess[u] > 0.0:
            if cur[u] < offs[u + 1]:
                a = cur[u]
                v = to[a]
                if cap[a] > 0.0 and height[u] == height[v] + 1:
                    d = excess[u] if excess[u] < cap[a] else cap[a]
                    cap[a] -= d
                    cap[rev[a]] += d
                    excess[u] -= d
                    excess[v] += d
                    if v != s and v != t and inq[v] == 0 and excess[v] > 0.0:
                        queue[qtail] = v
                        qtail = (qtail + 1) % qcap
                        inq[v] = 1
                else:
                    cur[u] += 1
            else:
                old_h = height[u]
                min_h = 4 * n
                for a in range(offs[u], offs[u + 1]):
                    if cap[a] > 0.0:
                        hv = height[to[a]]
                        if hv < min_h:
                            min_h = hv
                new_h = min_h + 1 if min_h < 4 * n else 2 * n
                if new_h > 2 * n:
                    new_h = 2 * n
                relabels += 1
                cnt[old_h] -= 1
                cnt[new_h] += 1
                height[u] = new_h
                cur[u] = offs[u]
                if old_h < n and cnt[old_h] == 0:
                    # gap: heights strictly between the empty level and n are
                    # unreachable from the sink side
                    gaps += 1
                    for v2 in range(n):
                        if v2 != s and old_h < height[v2] < n:
                            cnt[height[v2]] -= 1
                            height[v2] = n + 1
                            cnt[n + 1] += 1
                if height[u] >= 2 * n:
                    break

        discharges += 1
        since_global += 1
        if since_global >= period and qhead != qtail:
            since_global = 0
            globals_done += 1
            _global_relabel(offs, to, rev, cap, n, s, t, height, cur, cnt, bfsq)
            qhead = 0
            qtail = 0
            for v in range(n):
                inq[v] = 0
            for v in range(n):
                if v != s and v != t and excess[v] > 0.0 and height[v] < 2 * n:
                    queue[qtail] = v
                    qtail += 1
                    inq[v] = 1

    flow = excess[t]
    stats = np.empty(4, dtype=np.int64)
    stats[0] = discharges
    stats[1] = relabels
    stats[2] = globals_done
    stats[3] = gaps
    return flow, stats


@njit(cache=True)
def _source_side(offs, to, cap, n, s):
    reach = np.zeros(n, dtype=np.uint8)
    queue = np.empty(n, dtype=np.int64)
    reach[s] = 1
    queue[0] = s
    head = 0
    tail = 1
    while head < tail:
        u = queue[head]
        head += 1
        for a in range(offs[u], offs[u + 1]):
            if cap[a] > 0.0:
                v = to[a]
                if reach[v] == 0:
                    reach[v] = 1
                    queue[tail] = v
                    tail += 1
    return reach


def build_flow_network(model: EnergyModel) -> FlowNetwork:
    """Reduce an energy model to a flow network with nonnegative capacities."""
    shift = np.maximum(0.0, -np.minimum(model.cost_label0, model.cost_label1))
    cap_bg = np.ascontiguousarray((model.cost_label0 + shift).ravel())
    cap_spot = np.ascontiguousarray((model.cost_label1 + shift).ravel())
    offs, to, rev, cap = _build_grid_arcs(
        model.height, model.width, cap_bg, cap_spot, float(model.potts_weight)
    )
    return FlowNetwork(offs=offs, to=to, rev=rev, cap=cap, height_px=model.height, width_px=model.width)


def min_cut_mask(network: FlowNetwork) -> tuple[np.ndarray, float, dict]:
    """Run max-flow and return (mask, flow value, solver counters).

    Pixels on the source side of the residual graph take label 1.
    """
    cap = network.cap.copy()
    flow, stats = _max_flow_fifo(
        network.offs, network.to, network.rev, cap, network.n_nodes, network.source, network.sink
    )
    reach = _source_side(network.offs, network.to, cap, network.n_nodes, network.source)
    n_px = network.height_px * network.width_px
    mask = reach[:n_px].reshape(network.height_px, network.width_px).astype(np.uint8)
    counters = {
        "discharges": int(stats[0]),
        "relabels": int(stats[1]),
        "global_relabels": int(stats[2]),
        "gap_events": int(stats[3]),
    }
    return mask, float(flow), counters
