"""Circuit-level Monte Carlo of the distance-d surface-GKP code.

Only quadrature shift vectors are tracked.  One error-correction cycle is a
GKP round (two steps of SUM / inverse-SUM couplings to fresh GKP ancillas,
homodyne readout and shift correction) followed by a surface round (four
time steps of couplings to Z- and X-type syndrome modes and readout).  After
``noisy_rounds`` cycles one noiseless cycle is run, syndromes are matched on
a space-time graph and the residual data shifts determine the logical error.

Data qubits are numbered k = i*d + j + 1 on a d x d grid (row i, column j).
Plaquette (r, c) has corners TL=(r,c), TR=(r,c+1), BL=(r+1,c), BR=(r+1,c+1)
and is X-type when r + c is even.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import SQRT_PI, __version__
from .matching import WeightedGraph, decode_with_boundary
from .noise import (
    DomainError,
    NoiseParams,
    log_conditional_pauli_prob,
    p_err,
    remainder,
    symmetric_sqrt,
    trial_rng,
)

LN2 = math.log(2.0)
# finite stand-in for -log2(0) when an edge carries no noise at all
WEIGHT_CAP = 500.0

# unit gate-noise covariances in (control, target) order for q_t += s q_c, p_c -= s p_t
_ROOT_Q = {s: symmetric_sqrt([[1.0, s / 2], [s / 2, 4.0 / 3]]) for s in (1, -1)}
_ROOT_P = {s: symmetric_sqrt([[4.0 / 3, -s / 2], [-s / 2, 1.0]]) for s in (1, -1)}

CORNER_ORDER_Z = ("TR", "BR", "TL", "BL")
CORNER_ORDER_X = ("TR", "TL", "BR", "BL")
# SUM (+1) on the TR and BL corners, inverse-SUM (-1) on TL and BR
X_STEP_SIGNS = (1, -1, -1, 1)


# --------------------------------------------------------------- config


@dataclass(frozen=True)
class SurfaceGkpConfig:
    d: int
    noise: NoiseParams = NoiseParams()
    use_analog_info: bool = True
    rounds: int | None = None
    master_seed: int = 0

    def __post_init__(self):
        if self.d < 3 or self.d % 2 == 0:
            raise DomainError("distance must be an odd integer >= 3")
        if self.rounds is not None and self.rounds < 1:
            raise DomainError("need at least one noisy round")

    @property
    def noisy_rounds(self) -> int:
        return self.d if self.rounds is None else self.rounds


# --------------------------------------------------------------- layout


@dataclass(frozen=True)
class Layout:
    d: int
    z_plaquettes: tuple
    x_plaquettes: tuple
    z_steps: np.ndarray  # (4, nz) data index coupled at each time step, 0 = idle
    x_steps: np.ndarray  # (4, nx)
    x_signs: tuple = X_STEP_SIGNS

    @property
    def n(self) -> int:
        return self.d * self.d

    @property
    def nz(self) -> int:
        return len(self.z_plaquettes)

    def support(self, typ: str) -> list:
        steps = self.z_steps if typ == "Z" else self.x_steps
        return [sorted(int(k) for k in steps[:, l] if k) for l in range(steps.shape[1])]


@lru_cache(maxsize=None)
def layout(d: int) -> Layout:
    """Syndrome-to-data connectivity of the rotated surface code."""
    if d < 3 or d % 2 == 0:
        raise DomainError("distance must be an odd integer >= 3")

    def idx(i, j):
        return i * d + j + 1 if 0 <= i < d and 0 <= j < d else 0

    zp, xp = [], []
    for r in range(-1, d):
        for c in range(-1, d):
            bulk = 0 <= r <= d - 2 and 0 <= c <= d - 2
            if (r + c) % 2 == 1:
                if bulk or (c in (-1, d - 1) and 0 <= r <= d - 2):
                    zp.append((r, c))
            elif bulk or (r in (-1, d - 1) and 0 <= c <= d - 2):
                xp.append((r, c))
    xp.sort(key=lambda rc: (rc[1], rc[0]))

    def corners(rc):
        r, c = rc
        return {"TL": idx(r, c), "TR": idx(r, c + 1), "BL": idx(r + 1, c), "BR": idx(r + 1, c + 1)}

    z_steps = np.array([[corners(rc)[pos] for rc in zp] for pos in CORNER_ORDER_Z], dtype=np.int64)
    x_steps = np.array([[corners(rc)[pos] for rc in xp] for pos in CORNER_ORDER_X], dtype=np.int64)
    z_steps.setflags(write=False)
    x_steps.setflags(write=False)
    return Layout(d, tuple(zp), tuple(xp), z_steps, x_steps)


# ------------------------------------------------------ variance tables


def horizontal_variance(d: int, k: int, typ: str, sigma_gkp: float, sigma: float) -> float:
    """Variance of the data-qubit shift seen by GKP round t >= 2 (bulk rounds).

    Coefficients (a, b) give a*sigma_gkp^2 + (b/3)*sigma^2."""
    if typ == "Z":
        if (k - 1) % d == 0:
            a, b = (4, 52) if ((k - 1) // d) % 2 == 0 else (4, 58)
        elif k % d == 0:
            a, b = (4, 55) if (k // d) % 2 == 1 else (4, 49)
        else:
            a, b = (5, 59)
    elif typ == "X":
        if 1 <= k <= d:
            a, b = (4, 49) if k % 2 == 1 else (4, 55)
        elif d * d - d + 1 <= k <= d * d:
            a, b = (4, 58) if k % 2 == 1 else (4, 52)
        else:
            a, b = (5, 59)
    else:
        raise DomainError("type must be 'Z' or 'X'")
    return a * sigma_gkp**2 + b / 3.0 * sigma**2


def vertical_coefficients(d: int, l: int, typ: str) -> tuple:
    """(a, b) of the syndrome readout variance a*sigma_gkp^2 + (b/3)*sigma^2.

    Syndromes form columns of length (d+1)/2, indexed by l mod (d+1).  The
    bulk syndrome next to a boundary column carries 111/3, the value obtained
    by propagating the circuit noise."""
    half = (d + 1) // 2
    r = l % (2 * half)
    if typ == "Z":
        if r == 1:
            return (4, 56)
        if r == half + 1:
            return (7, 111)
        if r == 0:
            return (4, 73)
        return (7, 116)
    if typ == "X":
        if r == half:
            return (4, 56)
        if r == half + 1:
            return (4, 73)
        if r == 0:
            return (7, 111)
        return (7, 116)
    raise DomainError("type must be 'Z' or 'X'")


def vertical_variance(d: int, l: int, typ: str, sigma_gkp: float, sigma: float) -> float:
    a, b = vertical_coefficients(d, l, typ)
    return a * sigma_gkp**2 + b / 3.0 * sigma**2


def first_round_variance(k: int, typ: str, sigma_gkp: float, sigma: float) -> float:
    """Variance seen by the first GKP round (no preceding surface round)."""
    measured_first = (k % 2 == 1) if typ == "Z" else (k % 2 == 0)
    if measured_first:
        return sigma_gkp**2 + 10.0 / 3 * sigma**2
    return 2 * sigma_gkp**2 + 20.0 / 3 * sigma**2


def edge_sigmas(d: int, noise: NoiseParams, typ: str, noisy_rounds: int):
    """Effective standard deviations of horizontal edges (rounds x d^2) and
    vertical edges (syndrome count) of one graph type."""
    n = d * d
    sg, s = noise.sigma_gkp, noise.sigma
    first = np.array([first_round_variance(k, typ, sg, s) for k in range(1, n + 1)])
    bulk = np.array([horizontal_variance(d, k, typ, sg, s) for k in range(1, n + 1)])
    rows = [first] + [bulk] * (noisy_rounds - 1) + [bulk - first]
    var_h = np.array(rows)
    nz = (n - 1) // 2
    var_v = np.array([vertical_variance(d, l, typ, sg, s) for l in range(1, nz + 1)])
    return np.sqrt(np.clip(var_h, 0.0, None)), np.sqrt(np.clip(var_v, 0.0, None))


# ----------------------------------------------------------- noise tape


class _RngTape:
    """Standard normals drawn on demand from a generator."""

    def __init__(self, rng: np.random.Generator, batch: int = 1):
        self.rng = rng
        self.batch = batch

    def normal(self, m: int) -> np.ndarray:
        return self.rng.standard_normal((self.batch, m))


class _ArrayTape:
    """Standard normals read column-wise from a pre-drawn (batch, K) block."""

    def __init__(self, block: np.ndarray):
        self.block = block
        self.batch = block.shape[0]
        self.pos = 0

    def normal(self, m: int) -> np.ndarray:
        out = self.block[:, self.pos : self.pos + m]
        self.pos += m
        return out


class _CountingTape:
    def __init__(self):
        self.batch = 1
        self.pos = 0

    def normal(self, m: int) -> np.ndarray:
        self.pos += m
        return np.zeros((1, m))


def _as_tape(source, batch: int):
    if isinstance(source, (_RngTape, _ArrayTape, _CountingTape)):
        return source
    if isinstance(source, np.random.Generator):
        return _RngTape(source, batch)
    raise TypeError("noise source must be a numpy Generator or a tape")


# ------------------------------------------------------------ the state


@dataclass
class NoiseState:
    """Quadrature shifts of every mode, with a leading batch axis."""

    dq: np.ndarray
    dp: np.ndarray
    aq: np.ndarray
    ap: np.ndarray
    zq: np.ndarray
    zp: np.ndarray
    xq: np.ndarray
    xp: np.ndarray

    @classmethod
    def zeros(cls, d: int, batch: int = 1) -> "NoiseState":
        n, nz = d * d, (d * d - 1) // 2
        return cls(*(np.zeros((batch, m)) for m in (n, n, n, n, nz, nz, nz, nz)))

    @property
    def batch(self) -> int:
        return self.dq.shape[0]

    @property
    def n(self) -> int:
        return self.dq.shape[1]

    def copy(self) -> "NoiseState":
        return NoiseState(*(getattr(self, f).copy() for f in ("dq", "dp", "aq", "ap", "zq", "zp", "xq", "xp")))


def _gate(cq, cp, ci, tq, tp, ti, sign, sigma, tape):
    """q_t += sign*q_c and p_c -= sign*p_t, then correlated gate noise."""
    tq[:, ti] += sign * cq[:, ci]
    cp[:, ci] -= sign * tp[:, ti]
    m = len(ci)
    wq = tape.normal(2 * m).reshape(-1, m, 2) @ (sigma * _ROOT_Q[sign]).T
    wp = tape.normal(2 * m).reshape(-1, m, 2) @ (sigma * _ROOT_P[sign]).T
    cq[:, ci] += wq[..., 0]
    tq[:, ti] += wq[..., 1]
    cp[:, ci] += wp[..., 0]
    tp[:, ti] += wp[..., 1]


def _add_noise(arr, idx, sigma, tape):
    arr[:, idx] += sigma * tape.normal(len(idx))


@dataclass
class GkpStepRecord:
    analog: np.ndarray  # (B, n) R_sqrt(pi) of each ancilla readout
    measured_q: np.ndarray  # (n,) True where q was measured in this step


def gkp_round(state: NoiseState, noise: NoiseParams, rng, step: int) -> GkpStepRecord:
    """One GKP step.  Step 1 measures q on odd k and p on even k; step 2 swaps.

    q is measured through SUM data->ancilla, p through inverse-SUM
    ancilla->data; the data is then shifted back by R_sqrt(pi) of the readout."""
    if step not in (1, 2):
        raise DomainError("step must be 1 or 2")
    tape = _as_tape(rng, state.batch)
    n = state.n
    k = np.arange(1, n + 1)
    mq = (k % 2 == 1) if step == 1 else (k % 2 == 0)
    iq, ip = np.flatnonzero(mq), np.flatnonzero(~mq)
    s, sg = noise.sigma, noise.sigma_gkp
    every = np.arange(n)
    _add_noise(state.dq, every, s, tape)
    _add_noise(state.dp, every, s, tape)
    state.aq = sg * tape.normal(n)
    state.ap = sg * tape.normal(n)
    _gate(state.dq, state.dp, iq, state.aq, state.ap, iq, 1, s, tape)
    _gate(state.aq, state.ap, ip, state.dq, state.dp, ip, -1, s, tape)
    for arr in (state.dq, state.dp, state.aq, state.ap):
        _add_noise(arr, every, s, tape)
    analog = np.empty((state.batch, n))
    rq = remainder(state.aq[:, iq], SQRT_PI)
    rp = remainder(state.ap[:, ip], SQRT_PI)
    state.dq[:, iq] -= rq
    state.dp[:, ip] -= rp
    analog[:, iq] = rq
    analog[:, ip] = rp
    return GkpStepRecord(analog, mq)


@dataclass
class SurfaceRecord:
    z_readout: np.ndarray  # (B, nz) raw q readout of Z-type syndromes
    x_readout: np.ndarray  # (B, nx) raw p readout of X-type syndromes

    @property
    def z_flipped(self) -> np.ndarray:
        return stabilizer_flipped(self.z_readout)

    @property
    def x_flipped(self) -> np.ndarray:
        return stabilizer_flipped(self.x_readout)

    @property
    def z_values(self) -> np.ndarray:
        return np.where(self.z_flipped, -1, 1)

    @property
    def x_values(self) -> np.ndarray:
        return np.where(self.x_flipped, -1, 1)

    @property
    def z_analog(self) -> np.ndarray:
        return remainder(self.z_readout, SQRT_PI)

    @property
    def x_analog(self) -> np.ndarray:
        return remainder(self.x_readout, SQRT_PI)


def stabilizer_flipped(readout) -> np.ndarray:
    """True where the stabilizer value is -1, i.e. |R_{2 sqrt(pi)}(readout)| > sqrt(pi)/2."""
    return np.abs(remainder(np.asarray(readout), 2 * SQRT_PI)) > SQRT_PI / 2


def prepare_surface_round(state: NoiseState, noise: NoiseParams, rng) -> None:
    """Data idle noise and fresh noisy syndrome modes before the four steps."""
    tape = _as_tape(rng, state.batch)
    n, nz = state.n, state.zq.shape[1]
    every = np.arange(n)
    _add_noise(state.dq, every, noise.sigma, tape)
    _add_noise(state.dp, every, noise.sigma, tape)
    sg = noise.sigma_gkp
    state.zq = sg * tape.normal(nz)
    state.zp = sg * tape.normal(nz)
    state.xq = sg * tape.normal(nz)
    state.xp = sg * tape.normal(nz)


def surface_steps(state: NoiseState, noise: NoiseParams, rng, lay: Layout) -> SurfaceRecord:
    """Four coupling steps, homodyne noise and syndrome readout."""
    tape = _as_tape(rng, state.batch)
    s = noise.sigma
    n, nz = state.n, lay.nz
    for t in range(4):
        zcol = lay.z_steps[t]
        zl = np.flatnonzero(zcol)
        _gate(state.dq, state.dp, zcol[zl] - 1, state.zq, state.zp, zl, 1, s, tape)
        zidle = np.flatnonzero(zcol == 0)
        _add_noise(state.zq, zidle, s, tape)
        _add_noise(state.zp, zidle, s, tape)
        xcol = lay.x_steps[t]
        xl = np.flatnonzero(xcol)
        _gate(state.xq, state.xp, xl, state.dq, state.dp, xcol[xl] - 1, lay.x_signs[t], s, tape)
        xidle = np.flatnonzero(xcol == 0)
        _add_noise(state.xq, xidle, s, tape)
        _add_noise(state.xp, xidle, s, tape)
        busy = np.zeros(n, dtype=bool)
        busy[zcol[zl] - 1] = True
        busy[xcol[xl] - 1] = True
        didle = np.flatnonzero(~busy)
        _add_noise(state.dq, didle, s, tape)
        _add_noise(state.dp, didle, s, tape)
    every_d, every_s = np.arange(n), np.arange(nz)
    _add_noise(state.dq, every_d, s, tape)
    _add_noise(state.dp, every_d, s, tape)
    for arr in (state.zq, state.zp, state.xq, state.xp):
        _add_noise(arr, every_s, s, tape)
    return SurfaceRecord(state.zq.copy(), state.xp.copy())


def surface_round(state: NoiseState, noise: NoiseParams, rng, lay: Layout | None = None) -> SurfaceRecord:
    tape = _as_tape(rng, state.batch)
    lay = lay or layout(int(round(math.sqrt(state.n))))
    prepare_surface_round(state, noise, tape)
    return surface_steps(state, noise, tape, lay)


# ----------------------------------------------------- full simulation


@dataclass
class Records:
    """Per-round measurement records with shape (rounds, batch, modes)."""

    gkp_q: np.ndarray
    gkp_p: np.ndarray
    z_readout: np.ndarray
    x_readout: np.ndarray
    final: NoiseState


def simulate(d: int, noise: NoiseParams, noisy_rounds: int, source, batch: int = 1) -> Records:
    """Run ``noisy_rounds`` noisy cycles followed by one noiseless cycle."""
    tape = _as_tape(source, batch)
    lay = layout(d)
    state = NoiseState.zeros(d, tape.batch)
    ideal = NoiseParams(0.0, 0.0)
    gq, gp, zr, xr = [], [], [], []
    for rnd in range(noisy_rounds + 1):
        nz_ = noise if rnd < noisy_rounds else ideal
        hq = np.empty((tape.batch, state.n))
        hp = np.empty((tape.batch, state.n))
        for step in (1, 2):
            rec = gkp_round(state, nz_, tape, step)
            hq[:, rec.measured_q] = rec.analog[:, rec.measured_q]
            hp[:, ~rec.measured_q] = rec.analog[:, ~rec.measured_q]
        srec = surface_round(state, nz_, tape, lay)
        gq.append(hq)
        gp.append(hp)
        zr.append(srec.z_readout)
        xr.append(srec.x_readout)
    return Records(np.array(gq), np.array(gp), np.array(zr), np.array(xr), state)


@lru_cache(maxsize=None)
def normals_per_trial(d: int, noisy_rounds: int) -> int:
    tape = _CountingTape()
    simulate(d, NoiseParams(0.0, 0.0), noisy_rounds, tape)
    return tape.pos


def trial_block(master_seed: int, start: int, stop: int, width: int) -> np.ndarray:
    """Stacked per-trial standard-normal streams for trials [start, stop)."""
    return np.stack([trial_rng(master_seed, i).standard_normal(width) for i in range(start, stop)])


# ------------------------------------------------------- graph building


@dataclass(frozen=True)
class GraphSkeleton:
    """Static structure of one syndrome graph type.

    Columns of ``check`` are edges: first rounds*n horizontal edges
    (round-major, data index minor), then noisy_rounds*nz vertical edges."""

    typ: str
    d: int
    layers: int
    check: sp.csc_matrix
    horizontal: int
    edge_ends: tuple  # per column: (u, v) detector indices, v = -1 for boundary


@lru_cache(maxsize=None)
def graph_skeleton(d: int, typ: str, noisy_rounds: int) -> GraphSkeleton:
    lay = layout(d)
    n, nz = lay.n, lay.nz
    adj = [[] for _ in range(n)]
    for l, ks in enumerate(lay.support(typ)):
        for k in ks:
            adj[k - 1].append(l)
    layers = noisy_rounds + 1
    rows, cols, ends = [], [], []
    c = 0
    for t in range(layers):
        for k in range(n):
            dets = [t * nz + l for l in adj[k]]
            rows += dets
            cols += [c] * len(dets)
            ends.append((dets[0], dets[1] if len(dets) > 1 else -1))
            c += 1
    nh = c
    for t in range(noisy_rounds):
        for l in range(nz):
            rows += [t * nz + l, (t + 1) * nz + l]
            cols += [c, c]
            ends.append((t * nz + l, (t + 1) * nz + l))
            c += 1
    H = sp.csc_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(layers * nz, c))
    return GraphSkeleton(typ, d, layers, H, nh, tuple(ends))


def edge_weights(d: int, noise: NoiseParams, typ: str, noisy_rounds: int, analog: bool,
                 h_records: np.ndarray | None = None, v_records: np.ndarray | None = None) -> np.ndarray:
    """Edge weights -log2 p for one graph type.

    With analog information ``h_records`` (rounds, B, n) holds the GKP
    remainders and ``v_records`` (noisy_rounds, B, nz) the raw syndrome
    readouts; the result has shape (B, edges).  Without it the result is one
    weight vector shared by every trial."""
    sig_h, sig_v = edge_sigmas(d, noise, typ, noisy_rounds)
    sig_all = np.concatenate([sig_h.reshape(-1), np.tile(sig_v, noisy_rounds)])
    live = sig_all > 0
    if not analog:
        w = np.full(sig_all.shape, WEIGHT_CAP)
        cache: dict = {}
        for i in np.flatnonzero(live):
            key = float(sig_all[i])
            if key not in cache:
                pe = p_err(key)
                cache[key] = -math.log2(pe) if pe > 0 else WEIGHT_CAP
            w[i] = cache[key]
        return np.clip(w, 0.0, WEIGHT_CAP)
    B = h_records.shape[1]
    zh = np.moveaxis(h_records, 1, 0).reshape(B, -1)
    zv = remainder(np.moveaxis(v_records[:noisy_rounds], 1, 0).reshape(B, -1), SQRT_PI)
    z = np.concatenate([zh, zv], axis=1)
    w = np.full(z.shape, WEIGHT_CAP)
    if live.any():
        w[:, live] = -log_conditional_pauli_prob(sig_all[live], z[:, live]) / LN2
    return np.clip(w, 0.0, WEIGHT_CAP)


def detection_events(readouts: np.ndarray) -> np.ndarray:
    """(B, layers*nz) flags where a stabilizer value changed from the
    previous round (the value before round 1 is +1)."""
    flips = stabilizer_flipped(readouts)  # (rounds, B, nz)
    prev = np.zeros_like(flips[:1])
    events = flips ^ np.concatenate([prev, flips[:-1]], axis=0)
    return np.moveaxis(events, 1, 0).reshape(flips.shape[1], -1).astype(np.uint8)


@dataclass
class SpaceTimeGraph:
    """Per-trial graph of one type with an explicit boundary vertex per layer.

    Vertices: detectors t*nz + l, then boundary vertices B_t; consecutive
    boundary vertices are joined by zero-weight boundary edges."""

    typ: str
    graph: WeightedGraph
    highlighted: list
    boundary_vertices: list


def build_graph(skel: GraphSkeleton, weights: np.ndarray, events: np.ndarray) -> SpaceTimeGraph:
    nd = skel.check.shape[0]
    nz = nd // skel.layers
    bverts = [nd + t for t in range(skel.layers)]
    edges = []
    for col, (u, v) in enumerate(skel.edge_ends):
        kind = "H" if col < skel.horizontal else "V"
        layer = u // nz
        edges.append((u, v if v >= 0 else bverts[layer], float(weights[col]), (kind, col)))
    for t in range(skel.layers - 1):
        edges.append((bverts[t], bverts[t + 1], 0.0, ("B", t)))
    g = WeightedGraph(nd + skel.layers, edges, boundary=set(bverts))
    hl = [int(i) for i in np.flatnonzero(events)]
    return SpaceTimeGraph(skel.typ, g, hl, bverts)


def reference_flip(stg: SpaceTimeGraph) -> tuple[int, float]:
    """Parity of horizontal edges in the matching correction, and its weight."""
    _, used = decode_with_boundary(stg.graph, stg.highlighted, stg.boundary_vertices[0])
    flips = sum(1 for e in used if stg.graph.edges[e][3][0] == "H")
    weight = float(sum(stg.graph.edges[e][2] for e in used))
    return flips % 2, weight


def _pymatching():
    import pymatching

    return pymatching


def _fault_matrix(skel: GraphSkeleton) -> sp.csc_matrix:
    cols = skel.check.shape[1]
    h = skel.horizontal
    return sp.csc_matrix((np.ones(h, dtype=np.uint8), (np.zeros(h, dtype=np.int64), np.arange(h))), shape=(1, cols))


def fast_flips(skel: GraphSkeleton, weights: np.ndarray, events: np.ndarray) -> np.ndarray:
    """Predicted logical flips for a batch using pymatching."""
    pm = _pymatching()
    F = _fault_matrix(skel)
    if weights.ndim == 1:
        m = pm.Matching.from_check_matrix(skel.check, weights=weights, faults_matrix=F)
        return m.decode_batch(events)[:, 0].astype(np.uint8)
    out = np.zeros(events.shape[0], dtype=np.uint8)
    for b in range(events.shape[0]):
        if not events[b].any():
            continue
        m = pm.Matching.from_check_matrix(skel.check, weights=weights[b], faults_matrix=F)
        out[b] = m.decode(events[b])[0]
    return out


# ------------------------------------------------------------- scoring


LABELS = ("I", "X", "Z", "Y")


def logical_label(x_fail: bool, z_fail: bool) -> str:
    return LABELS[int(x_fail) + 2 * int(z_fail)]


def quadrature_totals(final: NoiseState):
    """Integer totals sum_k D_k / sqrt(pi) of both quadratures."""
    tq = final.dq.sum(axis=1) / SQRT_PI
    tp = final.dp.sum(axis=1) / SQRT_PI
    rq, rp = np.round(tq), np.round(tp)
    if np.max(np.abs(tq - rq), initial=0) > 1e-6 or np.max(np.abs(tp - rp), initial=0) > 1e-6:
        raise AssertionError("data shifts are not lattice multiples; the final round must be noiseless")
    return rq.astype(np.int64), rp.astype(np.int64)


@dataclass
class TrialResult:
    label: str
    syndrome: dict | None = None


@dataclass
class BatchOutcome:
    x_fail: np.ndarray
    z_fail: np.ndarray

    @property
    def labels(self) -> list:
        return [logical_label(a, b) for a, b in zip(self.x_fail, self.z_fail)]


def decode_and_score(config: SurfaceGkpConfig, rec: Records, engine: str = "pymatching") -> BatchOutcome:
    """Match both graph types and decide the logical error of every trial.

    The Z-type graph (q readouts) detects X errors and the X-type graph (p
    readouts) detects Z errors."""
    d, T = config.d, config.noisy_rounds
    tq, tp = quadrature_totals(rec.final)
    fails = {}
    for typ, hrec, vrec, total in (("Z", rec.gkp_q, rec.z_readout, tq), ("X", rec.gkp_p, rec.x_readout, tp)):
        skel = graph_skeleton(d, typ, T)
        events = detection_events(vrec)
        analog = config.use_analog_info
        w = edge_weights(d, config.noise, typ, T, analog, hrec, vrec)
        if engine == "pymatching":
            flips = fast_flips(skel, w, events)
        elif engine == "blossom":
            flips = np.zeros(events.shape[0], dtype=np.uint8)
            for b in range(events.shape[0]):
                wb = w[b] if w.ndim == 2 else w
                flips[b] = reference_flip(build_graph(skel, wb, events[b]))[0]
        else:
            raise DomainError(f"unknown decoder engine '{engine}'")
        fails[typ] = ((total + flips) % 2).astype(bool)
    return BatchOutcome(x_fail=fails["Z"], z_fail=fails["X"])


def run_trial(config: SurfaceGkpConfig, trial_index: int, engine: str = "pymatching",
              keep_syndrome: bool = False) -> TrialResult:
    """Pure per-trial function: the result depends only on (config, trial_index)."""
    rng = trial_rng(config.master_seed, trial_index)
    rec = simulate(config.d, config.noise, config.noisy_rounds, rng, 1)
    out = decode_and_score(config, rec, engine)
    syn = None
    if keep_syndrome:
        syn = {"z_events": detection_events(rec.z_readout)[0], "x_events": detection_events(rec.x_readout)[0]}
    return TrialResult(out.labels[0], syn)


def run_batch(config: SurfaceGkpConfig, start: int, stop: int, engine: str = "pymatching") -> BatchOutcome:
    """Trials [start, stop) evaluated together; identical to run_trial per index."""
    width = normals_per_trial(config.d, config.noisy_rounds)
    block = trial_block(config.master_seed, start, stop, width)
    rec = simulate(config.d, config.noise, config.noisy_rounds, _ArrayTape(block))
    return decode_and_score(config, rec, engine)


# ---------------------------------------------------------- monte carlo


@dataclass
class MonteCarloResult:
    d: int
    sigma: float
    sigma_gkp: float
    analog: bool
    trials: int
    counts: dict
    seconds: float

    def rate(self, key: str) -> float:
        return self.counts[key] / self.trials if self.trials else 0.0

    def stderr(self, key: str) -> float:
        p = self.rate(key)
        return math.sqrt(p * (1 - p) / self.trials) if self.trials else 0.0

    @property
    def p_x(self) -> float:
        return self.rate("X")

    @property
    def p_z(self) -> float:
        return self.rate("Z")

    @property
    def p_y(self) -> float:
        return self.rate("Y")

    def row(self) -> dict:
        return {
            "d": self.d,
            "sigma": self.sigma,
            "sigma_gkp": self.sigma_gkp,
            "analog": int(self.analog),
            "trials": self.trials,
            "p_x": self.p_x,
            "p_x_err": self.stderr("X"),
            "p_z": self.p_z,
            "p_z_err": self.stderr("Z"),
            "p_y": self.p_y,
            "p_y_err": self.stderr("Y"),
            "seconds": self.seconds,
        }


def _count_chunk(args):
    config, start, stop, engine = args
    out = run_batch(config, start, stop, engine)
    # X and Z here count any logical error with that component; Y counts both
    x, z = out.x_fail, out.z_fail
    return {"X": int(np.sum(x & ~z)), "Z": int(np.sum(z & ~x)), "Y": int(np.sum(x & z))}


def worker_count(requested: int | None = None) -> int:
    if requested is None:
        raw = os.environ.get("BQEC_THREADS", "1")
        try:
            requested = int(raw)
        except ValueError as exc:
            raise DomainError(f"BQEC_THREADS must be an integer, got '{raw}'") from exc
    if requested < 0:
        raise DomainError("worker count must be nonnegative")
    return requested or (os.cpu_count() or 1)


def monte_carlo(config: SurfaceGkpConfig, trials: int, batch_size: int = 500,
                engine: str = "pymatching", workers: int | None = None) -> MonteCarloResult:
    """Logical X, Z and Y rates over ``trials`` independent trials.

    A trial with both an X and a Z component counts as Y only."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    t0 = time.perf_counter()
    chunks = [(config, a, min(a + batch_size, trials), engine) for a in range(0, trials, batch_size)]
    nw = min(worker_count(workers), len(chunks))
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            parts = list(pool.map(_count_chunk, chunks))
    else:
        parts = [_count_chunk(c) for c in chunks]
    counts = {k: sum(p[k] for p in parts) for k in ("X", "Z", "Y")}
    return MonteCarloResult(config.d, config.noise.sigma, config.noise.sigma_gkp,
                            config.use_analog_info, trials, counts, time.perf_counter() - t0)


# ------------------------------------------------------- threshold scan


CASES = {
    "I": lambda x: NoiseParams(sigma=0.0, sigma_gkp=x),
    "II": lambda x: NoiseParams(sigma=x, sigma_gkp=0.0),
    "III": lambda x: NoiseParams(sigma=x, sigma_gkp=x),
}


def case_noise(case: str, x: float) -> NoiseParams:
    try:
        return CASES[case](x)
    except KeyError as exc:
        raise DomainError(f"unknown case '{case}' (expected I, II or III)") from exc


@dataclass
class ThresholdResult:
    case: str
    d_list: list
    grid: list
    rates: dict  # d -> list of mean(P_X, P_Z)
    results: list  # MonteCarloResult per (d, x)
    pair_crossings: dict  # (d1, d2) -> crossing or None
    crossing: float | None
    spread: float | None

    @property
    def found(self) -> bool:
        return self.crossing is not None


def curve_crossing(grid: Sequence[float], lo_rates: Sequence[float], hi_rates: Sequence[float]):
    """Crossing of two rate curves by linear interpolation of log(ratio).

    Below threshold the larger code has the smaller rate, so the crossing is
    where log(lo/hi) changes sign from positive to negative.  Points with a
    zero rate are skipped; returns None when no sign change exists."""
    pts = [(x, math.log(a / b)) for x, a, b in zip(grid, lo_rates, hi_rates) if a > 0 and b > 0]
    for (x0, f0), (x1, f1) in zip(pts[:-1], pts[1:]):
        if f0 > 0 >= f1:
            return x0 if f0 == f1 else x0 + (x1 - x0) * f0 / (f0 - f1)
    return None


def threshold_scan(case: str, d_list: Sequence[int], sigma_grid: Sequence[float], trials_per_point: int,
                   master_seed: int = 0, analog: bool = True, engine: str = "pymatching",
                   workers: int | None = None, progress=None) -> ThresholdResult:
    d_list = sorted(int(d) for d in d_list)
    if len(d_list) < 2:
        raise DomainError("need at least two distances")
    grid = [float(x) for x in sigma_grid]
    rates: dict = {d: [] for d in d_list}
    results = []
    for d in d_list:
        for x in grid:
            cfg = SurfaceGkpConfig(d, case_noise(case, x), analog, None, master_seed)
            res = monte_carlo(cfg, trials_per_point, engine=engine, workers=workers)
            results.append(res)
            # X and Z rates are equal by symmetry; average them, Y included in both
            rates[d].append(0.5 * (res.p_x + res.p_z) + res.p_y)
            if progress:
                progress(res)
    pairs = {}
    for d1, d2 in zip(d_list[:-1], d_list[1:]):
        pairs[(d1, d2)] = curve_crossing(grid, rates[d1], rates[d2])
    found = [v for v in pairs.values() if v is not None]
    crossing = float(np.mean(found)) if len(found) == len(pairs) else None
    spread = float(max(found) - min(found)) if len(found) == len(pairs) else None
    return ThresholdResult(case, d_list, grid, rates, results, pairs, crossing, spread)


# ------------------------------------------------------------------ io


CSV_COLUMNS = ["d", "sigma", "sigma_gkp", "analog", "trials", "p_x", "p_x_err",
               "p_z", "p_z_err", "p_y", "p_y_err", "seconds"]


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_rates_csv(results: Sequence[MonteCarloResult], path, include_seconds: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for r in results:
            row = r.row()
            if not include_seconds:
                row["seconds"] = 0.0
            wr.writerow([fmt(row[c]) for c in CSV_COLUMNS])


def write_manifest(path, subcommand: str, config: dict, seed: int, seconds: float) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "master_seed": seed,
        "version": __version__,
        "seconds": seconds,
        "host": f"{platform.node()} {platform.platform()} python {platform.python_version()}",
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file into typed surface-simulation settings."""
    allowed = {
        "distance": int, "sigma": float, "sigma_gkp": float, "use_analog_info": None,
        "trials": int, "seed": int, "case": str,
    }
    out: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"line {lineno}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in allowed:
            raise DomainError(f"line {lineno}: unknown key '{key}'")
        if key == "use_analog_info":
            low = val.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise DomainError(f"line {lineno}: bad boolean '{val}'")
            out[key] = low in ("true", "1", "yes")
        else:
            try:
                out[key] = allowed[key](val)
            except ValueError as exc:
                raise DomainError(f"line {lineno}: bad value for {key}") from exc
    return out
