"""Independent reference implementations used only by the tests.

Each oracle computes its quantity by a different route from the package:
wide-window high-precision sums, exhaustive search, brute-force enumeration,
numerical quadrature or explicit covariance propagation.
"""

from __future__ import annotations

import itertools
import math

import mpmath as mp
import numpy as np

SQRT_PI = math.sqrt(math.pi)


# ------------------------------------------------------------ combs


def comb_pauli_prob(sigma: float, z: float, window: int = 50) -> float:
    """Odd-comb over full-comb ratio evaluated with 50-digit arithmetic."""
    with mp.workdps(50):
        s, z = mp.mpf(sigma), mp.mpf(z)
        rp = mp.sqrt(mp.pi)
        num = mp.fsum(mp.exp(-(z - (2 * n + 1) * rp) ** 2 / (2 * s * s)) for n in range(-window, window + 1))
        den = mp.fsum(mp.exp(-(z - n * rp) ** 2 / (2 * s * s)) for n in range(-2 * window, 2 * window + 1))
        return float(num / den)


def odd_cell_mass(sigma: float, window: int = 50) -> float:
    """Probability that N(0, sigma^2) lands in an odd cell of width sqrt(pi)."""
    with mp.workdps(40):
        rp = mp.sqrt(mp.pi)
        s = mp.mpf(sigma) * mp.sqrt(2)
        total = mp.mpf(0)
        for n in range(-window, window + 1):
            a = (2 * n + mp.mpf(1) / 2) * rp
            b = (2 * n + mp.mpf(3) / 2) * rp
            total += (mp.erf(b / s) - mp.erf(a / s)) / 2
        return float(total)


# ---------------------------------------------------------- lattices


def brute_force_cvp(S: np.ndarray, z: np.ndarray, half_width: int = 10) -> np.ndarray:
    """argmin_n |S^-1 z - sqrt(2 pi) S^-1 n| over a box around the origin cell."""
    Sinv = np.linalg.inv(S)
    target = Sinv @ z
    center = np.floor(z / math.sqrt(2 * math.pi) + 0.5)
    rng = np.arange(-half_width, half_width + 1)
    cand = center + np.array(list(itertools.product(rng, repeat=len(z))), dtype=float)
    dist = np.sum((target - cand @ (math.sqrt(2 * math.pi) * Sinv).T) ** 2, axis=1)
    return cand[int(np.argmin(dist))].astype(int)


def brute_force_shortest(basis: np.ndarray, half_width: int = 5) -> float:
    rng = np.arange(-half_width, half_width + 1)
    pts = np.array([v for v in itertools.product(rng, repeat=basis.shape[1]) if any(v)], dtype=float)
    return float(np.linalg.norm(pts @ basis.T, axis=1).min())


# ---------------------------------------------------------- matching


def brute_force_mwpm(W: np.ndarray) -> float:
    """Minimum perfect-matching weight by recursive enumeration (n <= 10)."""
    n = W.shape[0]

    def rec(rest):
        if not rest:
            return 0.0
        a = rest[0]
        best = math.inf
        for j in range(1, len(rest)):
            b = rest[j]
            best = min(best, W[a, b] + rec(rest[1:j] + rest[j + 1:]))
        return best

    return rec(tuple(range(n)))


def greedy_matching_weight(W: np.ndarray) -> float:
    n = W.shape[0]
    pairs = sorted((W[i, j], i, j) for i in range(n) for j in range(i + 1, n))
    used, total = set(), 0.0
    for w, i, j in pairs:
        if i not in used and j not in used:
            used |= {i, j}
            total += w
    return total


# ---------------------------------------------- finite-GKP TMS variance


def tms_variance_quadrature(sigma: float, sigma_gkp: float, G: float, cells: int = 6, nodes: int = 60) -> float:
    """Logical variance of the two-mode squeezing code with noisy GKP ancilla.

    Averages (c (w - n sqrt(2 pi)) - a z2)^2 over z2 ~ N(0, V2) and GKP noise
    g ~ N(0, Vg) with w = z2 + g in cell n.  Gauss-Hermite over g, adaptive
    quadrature over z2 inside each cell, so the cell edges are never
    straddled."""
    from scipy.integrate import quad

    a = 2 * math.sqrt(G * (G - 1)) / (2 * G - 1)
    v2 = (2 * G - 1) * sigma**2
    vg = 2 * sigma_gkp**2
    c = a * v2 / (v2 + vg)
    step = math.sqrt(2 * math.pi)
    sd2 = math.sqrt(v2)
    xh, wh = np.polynomial.hermite_e.hermegauss(nodes)
    total = 0.0
    for g, wg in zip(math.sqrt(vg) * xh, wh / math.sqrt(2 * math.pi)):
        for n in range(-cells, cells + 1):
            lo, hi = (n - 0.5) * step - g, (n + 0.5) * step - g

            def f(z2, g=g, n=n):
                dens = math.exp(-z2 * z2 / (2 * v2)) / math.sqrt(2 * math.pi * v2)
                return dens * (c * (z2 + g - n * step) - a * z2) ** 2

            lo_c, hi_c = max(lo, -12 * sd2), min(hi, 12 * sd2)
            if lo_c < hi_c:
                total += wg * quad(f, lo_c, hi_c, epsabs=1e-13, epsrel=1e-11, limit=200)[0]
    return sigma**2 / (2 * G - 1) + total


# -------------------------------------------- surface noise propagation


def _oracle_layout(d, z_order, x_order):
    def idx(i, j):
        return i * d + j + 1 if 0 <= i < d and 0 <= j < d else 0

    Z, X = [], []
    for r in range(-1, d):
        for c in range(-1, d):
            corners = {"TL": idx(r, c), "TR": idx(r, c + 1), "BL": idx(r + 1, c), "BR": idx(r + 1, c + 1)}
            bulk = 0 <= r <= d - 2 and 0 <= c <= d - 2
            if (r + c) % 2 == 1:
                if bulk or ((c == -1 or c == d - 1) and 0 <= r <= d - 2):
                    Z.append(((r, c), corners))
            elif bulk or ((r == -1 or r == d - 1) and 0 <= c <= d - 2):
                X.append(((r, c), corners))
    X.sort(key=lambda e: (e[0][1], e[0][0]))
    Zt = [[cn[z_order[t]] for _, cn in Z] for t in range(4)]
    Xt = [[cn[x_order[t]] for _, cn in X] for t in range(4)]
    xsign = [+1 if x_order[t] in ("TR", "BL") else -1 for t in range(4)]
    return Z, X, Zt, Xt, xsign


def propagate_surface_covariance(d, sigma_gkp, sigma, rounds=3,
                                 z_order=("TR", "BR", "TL", "BL"), x_order=("TR", "TL", "BR", "BL")):
    """Exact covariance propagation of the GKP and surface syndrome circuits.

    Tracks the joint covariance of every quadrature as a linear function of
    all injected Gaussian shifts; returns readout variances keyed by
    ("q"|"p", round, k) for GKP ancillas and ("Z"|"X", round, l) for syndromes."""
    _, _, Zt, Xt, xsign = _oracle_layout(d, z_order, x_order)
    n, nz = d * d, len(Zt[0])
    M = 2 * n + 2 * nz
    C = np.zeros((2 * M, 2 * M))

    def Q(m):
        return m

    def P(m):
        return M + m

    def D(k):
        return k - 1

    def A(k):
        return n + k - 1

    def ZS(l):
        return 2 * n + l

    def XS(l):
        return 2 * n + nz + l

    def add(i, var):
        C[i, i] += var

    def add2(i, j, cov):
        C[np.ix_([i, j], [i, j])] += cov

    def lin(T):
        nonlocal C
        C = T @ C @ T.T

    def reset(i, var):
        C[i, :] = 0
        C[:, i] = 0
        C[i, i] = var

    def idle(m):
        add(Q(m), sigma**2)
        add(P(m), sigma**2)

    def gate(ctrl, tgt, sgn):
        T = np.eye(2 * M)
        T[Q(tgt), Q(ctrl)] += sgn
        T[P(ctrl), P(tgt)] -= sgn
        lin(T)
        add2(Q(ctrl), Q(tgt), sigma**2 * np.array([[1, sgn / 2], [sgn / 2, 4 / 3]]))
        add2(P(ctrl), P(tgt), sigma**2 * np.array([[4 / 3, -sgn / 2], [-sgn / 2, 1]]))

    out = {}
    for rnd in range(1, rounds + 1):
        for step in (1, 2):
            for k in range(1, n + 1):
                idle(D(k))
                reset(Q(A(k)), sigma_gkp**2)
                reset(P(A(k)), sigma_gkp**2)
            measq = {k: (k % 2 == 1) == (step == 1) for k in range(1, n + 1)}
            for k in range(1, n + 1):
                if measq[k]:
                    gate(D(k), A(k), 1)
                else:
                    gate(A(k), D(k), -1)
            for k in range(1, n + 1):
                idle(D(k))
                idle(A(k))
            for k in range(1, n + 1):
                T = np.eye(2 * M)
                if measq[k]:
                    out[("q", rnd, k)] = C[Q(A(k)), Q(A(k))]
                    T[Q(D(k)), Q(A(k))] -= 1
                else:
                    out[("p", rnd, k)] = C[P(A(k)), P(A(k))]
                    T[P(D(k)), P(A(k))] -= 1
                lin(T)
        for k in range(1, n + 1):
            idle(D(k))
        for l in range(nz):
            for i in (ZS(l), XS(l)):
                reset(Q(i), sigma_gkp**2)
                reset(P(i), sigma_gkp**2)
        for t in range(4):
            busy = set()
            for l in range(nz):
                k = Zt[t][l]
                if k:
                    gate(D(k), ZS(l), 1)
                    busy.add(k)
                else:
                    idle(ZS(l))
            for l in range(nz):
                k = Xt[t][l]
                if k:
                    gate(XS(l), D(k), xsign[t])
                    busy.add(k)
                else:
                    idle(XS(l))
            for k in range(1, n + 1):
                if k not in busy:
                    idle(D(k))
        for k in range(1, n + 1):
            idle(D(k))
        for l in range(nz):
            idle(ZS(l))
            idle(XS(l))
        for l in range(nz):
            out[("Z", rnd, l + 1)] = C[Q(ZS(l)), Q(ZS(l))]
            out[("X", rnd, l + 1)] = C[P(XS(l)), P(XS(l))]
    return out
