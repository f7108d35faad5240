"""Quantum-capacity bounds of thermal-loss channels and GKP achievable rates.

All rates are in qubits (bits) per channel use.  An energy constraint of
``math.inf`` selects the closed-form unconstrained expressions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .noise import DomainError

GRID_POINTS = 1000
X_TOL = 1e-6


@dataclass(frozen=True)
class ChannelParams:
    """Thermal-loss channel with transmissivity ``eta`` and environment
    photon number ``n_th``; ``n_bar`` is the input energy constraint."""

    eta: float
    n_th: float = 0.0
    n_bar: float = math.inf

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError("eta must lie in [0, 1]")
        if not (self.n_th >= 0 and math.isfinite(self.n_th)):
            raise DomainError("n_th must be finite and nonnegative")
        if not self.n_bar > 0:
            raise DomainError("n_bar must be positive (math.inf for unconstrained)")

    @property
    def gamma(self) -> float:
        return 1.0 - self.eta

    @property
    def constrained(self) -> bool:
        return math.isfinite(self.n_bar)


@dataclass(frozen=True)
class CorrelatedThermalSpec:
    """Blocks of ``block_sizes[k]`` modes carrying ``block_photons[k]`` photons per mode."""

    block_sizes: tuple
    block_photons: tuple

    def __post_init__(self):
        if len(self.block_sizes) != len(self.block_photons) or not self.block_sizes:
            raise DomainError("block sizes and photon numbers must be nonempty and of equal length")
        if any(int(n) != n or n < 1 for n in self.block_sizes):
            raise DomainError("block sizes must be positive integers")
        if any(not (x >= 0 and math.isfinite(x)) for x in self.block_photons):
            raise DomainError("block photon numbers must be finite and nonnegative")

    @property
    def modes(self) -> int:
        return int(sum(self.block_sizes))

    @property
    def mean_photons(self) -> float:
        return sum(n * x for n, x in zip(self.block_sizes, self.block_photons)) / self.modes

    @classmethod
    def single_block(cls, modes: int, n_bar: float) -> "CorrelatedThermalSpec":
        """All energy in one collective mode: sizes (1, N-1), photons (N n_bar, 0)."""
        if modes == 1:
            return cls((1,), (n_bar,))
        return cls((1, modes - 1), (modes * n_bar, 0.0))


def g_entropy(x):
    """Entropy (x+1) log2(x+1) - x log2 x of a thermal state with mean photon number x."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("g is defined for x >= 0")
    out = np.zeros_like(arr)
    m = arr > 0
    xm = arr[m]
    l1 = np.log1p(xm)
    out[m] = (l1 + xm * (l1 - np.log(xm))) / math.log(2)
    return float(out) if out.ndim == 0 else out


def _log2_pos(x: float) -> float:
    return math.log2(x) if x > 0 else -math.inf


def pure_loss_capacity(params: ChannelParams) -> float:
    if params.n_th != 0:
        raise DomainError("pure-loss capacity needs n_th = 0")
    eta = params.eta
    if eta <= 0.5:
        return 0.0
    if not params.constrained:
        return max(_log2_pos(eta / (1 - eta)) if eta < 1 else math.inf, 0.0)
    n = params.n_bar
    return max(g_entropy(eta * n) - g_entropy((1 - eta) * n), 0.0)


def q_dp(params: ChannelParams) -> float:
    """Data-processing upper bound: thermal loss as pure loss followed by amplification."""
    eta, nth = params.eta, params.n_th
    if eta == 1.0:
        return math.inf if not params.constrained else g_entropy(params.n_bar)
    if not params.constrained:
        return max(_log2_pos(eta / ((1 - eta) * (nth + 1))), 0.0)
    gain = (1 - eta) * nth + 1
    n = params.n_bar
    return max(g_entropy(eta * n / gain) - g_entropy((1 - eta) * (nth + 1) * n / gain), 0.0)


def q_idp(params: ChannelParams) -> float:
    """Improved data-processing bound: amplification followed by pure loss."""
    eta, nth = params.eta, params.n_th
    eff = eta - (1 - eta) * nth
    if eff <= 0:
        return 0.0
    if eta == 1.0:
        return math.inf if not params.constrained else g_entropy(params.n_bar)
    if not params.constrained:
        return max(_log2_pos(eff / ((1 - eta) * (nth + 1))), 0.0)
    a = eta * params.n_bar + (1 - eta) * nth
    return max(g_entropy(a) - g_entropy((1 - eta) * (nth + 1) * a / eff), 0.0)


def q_odp(params: ChannelParams) -> float:
    return max(q_dp(params), q_idp(params))


def lower_bound_thermal_input(params: ChannelParams) -> float:
    """Coherent information of a thermal input; may be negative.

    Without an energy constraint this is the limit log2(eta/(1-eta)) - g(n_th)."""
    eta, nth, n = params.eta, params.n_th, params.n_bar
    if not params.constrained:
        if eta == 1.0:
            return math.inf
        return _log2_pos(eta / (1 - eta)) - g_entropy(nth)
    disc = ((1 + eta) * n + (1 - eta) * nth + 1) ** 2 - 4 * eta * n * (n + 1)
    root = math.sqrt(max(disc, 0.0))
    skew = (1 - eta) * (n - nth)
    lam1 = max((root + skew - 1) / 2, 0.0)
    lam2 = max((root - skew - 1) / 2, 0.0)
    return g_entropy(eta * n + (1 - eta) * nth) - g_entropy(lam1) - g_entropy(lam2)


def _split_objective(params: ChannelParams, x: float) -> float:
    return x * lower_bound_thermal_input(ChannelParams(params.eta, params.n_th, params.n_bar / x))


def lower_bound_correlated(params: ChannelParams) -> tuple[float, float]:
    """max over x in (0, 1] of x * I_c(n_bar / x); returns (rate, x_star).

    A fraction x of the modes carries all the energy.  A 1000-point grid
    seeds bounded Brent refinements around its three best local maxima."""
    if not params.constrained:
        raise DomainError("the correlated bound needs a finite n_bar")
    xs = np.linspace(1.0 / GRID_POINTS, 1.0, GRID_POINTS)
    vals = np.array([_split_objective(params, x) for x in xs])
    peaks = [i for i in range(len(xs))
             if (i == 0 or vals[i] >= vals[i - 1]) and (i == len(xs) - 1 or vals[i] >= vals[i + 1])]
    peaks = sorted(peaks, key=lambda i: -vals[i])[:3]
    best_x, best_v = float(xs[peaks[0]]), float(vals[peaks[0]])
    for i in peaks:
        lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
        res = minimize_scalar(lambda x: -_split_objective(params, x), bounds=(lo, hi),
                              method="bounded", options={"xatol": X_TOL})
        if -res.fun > best_v:
            best_x, best_v = float(res.x), float(-res.fun)
    # x = 1 is the thermal-input bound; keep it exactly when it wins
    v1 = lower_bound_thermal_input(params)
    if v1 >= best_v:
        return v1, 1.0
    return best_v, best_x


def correlated_thermal_covariance(spec: CorrelatedThermalSpec) -> np.ndarray:
    """Covariance of the correlated thermal state in (q1, p1, q2, p2, ...) order.

    A single block is a product of identical thermal modes.  Block sizes
    (1, N-1) with photons (N n_bar, 0) give every mode n_bar photons and
    every pair a correlation n_bar."""
    N = spec.modes
    n_bar = spec.mean_photons
    if len(spec.block_sizes) == 1:
        return (n_bar + 0.5) * np.eye(2 * N)
    if len(spec.block_sizes) != 2 or spec.block_sizes[0] != 1 or spec.block_photons[1] != 0:
        raise DomainError("only a single block or the (1, N-1) family with photons (N n_bar, 0) is constructed")
    corr = np.full((N, N), n_bar)
    np.fill_diagonal(corr, n_bar + 0.5)
    return np.kron(corr, np.eye(2))


def satisfies_uncertainty(cov: np.ndarray, tol: float = 1e-12) -> bool:
    """V + (i/2) Omega >= 0, tested through the real embedding [[V, -W], [W, V]] with W = Omega/2."""
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0] // 2
    omega = np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    w = 0.5 * omega
    emb = np.block([[cov, -w], [w, cov]])
    return bool(np.linalg.eigvalsh(emb).min() >= -tol)


def gkp_achievable_rate(params: ChannelParams) -> float:
    """log2 of the largest integer dimension d <= 1/(e (1-eta)(n_th+1)), floored at 0."""
    noise = (1 - params.eta) * (params.n_th + 1)
    if noise == 0:
        return math.inf
    d = math.floor(1.0 / (math.e * noise))
    return math.log2(d) if d >= 2 else 0.0


# ------------------------------------------------------------- helpers


def odp_switch_point(n_th: float, n_bar: float, points: int = 2000) -> float:
    """Transmissivity where the data-processing and improved bounds cross,
    taken where both bounds are positive (the improved one wins above it)."""

    def diff(eta):
        p = ChannelParams(eta, n_th, n_bar)
        return q_dp(p) - q_idp(p)

    lo = n_th / (n_th + 1)
    etas = np.linspace(lo + (1 - lo) / points, 1 - 1e-9, points)
    vals = [diff(e) for e in etas]
    for a, b, fa, fb in zip(etas[:-1], etas[1:], vals[:-1], vals[1:]):
        if fa * fb <= 0 and fa != fb:
            p = ChannelParams(a, n_th, n_bar)
            if q_dp(p) > 0 and q_idp(p) > 0:
                return float(brentq(diff, a, b, xtol=1e-12))
    raise DomainError("no crossing with both bounds positive")


def correlated_advantage_onset(n_th: float, n_bar: float, lo: float = 0.01, hi: float = 0.5) -> float:
    """Loss probability at which splitting energy over fewer modes starts to
    beat the thermal input, i.e. where d/dx [x I_c(n_bar/x)] at x = 1 vanishes."""

    def slope(gamma):
        p = ChannelParams(1 - gamma, n_th, n_bar)
        h = 1e-5
        return (_split_objective(p, 1.0) - _split_objective(p, 1.0 - h)) / h

    return float(brentq(slope, lo, hi, xtol=1e-10))
