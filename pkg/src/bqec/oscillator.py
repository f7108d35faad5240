"""Encoding an oscillator into oscillators with GKP ancillas and two-mode
squeezing, plus the linear algebra of Gaussian cubic-phase distillation.

Two-mode conventions: x = (q1, p1, q2, p2), mode 1 is the data oscillator and
mode 2 a square GKP ancilla with spacing sqrt(2 pi).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import erf

from . import SQRT_2PI
from .noise import DomainError, NoiseParams, remainder

GAIN_GRID = 2000


# ------------------------------------------------------ two-mode code


@dataclass(frozen=True)
class TmsCodeConfig:
    G: float
    sigma: float
    sigma_gkp: float = 0.0

    def __post_init__(self):
        if not self.G >= 1:
            raise DomainError("gain must be >= 1")
        if not self.sigma > 0 or self.sigma_gkp < 0:
            raise DomainError("need sigma > 0 and sigma_gkp >= 0")

    @property
    def squeezing_db(self) -> float:
        return squeezing_db(self.G)


def squeezing_db(G: float) -> float:
    """Single-mode squeezing 20 log10(sqrt(G) + sqrt(G-1)) equivalent to gain G."""
    return 20.0 * math.log10(math.sqrt(G) + math.sqrt(G - 1))


def two_mode_squeezer(G: float) -> np.ndarray:
    if G < 1:
        raise DomainError("gain must be >= 1")
    a, b = math.sqrt(G), math.sqrt(G - 1)
    Z = np.diag([1.0, -1.0])
    eye = np.eye(2)
    return np.block([[a * eye, b * Z], [b * Z, a * eye]])


def two_mode_squeezer_inverse(G: float) -> np.ndarray:
    if G < 1:
        raise DomainError("gain must be >= 1")
    a, b = math.sqrt(G), math.sqrt(G - 1)
    Z = np.diag([1.0, -1.0])
    eye = np.eye(2)
    return np.block([[a * eye, -b * Z], [-b * Z, a * eye]])


def reshape_noise(G: float, xi) -> np.ndarray:
    """z = S(G)^{-1} xi for xi of shape (..., 4)."""
    return np.asarray(xi, dtype=float) @ two_mode_squeezer_inverse(G).T


def _estimate_coefficient(G: float) -> float:
    return 2.0 * math.sqrt(G * (G - 1)) / (2 * G - 1)


def _cell_mass(std, n):
    """N(0, std^2) mass of [(n - 1/2) sqrt(2 pi), (n + 1/2) sqrt(2 pi)]."""
    a = (n - 0.5) * SQRT_2PI / (math.sqrt(2) * std)
    b = (n + 0.5) * SQRT_2PI / (math.sqrt(2) * std)
    return 0.5 * (erf(b) - erf(a))


def _lattice_second_moment(std):
    """2 pi E[n^2] where n is the lattice cell of a N(0, std^2) variable."""
    std = np.asarray(std, dtype=float)
    top = int(math.ceil(8.0 * float(std.max()) / SQRT_2PI)) + 2
    n = np.arange(1, top + 1)
    mass = _cell_mass(std[..., None], n)
    return 2.0 * np.sum(2 * math.pi * n**2 * mass, axis=-1)


def tms_logical_variance_finite_gkp(sigma, sigma_gkp, G):
    """Logical noise variance with GKP ancilla noise of variance 2 sigma_gkp^2.

    The ancilla readout w = z2 + xi_gkp is reduced mod sqrt(2 pi) and scaled
    by the linear-estimator coefficient times V2/(V2+Vg).  Conditioning on w
    reduces the two-dimensional average to one sum over lattice cells."""
    sigma = float(sigma)
    if not sigma > 0 or sigma_gkp < 0:
        raise DomainError("need sigma > 0 and sigma_gkp >= 0")
    G = np.asarray(G, dtype=float)
    if np.any(G < 1):
        raise DomainError("gain must be >= 1")
    v2 = (2 * G - 1) * sigma**2
    vg = 2.0 * sigma_gkp**2
    a2 = 4 * G * (G - 1) / (2 * G - 1) ** 2
    beta = v2 / (v2 + vg)
    tau2 = v2 * vg / (v2 + vg)
    out = sigma**2 / (2 * G - 1) + a2 * tau2 + a2 * beta**2 * _lattice_second_moment(np.sqrt(v2 + vg))
    return float(out) if out.ndim == 0 else out


def tms_logical_variance(sigma, G):
    """Logical noise variance with ideal GKP ancillas."""
    return tms_logical_variance_finite_gkp(sigma, 0.0, G)


def tms_correction_coefficient(G: float, sigma: float, sigma_gkp: float = 0.0) -> float:
    v2 = (2 * G - 1) * sigma**2
    return _estimate_coefficient(G) * v2 / (v2 + 2 * sigma_gkp**2)


def tms_optimize_gain(sigma: float, sigma_gkp: float = 0.0) -> tuple[float, float]:
    """(G_star, sigma_L_star) minimizing the logical variance over G in [1, 1 + 10/sigma^2].

    A log-spaced grid of G - 1 seeds a bounded Brent refinement; G = 1 is
    returned unless an interior gain beats it."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    gs = 1.0 + np.geomspace(1e-6, 10.0 / sigma**2, GAIN_GRID)
    vals = tms_logical_variance_finite_gkp(sigma, sigma_gkp, gs)
    i = int(np.argmin(vals))
    base = tms_logical_variance_finite_gkp(sigma, sigma_gkp, 1.0)
    lo, hi = gs[max(i - 1, 0)], gs[min(i + 1, len(gs) - 1)]
    res = minimize_scalar(lambda g: tms_logical_variance_finite_gkp(sigma, sigma_gkp, g),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    best_g, best_v = float(res.x), float(res.fun)
    if vals[i] < best_v:
        best_g, best_v = float(gs[i]), float(vals[i])
    if base <= best_v:
        return 1.0, math.sqrt(base)
    return best_g, math.sqrt(best_v)


def tms_asymptotic_optimum(sigma: float) -> tuple[float, float]:
    """Small-sigma forms of (G_star, sigma_L_star)."""
    L = math.log(math.pi**1.5 / (2 * sigma**4))
    return math.pi / (8 * sigma**2) / L + 0.5, 2 * sigma**2 / math.sqrt(math.pi) * math.sqrt(L)


def critical_sigma(lo: float = 0.3, hi: float = 0.8, tol: float = 1e-6) -> float:
    """Smallest sigma from which G = 1 is optimal with ideal ancillas (bisection)."""

    def helps(s):
        return tms_optimize_gain(s)[0] > 1.0

    if not helps(lo) or helps(hi):
        raise DomainError("bracket does not contain the critical sigma")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if helps(mid) else (lo, mid)
    return 0.5 * (lo + hi)


def max_qec_gain(sigma_gkp: float, sigmas=None) -> tuple[float, float]:
    """(max over sigma of sigma^2 / sigma_L_star^2, argmax sigma)."""
    if sigmas is None:
        sigmas = np.linspace(0.01, 0.6, 60)
    sigmas = np.asarray(sigmas, dtype=float)
    gains = np.array([s**2 / tms_optimize_gain(s, sigma_gkp)[1] ** 2 for s in sigmas])
    i = int(np.argmax(gains))
    lo, hi = sigmas[max(i - 1, 0)], sigmas[min(i + 1, len(sigmas) - 1)]
    res = minimize_scalar(lambda s: -(s**2) / tms_optimize_gain(s, sigma_gkp)[1] ** 2,
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    if -res.fun > gains[i]:
        return float(-res.fun), float(res.x)
    return float(gains[i]), float(sigmas[i])


def critical_squeezing_db(lo: float = 8.0, hi: float = 14.0, tol: float = 1e-3) -> float:
    """GKP squeezing above which some sigma has QEC gain above one (bisection)."""

    def helps(db):
        return max_qec_gain(NoiseParams.sigma_gkp_from_db(db))[0] > 1.0 + 1e-9

    if helps(lo) or not helps(hi):
        raise DomainError("bracket does not contain the critical squeezing")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if helps(mid) else (mid, hi)
    return 0.5 * (lo + hi)


def tms_monte_carlo(config: TmsCodeConfig, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Sample logical (q, p) noise of the full encode, decode and correct
    pipeline; returns an array of shape (trials, 2)."""
    G, s, sg = config.G, config.sigma, config.sigma_gkp
    xi = s * rng.standard_normal((trials, 4))
    z = reshape_noise(G, xi)
    gkp = math.sqrt(2.0) * sg * rng.standard_normal((trials, 2))
    c = tms_correction_coefficient(G, s, sg)
    est_q = remainder(z[:, 2] + gkp[:, 0], SQRT_2PI)
    est_p = remainder(z[:, 3] + gkp[:, 1], SQRT_2PI)
    return np.column_stack([z[:, 0] + c * est_q, z[:, 1] - c * est_p])


# ------------------------------------------------------ distillation


RM_15_5 = np.array(
    [
        [1, 1, 0, 0, 0],
        [1, 0, 1, 0, 0],
        [-1, -1, -1, 0, 0],
        [1, 0, 0, 1, 0],
        [-1, -1, 0, -1, 0],
        [-1, 0, -1, -1, 0],
        [1, 1, 1, 1, 0],
        [1, 0, 0, 0, 1],
        [-1, -1, 0, 0, -1],
        [-1, 0, -1, 0, -1],
        [1, 1, 1, 0, 1],
        [-1, 0, 0, -1, -1],
        [1, 1, 0, 1, 1],
        [1, 0, 1, 1, 1],
        [-1, -1, -1, -1, -1],
    ],
    dtype=float,
)
RM_15_5.setflags(write=False)

TRI_TOL = 1e-9


@dataclass
class TriorthogonalityReport:
    valid: bool
    full_rank: bool
    violations: list = field(default_factory=list)  # (a, b, c, value), 1-based

    def describe(self) -> str:
        if self.valid:
            return "triorthogonal"
        parts = [] if self.full_rank else ["not full column rank"]
        parts += [f"T[{a},{b},{c}] = {v:.6g}" for a, b, c, v in self.violations[:5]]
        return "not triorthogonal: " + "; ".join(parts)


def check_triorthogonal(A_bar, k: int = 1) -> TriorthogonalityReport:
    """Check full column rank and sum_j A_ja A_jb A_jc = [a = b = c <= k]."""
    A = np.atleast_2d(np.asarray(A_bar, dtype=float))
    n, m = A.shape
    if not n >= m >= k >= 1:
        raise DomainError("need n >= m >= k >= 1")
    full_rank = bool(np.linalg.matrix_rank(A) == m)
    T = np.einsum("ja,jb,jc->abc", A, A, A)
    violations = []
    for a, b, c in itertools.product(range(m), repeat=3):
        if not a <= b <= c:
            continue
        target = 1.0 if (a == b == c and a < k) else 0.0
        if abs(T[a, b, c] - target) > TRI_TOL:
            violations.append((a + 1, b + 1, c + 1, float(T[a, b, c])))
    return TriorthogonalityReport(full_rank and not violations, full_rank, violations)


def distillation_output_variance(A_bar, sigma: float = 1.0) -> tuple[float, np.ndarray]:
    """(Sigma^2, c_star): smallest variance of z1 - sum_j c_j z_j given
    Cov(z) = sigma^2 A^T A, and the minimizing coefficients."""
    A = np.atleast_2d(np.asarray(A_bar, dtype=float))
    V = sigma**2 * A.T @ A
    v_ul = float(V[0, 0])
    if V.shape[0] == 1:
        return v_ul, np.zeros(0)
    v_ll = V[1:, 0]
    v_lr = V[1:, 1:]
    if np.linalg.matrix_rank(v_lr) < v_lr.shape[0]:
        raise DomainError("ancilla covariance block is singular")
    c = np.linalg.solve(v_lr, v_ll)
    return v_ul - float(v_ll @ c), c


def nogo_witness(v) -> float:
    """sum v^2 for a vector with sum v^3 = 1; it is never below one."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if abs(np.sum(v**3) - 1.0) >= 1e-9:
        raise DomainError("vector must satisfy sum v^3 = 1")
    out = float(np.sum(v**2))
    assert out >= 1.0 - 1e-9, "no-go bound violated"
    return out


@dataclass(frozen=True)
class GaussianStateMoments:
    q_mean: float
    p_mean: float
    V_qq: float
    V_pp: float
    V_qp: float = 0.0

    def __post_init__(self):
        if not (self.V_qq > 0 and self.V_pp > 0):
            raise DomainError("variances must be positive")
        if self.V_qq * self.V_pp - self.V_qp**2 < 0.25 - 1e-12:
            raise DomainError("moments violate the uncertainty relation")

    @classmethod
    def vacuum(cls) -> "GaussianStateMoments":
        return cls(0.0, 0.0, 0.5, 0.5, 0.0)


def magic_variance(state: GaussianStateMoments, gamma: float) -> float:
    """Variance of p - 3 gamma q^2 in a Gaussian state."""
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    Vq, Vp, Vc, qm = state.V_qq, state.V_pp, state.V_qp, state.q_mean
    shift = qm - Vc / (6 * gamma * Vq)
    return Vp + 18 * gamma**2 * Vq**2 + 36 * gamma**2 * Vq * shift**2 - Vc**2 / Vq


def magic_variance_bound(gamma: float) -> float:
    return 1.5 * (1.5 * gamma) ** (2.0 / 3.0)


def magic_minimizer(gamma: float) -> GaussianStateMoments:
    """Pure squeezed state with V_qq^3 = 1/(144 gamma^2), which attains the bound."""
    vq = (1.0 / (144 * gamma**2)) ** (1.0 / 3.0)
    return GaussianStateMoments(0.0, 0.0, vq, 0.25 / vq, 0.0)


def load_matrix(path) -> np.ndarray:
    """Whitespace- or comma-separated rows; ``#`` starts a comment."""
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.replace(",", " ").split()])
            except ValueError as exc:
                raise DomainError(f"line {lineno}: non-numeric entry") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise DomainError("matrix rows must be nonempty and of equal length")
    return np.array(rows)
