"""Shift-noise primitives: modular remainder, Gaussian-comb probabilities,
loss/shift conversions and (T, N, d) Gaussian-channel bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erfc

from . import SQRT_PI


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a function."""


def _comb_window(sigma: float) -> int:
    # Gaussian tail beyond 8 sigma is below 1e-15
    return int(math.ceil(8.0 * sigma / SQRT_PI)) + 2


# ---------------------------------------------------------------- types


@dataclass
class ShiftVector:
    """Per-mode position and momentum shift realizations."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float)).copy()
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float)).copy()
        if self.q.ndim != 1 or self.q.shape != self.p.shape:
            raise DomainError("q and p must be 1-D with equal length")
        if self.q.size == 0:
            raise DomainError("at least one mode is required")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise DomainError("shift entries must be finite")

    @property
    def mode_count(self) -> int:
        return int(self.q.size)

    @classmethod
    def zeros(cls, modes: int) -> "ShiftVector":
        return cls(np.zeros(modes), np.zeros(modes))

    def as_vector(self) -> np.ndarray:
        """Stacked (q_1..q_N, p_1..p_N) representation."""
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, x: Sequence[float]) -> "ShiftVector":
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size % 2:
            raise DomainError("vector length must be even")
        n = x.size // 2
        return cls(x[:n], x[n:])


@dataclass
class GaussianChannelSpec:
    """Gaussian channel acting on first and second moments as
    mean -> T mean + d and covariance -> T V T^T + N."""

    T: np.ndarray
    N_mat: np.ndarray
    d_vec: np.ndarray = field(default=None)

    def __post_init__(self):
        self.T = np.atleast_2d(np.asarray(self.T, dtype=float))
        self.N_mat = np.atleast_2d(np.asarray(self.N_mat, dtype=float))
        dim = self.T.shape[0]
        if self.d_vec is None:
            self.d_vec = np.zeros(dim)
        self.d_vec = np.asarray(self.d_vec, dtype=float).reshape(-1)
        if self.T.shape != (dim, dim) or dim % 2:
            raise DomainError("T must be a square 2N x 2N matrix")
        if self.N_mat.shape != (dim, dim) or self.d_vec.shape != (dim,):
            raise DomainError("N and d must match the dimension of T")
        if not np.allclose(self.N_mat, self.N_mat.T, rtol=0.0, atol=1e-12):
            raise DomainError("N must be symmetric")
        if np.linalg.eigvalsh(self.N_mat).min() < -1e-12:
            raise DomainError("N must be positive semidefinite")

    @property
    def mode_count(self) -> int:
        return self.T.shape[0] // 2

    def apply(self, mean: np.ndarray, cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mean = self.T @ np.asarray(mean, dtype=float) + self.d_vec
        cov = self.T @ np.asarray(cov, dtype=float) @ self.T.T + self.N_mat
        return mean, cov


@dataclass(frozen=True)
class NoiseParams:
    """Circuit shift noise ``sigma`` and GKP peak width ``sigma_gkp``."""

    sigma: float = 0.0
    sigma_gkp: float = 0.0

    def __post_init__(self):
        for name in ("sigma", "sigma_gkp"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and nonnegative")

    @property
    def gkp_squeezing_db(self) -> float:
        """GKP squeezing -10 log10(2 sigma_gkp^2) in dB (inf for ideal states)."""
        if self.sigma_gkp == 0:
            return math.inf
        return -10.0 * math.log10(2.0 * self.sigma_gkp**2)

    @staticmethod
    def sigma_gkp_from_db(db: float) -> float:
        return math.sqrt(10.0 ** (-db / 10.0) / 2.0)


# ----------------------------------------------------------- operations


def remainder(z, s: float):
    """Signed remainder R_s(z) = z - s*floor(z/s + 1/2), in [-s/2, s/2)."""
    if not (s > 0 and math.isfinite(s)):
        raise DomainError("period must be positive and finite")
    z_arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z_arr)):
        raise DomainError("remainder input must be finite")
    r = z_arr - s * np.floor(z_arr / s + 0.5)
    return float(r) if r.ndim == 0 else r


def p_err(sigma_eff: float) -> float:
    """Probability that a N(0, sigma_eff^2) shift lands in an odd cell
    [(2n+1/2)sqrt(pi), (2n+3/2)sqrt(pi)], i.e. causes a Pauli error."""
    sigma_eff = float(sigma_eff)
    if not (sigma_eff >= 0 and math.isfinite(sigma_eff)):
        raise DomainError("sigma_eff must be finite and nonnegative")
    if sigma_eff == 0:
        return 0.0
    nmax = _comb_window(sigma_eff)
    n = np.arange(-nmax - 1, nmax + 1)
    scale = math.sqrt(2.0) * sigma_eff
    a = (2 * n + 0.5) * SQRT_PI / scale
    b = (2 * n + 1.5) * SQRT_PI / scale
    # erfc differences are accurate on both tails when taken on the positive side
    pos = a >= 0
    mass = np.where(pos, erfc(np.abs(a)) - erfc(np.abs(b)), erfc(np.abs(b)) - erfc(np.abs(a)))
    return float(min(0.5, max(0.0, 0.5 * np.abs(mass).sum())))


def p_err_asymptotic(sigma: float) -> float:
    """Small-sigma form (sqrt(8) sigma / pi) exp(-pi / (8 sigma^2))."""
    if sigma <= 0:
        return 0.0
    return math.sqrt(8.0) * sigma / math.pi * math.exp(-math.pi / (8.0 * sigma**2))


def log_conditional_pauli_prob(sigma_eff, z):
    """Natural log of the conditional Pauli probability p[sigma](z).

    Broadcasts over array ``sigma_eff`` and ``z``; a max-shifted log-sum-exp
    so that tiny probabilities stay finite."""
    sig = np.asarray(sigma_eff, dtype=float)
    # the comb ratio is even in z; folding makes that exact in floating point
    z = np.abs(np.asarray(z, dtype=float))
    if np.any(~(sig > 0)) or not np.all(np.isfinite(sig)):
        raise DomainError("sigma_eff must be positive and finite")
    nmax = _comb_window(float(sig.max()))
    n = np.arange(-nmax - 1, nmax + 2)
    zz = z[..., None]
    inv = 1.0 / (2.0 * sig[..., None] ** 2)
    num = -((zz - (2 * n + 1) * SQRT_PI) ** 2) * inv
    den = -((zz - n * SQRT_PI) ** 2) * inv
    out = _lse(num) - _lse(den)
    return float(out) if out.ndim == 0 else out


def _lse(x: np.ndarray) -> np.ndarray:
    """log(sum(exp(x))) over the last axis, shifted by the maximum."""
    m = x.max(axis=-1)
    return m + np.log(np.exp(x - m[..., None]).sum(axis=-1))


def conditional_pauli_prob(sigma_eff, z):
    """p[sigma](z): probability that a shift whose remainder mod sqrt(pi) is z
    came from an odd multiple of sqrt(pi) (a Pauli error)."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(np.abs(z_arr) > SQRT_PI / 2 + 1e-12):
        raise DomainError("z must lie in [-sqrt(pi)/2, sqrt(pi)/2]")
    return np.exp(log_conditional_pauli_prob(sigma_eff, z_arr))


def loss_to_shift_post_amp(eta: float) -> float:
    """Shift variance (1-eta)/eta of pure loss followed by amplification by 1/eta."""
    if not (0 < eta <= 1):
        raise DomainError("eta must lie in (0, 1]")
    return (1.0 - eta) / eta


def thermal_loss_to_shift_pre_amp(eta: float, n_th: float) -> float:
    """Shift variance (1-eta)(n_th+1) of amplification by 1/eta followed by thermal loss."""
    if not (0 <= eta <= 1) or n_th < 0:
        raise DomainError("need 0 <= eta <= 1 and n_th >= 0")
    return (1.0 - eta) * (n_th + 1.0)


def compose_gaussian_channels(a: GaussianChannelSpec, b: GaussianChannelSpec) -> GaussianChannelSpec:
    """Channel ``b o a``: apply ``a`` first, then ``b``."""
    if a.T.shape != b.T.shape:
        raise DomainError("channels act on different numbers of modes")
    T = b.T @ a.T
    N = b.T @ a.N_mat @ b.T.T + b.N_mat
    N = 0.5 * (N + N.T)
    d = b.T @ a.d_vec + b.d_vec
    return GaussianChannelSpec(T, N, d)


def named_channel(kind: str, modes: int = 1, **params) -> GaussianChannelSpec:
    """Isotropic named channels on ``modes`` modes.

    kinds and parameters:
      thermal_loss(eta, n_th), pure_loss(eta), noisy_amp(gain, n_th),
      quantum_limited_amp(gain), additive_noise(sigma)
    """
    eye = np.eye(2 * modes)

    def need(name, lo=None, hi=None):
        if name not in params:
            raise DomainError(f"{kind} requires parameter '{name}'")
        v = float(params[name])
        if not math.isfinite(v) or (lo is not None and v < lo) or (hi is not None and v > hi):
            raise DomainError(f"{kind}: parameter {name}={v} out of range")
        return v

    if kind == "thermal_loss":
        eta, n_th = need("eta", 0, 1), need("n_th", 0)
        return GaussianChannelSpec(math.sqrt(eta) * eye, (1 - eta) * (n_th + 0.5) * eye)
    if kind == "pure_loss":
        eta = need("eta", 0, 1)
        return GaussianChannelSpec(math.sqrt(eta) * eye, 0.5 * (1 - eta) * eye)
    if kind == "noisy_amp":
        gain, n_th = need("gain", 1), need("n_th", 0)
        return GaussianChannelSpec(math.sqrt(gain) * eye, (gain - 1) * (n_th + 0.5) * eye)
    if kind == "quantum_limited_amp":
        gain = need("gain", 1)
        return GaussianChannelSpec(math.sqrt(gain) * eye, 0.5 * (gain - 1) * eye)
    if kind == "additive_noise":
        sigma = need("sigma", 0)
        return GaussianChannelSpec(eye.copy(), sigma**2 * eye)
    raise DomainError(f"unknown channel kind '{kind}'")


def symmetric_sqrt(cov) -> np.ndarray:
    """Symmetric square root of a PSD matrix via eigendecomposition."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T, atol=1e-12):
        raise DomainError("covariance must be a symmetric matrix")
    w, v = np.linalg.eigh(cov)
    if w.min() < -1e-12 * max(1.0, abs(w).max()):
        raise DomainError("covariance must be positive semidefinite")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def sample_gaussian(rng: np.random.Generator, cov, size: int | None = None) -> np.ndarray:
    """Zero-mean Gaussian sample(s) with covariance ``cov``."""
    root = symmetric_sqrt(cov)
    dim = root.shape[0]
    if size is None:
        return root @ rng.standard_normal(dim)
    return rng.standard_normal((size, dim)) @ root.T


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent generator for one Monte Carlo trial."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial_index),))
    return np.random.Generator(np.random.PCG64(ss))
