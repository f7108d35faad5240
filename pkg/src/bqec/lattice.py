"""Single- and multi-mode GKP codes defined by a stabilizer generator matrix S.

Quadratures are ordered x = (q_1..q_N, p_1..p_N) with symplectic form
Omega = [[0, I], [-I, 0]].  Shifts that commute with every stabilizer form the
lattice sqrt(2 pi) S^{-1} Z^{2N}; decoding picks the closest point of that
lattice to S^{-1} z.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import SQRT_2PI, SQRT_PI
from .noise import DomainError, ShiftVector, p_err

INT_TOL = 1e-9
CVP_HALF_WIDTH = 3


class UnsupportedError(ValueError):
    """Raised for inputs outside the supported mode count."""


def symplectic_form(modes: int) -> np.ndarray:
    eye = np.eye(modes)
    zero = np.zeros((modes, modes))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass
class GkpLatticeCode:
    """GKP code with stabilizer generator matrix ``S`` (rows are generators)."""

    S: np.ndarray
    logical_dims: tuple = field(default=None)

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        dim = S.shape[0]
        if S.shape != (dim, dim) or dim % 2 or dim == 0:
            raise DomainError("S must be a square 2N x 2N matrix")
        if not np.all(np.isfinite(S)):
            raise DomainError("S must be finite")
        self.S = S
        n = dim // 2
        A = S @ symplectic_form(n) @ S.T
        if n == 1:
            det = np.linalg.det(S)
            if abs(det - round(det)) > INT_TOL or round(det) == 0:
                raise DomainError(f"det(S) = {det} is not a nonzero integer")
        if np.max(np.abs(A - np.round(A))) > INT_TOL:
            raise DomainError("S Omega S^T must have integer entries")
        A = np.round(A)
        D = A[:n, n:]
        standard = (
            np.all(A[:n, :n] == 0)
            and np.all(A[n:, n:] == 0)
            and np.all(D == np.diag(np.diag(D)))
        )
        if not standard:
            raise DomainError("S Omega S^T is not in the standard form [[0, D], [-D, 0]]")
        dims = tuple(int(abs(v)) for v in np.diag(D))
        if min(dims) == 0:
            raise DomainError("S is singular")
        if self.logical_dims is not None and tuple(int(v) for v in self.logical_dims) != dims:
            raise DomainError(f"logical_dims {self.logical_dims} disagree with S (found {dims})")
        self.logical_dims = dims
        self.symplectic_gram = A
        self._S_inv = np.linalg.inv(S)
        self.decoding_lattice = SQRT_2PI * self._S_inv

    @property
    def mode_count(self) -> int:
        return self.S.shape[0] // 2


def make_square_code(d: int = 2) -> GkpLatticeCode:
    """Square-lattice GKP qudit of dimension ``d``, S = sqrt(d) I."""
    if d < 1:
        raise DomainError("logical dimension must be positive")
    return GkpLatticeCode(math.sqrt(d) * np.eye(2))


def make_hex_code(d: int = 2) -> GkpLatticeCode:
    """Hexagonal-lattice GKP qudit of dimension ``d``."""
    if d < 1:
        raise DomainError("logical dimension must be positive")
    base = np.array([[1.0, 0.0], [0.5, math.sqrt(3) / 2]])
    return GkpLatticeCode(math.sqrt(d) * math.sqrt(2 / math.sqrt(3)) * base)


def load_code(path) -> GkpLatticeCode:
    """Read a code from a text file.

    Format: ``#`` comments, then 2N rows of 2N numbers (the rows of S), then an
    optional ``dims: d_1 ... d_N`` line checked against S.
    """
    rows, dims = [], None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith("dims:"):
            try:
                dims = tuple(int(tok) for tok in line[5:].split())
            except ValueError as exc:
                raise DomainError(f"line {lineno}: bad dims entry") from exc
            continue
        try:
            rows.append([float(tok) for tok in line.replace(",", " ").split()])
        except ValueError as exc:
            raise DomainError(f"line {lineno}: non-numeric entry") from exc
    if not rows or any(len(r) != len(rows) for r in rows):
        raise DomainError("S must be given as a square block of numbers")
    return GkpLatticeCode(np.array(rows), dims)


def _lattice_window(mode_count: int) -> int:
    if mode_count <= 2:
        return 5
    if mode_count <= 4:
        return 2
    raise UnsupportedError("shortest-vector enumeration supports at most 4 modes")


def shortest_vector_length(code: GkpLatticeCode, window: int | None = None) -> float:
    n = code.mode_count
    w = _lattice_window(n) if window is None else window
    rng = np.arange(-w, w + 1)
    grid = np.array(list(itertools.product(rng, repeat=2 * n)), dtype=float)
    grid = grid[np.any(grid != 0, axis=1)]
    lengths = np.linalg.norm(grid @ code.decoding_lattice.T, axis=1)
    return float(lengths.min())


def correctable_radius(code: GkpLatticeCode) -> float:
    """Radius of the largest ball centred at the origin inside the Voronoi cell."""
    return 0.5 * shortest_vector_length(code)


@dataclass
class DecodeOutcome:
    estimated_shift: ShiftVector
    lattice_coords: np.ndarray
    residual_logical: tuple


_QUBIT_LABELS = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}


def logical_label(code: GkpLatticeCode, coords) -> tuple:
    """Per-mode logical action of the lattice shift with integer ``coords``.

    Qubit modes give 'I', 'X', 'Z' or 'Y'; other dimensions give the residue
    pair (n_q mod d, n_p mod d)."""
    coords = np.asarray(coords, dtype=np.int64)
    n = code.mode_count
    out = []
    for j, d in enumerate(code.logical_dims):
        pair = (int(coords[j] % d), int(coords[n + j] % d))
        if d == 2:
            out.append(_QUBIT_LABELS[pair])
        elif d == 1:
            out.append("I")
        else:
            out.append(pair)
    return tuple(out)


def _closest_coords(code: GkpLatticeCode, z: np.ndarray, half_width: int) -> np.ndarray:
    target = code._S_inv @ z
    center = np.round(z / SQRT_2PI)
    rng = np.arange(-half_width, half_width + 1)
    offsets = np.array(list(itertools.product(rng, repeat=z.size)), dtype=float)
    cand = center + offsets
    dist = np.sum((target - cand @ code.decoding_lattice.T) ** 2, axis=1)
    return cand[int(np.argmin(dist))].astype(np.int64)


def closest_vector_decode(code: GkpLatticeCode, syndrome_z, half_width: int = CVP_HALF_WIDTH) -> DecodeOutcome:
    """Closest-vector decoding of the stabilizer phases ``syndrome_z``.

    ``syndrome_z`` holds S xi for the true shift xi, possibly reduced mod
    sqrt(2 pi).  The lattice coordinates are relative to that representative,
    so passing the unreduced S xi yields the residual logical directly."""
    if code.mode_count > 2:
        raise UnsupportedError("exhaustive closest-vector search supports at most 2 modes")
    z = np.asarray(syndrome_z, dtype=float).reshape(-1)
    if z.size != 2 * code.mode_count or not np.all(np.isfinite(z)):
        raise DomainError("syndrome must be a finite vector of length 2N")
    coords = _closest_coords(code, z, half_width)
    shift = code._S_inv @ z - code.decoding_lattice @ coords
    return DecodeOutcome(ShiftVector.from_vector(shift), coords, logical_label(code, coords))


def classify_shift(code: GkpLatticeCode, shift) -> DecodeOutcome:
    """Decode a true shift (q..., p...) and report the residual logical error."""
    xi = shift.as_vector() if isinstance(shift, ShiftVector) else np.asarray(shift, dtype=float)
    return closest_vector_decode(code, code.S @ xi)


def square_failure_probability(sigma: float, exact: bool = True) -> float:
    """Failure probability of the square qubit code under isotropic shifts."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if exact:
        # 1 - (1-p)^2 written without cancellation
        p = p_err(sigma)
        return p * (2.0 - p)
    return math.sqrt(32.0) * sigma / math.pi * math.exp(-math.pi / (8.0 * sigma**2))


def failure_bound(code: GkpLatticeCode, sigma: float, d: int | None = None) -> float:
    """Upper bound exp(-r_c^2 / (2 sigma^2)) on the failure probability."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if d is not None and code.logical_dims != (d,) * code.mode_count:
        raise DomainError("logical dimension does not match the code")
    r = correctable_radius(code)
    return math.exp(-(r**2) / (2.0 * sigma**2))


def loss_error_bound(code: GkpLatticeCode, gamma: float, d: int | None = None) -> float:
    """Failure bound against loss ``gamma`` under amplification decoding."""
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    return failure_bound(code, math.sqrt(gamma / (1.0 - gamma)), d)


SQUARE_RADIUS = SQRT_PI / 2
