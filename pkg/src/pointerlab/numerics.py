"""Grid-discretized states and operators for a particle on a line.

Units are hbar = 1 throughout.  Wave functions are sampled on a uniform
periodic grid ``x_j = (j - n/2) * dx`` and normalized so that
``sum |psi_j|**2 * dx == 1``.  Density matrices store the kernel
``rho(x_j, x_k)``; the trace is ``sum rho_jj * dx`` and operator products
carry one factor of ``dx`` per contracted index.

Momentum is handled spectrally: ``p`` acts as multiplication by the FFT
wavenumber ``k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

EDGE_FRACTION = 0.05
EDGE_MASS_TOL = 1e-6
NYQUIST_BAND = 0.05
NYQUIST_MASS_TOL = 1e-10
NORM_TOL = 1e-8


class NumericalGuardError(RuntimeError):
    """A numerical precondition or monitor tripped during a computation."""


class BoundaryContamination(NumericalGuardError):
    pass


class NyquistContamination(NumericalGuardError):
    pass


class UnnormalizedState(NumericalGuardError):
    pass


class StepSizeError(NumericalGuardError):
    pass


class NumericalBlowup(NumericalGuardError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform 1D grid symmetric about the origin.

    Parameters
    ----------
    n_points : int
        Number of samples (a power of two is fastest for the FFT).
    length : float
        Spatial extent of the periodic box.
    periodic : bool
        Only periodic grids are supported; the flag is kept for clarity in
        serialized configs.
    """

    n_points: int
    length: float
    periodic: bool = True

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 4:
            raise ValueError(f"n_points must be an integer >= 4, got {self.n_points}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError(f"length must be positive, got {self.length}")
        if not self.periodic:
            raise ValueError("only periodic grids are supported")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "length", float(self.length))

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @property
    def dk(self) -> float:
        return 2 * np.pi / self.length

    @property
    def k_nyquist(self) -> float:
        return np.pi / self.spacing

    @cached_property
    def x(self) -> np.ndarray:
        x = (np.arange(self.n_points) - self.n_points // 2) * self.spacing
        x.setflags(write=False)
        return x

    @cached_property
    def k(self) -> np.ndarray:
        k = 2 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)
        k.setflags(write=False)
        return k

    @cached_property
    def edge_mask(self) -> np.ndarray:
        n_edge = max(1, int(EDGE_FRACTION * self.n_points))
        mask = np.zeros(self.n_points, dtype=bool)
        mask[:n_edge] = True
        mask[-n_edge:] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        mask = np.abs(self.k) > (1 - NYQUIST_BAND) * self.k_nyquist
        mask.setflags(write=False)
        return mask


def _frozen(a, dtype=complex):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Pure state sampled on a grid."""

    grid: Grid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.shape != (self.grid.n_points,):
            raise ValueError(
                f"amplitudes have shape {amps.shape}, grid expects ({self.grid.n_points},)")
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.spacing))

    def normalized(self) -> "WaveFunction":
        nrm = self.norm()
        if nrm == 0 or not np.isfinite(nrm):
            raise NumericalBlowup(f"cannot normalize state with norm {nrm}")
        return WaveFunction(self.grid, self.amplitudes / nrm)

    def projector(self) -> "DensityMatrix":
        a = self.amplitudes
        return DensityMatrix(self.grid, np.outer(a, a.conj()))

    def overlap(self, other: "WaveFunction") -> complex:
        """Return ``<self|other>``."""
        _same_grid(self.grid, other.grid)
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.grid.spacing)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Mixed state kernel ``rho(x_j, x_k)`` on a grid."""

    grid: Grid
    entries: np.ndarray

    def __post_init__(self):
        r = _frozen(self.entries)
        n = self.grid.n_points
        if r.shape != (n, n):
            raise ValueError(f"entries have shape {r.shape}, grid expects ({n}, {n})")
        object.__setattr__(self, "entries", r)

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)) * self.grid.spacing)

    def normalized(self) -> "DensityMatrix":
        tr = self.trace()
        if tr <= 0 or not np.isfinite(tr):
            raise NumericalBlowup(f"cannot normalize density matrix with trace {tr}")
        return DensityMatrix(self.grid, self.entries / tr)

    def purity(self) -> float:
        """``tr rho**2`` (uses Hermiticity: sum of squared moduli)."""
        return float(np.sum(np.abs(self.entries) ** 2) * self.grid.spacing ** 2)

    def hermiticity_error(self) -> float:
        r = self.entries
        return float(np.max(np.abs(r - r.conj().T)))

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the operator (kernel times ``dx``), ascending."""
        r = self.entries
        return np.linalg.eigvalsh(0.5 * (r + r.conj().T) * self.grid.spacing)

    def diagonal_density(self) -> np.ndarray:
        return np.real(np.diag(self.entries))


@dataclass(frozen=True)
class SymMatrix2:
    """Symmetric 2x2 matrix over phase space ordered (x, p)."""

    xx: float
    xp: float
    pp: float

    @classmethod
    def from_array(cls, a) -> "SymMatrix2":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0, 0]), float(0.5 * (a[0, 1] + a[1, 0])), float(a[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.xx, self.xp], [self.xp, self.pp]])

    @property
    def det(self) -> float:
        return self.xx * self.pp - self.xp ** 2

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.as_array())

    def scaled(self, c: float) -> "SymMatrix2":
        return SymMatrix2(c * self.xx, c * self.xp, c * self.pp)

    def __add__(self, other: "SymMatrix2") -> "SymMatrix2":
        return SymMatrix2(self.xx + other.xx, self.xp + other.xp, self.pp + other.pp)

    def __sub__(self, other: "SymMatrix2") -> "SymMatrix2":
        return SymMatrix2(self.xx - other.xx, self.xp - other.xp, self.pp - other.pp)


State = Union[WaveFunction, DensityMatrix]


def _same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


# -- guards -----------------------------------------------------------------

def edge_mass(grid: Grid, density: np.ndarray) -> np.ndarray:
    """Probability mass in the outer bands of the grid (last axis)."""
    return np.sum(density[..., grid.edge_mask], axis=-1) * grid.spacing


def check_boundary(grid: Grid, density: np.ndarray, what: str = "state") -> None:
    mass = np.atleast_1d(edge_mass(grid, density))
    worst = float(np.max(mass))
    if worst > EDGE_MASS_TOL:
        raise BoundaryContamination(
            f"boundary contamination: {what} has mass {worst:.3e} in the outer "
            f"{EDGE_FRACTION:.0%} of the grid (limit {EDGE_MASS_TOL:g})")


def nyquist_fraction(grid: Grid, weight: np.ndarray) -> np.ndarray:
    """Fraction of a momentum density (last axis, FFT order) near ``k_max``."""
    return np.sum(weight[..., grid.nyquist_mask], axis=-1) / np.sum(weight, axis=-1)


def check_nyquist(grid: Grid, weight: np.ndarray) -> None:
    frac = float(np.max(np.atleast_1d(nyquist_fraction(grid, weight))))
    if frac > NYQUIST_MASS_TOL:
        raise NyquistContamination(
            f"Nyquist contamination: spectral weight {frac:.3e} near k_max "
            f"(limit {NYQUIST_MASS_TOL:g}); refine the grid")


def check_normalized(state: State, tol: float = NORM_TOL) -> None:
    if isinstance(state, WaveFunction):
        value = state.norm() ** 2
    else:
        value = state.trace()
    if abs(value - 1) > tol:
        raise UnnormalizedState(f"unnormalized state: norm/trace = {value!r}")


# -- spectral operators -------------------------------------------------------

def momentum_power(amplitudes: np.ndarray, grid: Grid, power: int = 1, axis: int = -1) -> np.ndarray:
    """Apply ``p**power`` spectrally along ``axis``."""
    shape = [1] * amplitudes.ndim
    shape[axis] = grid.n_points
    kp = (grid.k ** power).reshape(shape)
    return np.fft.ifft(kp * np.fft.fft(amplitudes, axis=axis), axis=axis)


def apply_kinetic(state: WaveFunction, m: float) -> WaveFunction:
    """Return ``(p**2 / 2m) psi`` via forward FFT, multiplication, inverse FFT."""
    if m <= 0:
        raise ValueError("mass must be positive")
    psi_hat = np.fft.fft(state.amplitudes)
    check_nyquist(state.grid, np.abs(psi_hat) ** 2)
    out = np.fft.ifft(state.grid.k ** 2 / (2 * m) * psi_hat)
    return WaveFunction(state.grid, out)


# -- expectations ---------------------------------------------------------------

OBSERVABLES = ("x", "p", "x2", "p2", "sym_xp")
_ALIASES = {"x^2": "x2", "x²": "x2", "p^2": "p2", "p²": "p2", "xp": "sym_xp"}


def expectation(state: State, observable: str) -> float:
    """Expectation value of ``x``, ``p``, ``x2``, ``p2`` or ``sym_xp``.

    ``sym_xp`` is the symmetrized product ``(xp + px)/2``.  Position
    observables are evaluated on the grid diagonal, momentum observables via
    spectral differentiation.  Raises :class:`UnnormalizedState`,
    :class:`BoundaryContamination` or, for momentum observables,
    :class:`NyquistContamination`.
    """
    obs = _ALIASES.get(observable, observable)
    if obs not in OBSERVABLES:
        raise ValueError(f"unknown observable {observable!r}; choose from {OBSERVABLES}")
    check_normalized(state)
    grid = state.grid
    x, dx = grid.x, grid.spacing
    if isinstance(state, WaveFunction):
        psi = state.amplitudes
        check_boundary(grid, np.abs(psi) ** 2)
        if obs == "x":
            return float(np.sum(x * np.abs(psi) ** 2) * dx)
        if obs == "x2":
            return float(np.sum(x ** 2 * np.abs(psi) ** 2) * dx)
        psi_hat = np.fft.fft(psi)
        w = np.abs(psi_hat) ** 2
        check_nyquist(grid, w)
        if obs in ("p", "p2"):
            return float(np.sum(grid.k ** (1 if obs == "p" else 2) * w) / np.sum(w))
        p_psi = np.fft.ifft(grid.k * psi_hat)
        return float(np.real(np.vdot(psi, x * p_psi)) * dx)

    r = state.entries
    diag = np.real(np.diag(r))
    check_boundary(grid, diag)
    if obs == "x":
        return float(np.sum(x * diag) * dx)
    if obs == "x2":
        return float(np.sum(x ** 2 * diag) * dx)
    r_hat = np.fft.fft(r, axis=0)
    check_nyquist(grid, np.abs(np.diag(np.fft.ifft(r_hat, axis=1))))
    power = 2 if obs == "p2" else 1
    pr = np.fft.ifft(grid.k[:, None] ** power * r_hat, axis=0)
    if obs == "sym_xp":
        return float(np.real(np.sum(x * np.diag(pr))) * dx)
    return float(np.real(np.trace(pr)) * dx)


def moments(state: WaveFunction) -> tuple[float, float, SymMatrix2]:
    """Return ``(<x>, <p>, C)`` with ``C`` the symmetrized covariance matrix."""
    mx = expectation(state, "x")
    mp = expectation(state, "p")
    cxx = expectation(state, "x2") - mx ** 2
    cpp = expectation(state, "p2") - mp ** 2
    cxp = expectation(state, "sym_xp") - mx * mp
    return mx, mp, SymMatrix2(cxx, cxp, cpp)


def batch_moments(psi: np.ndarray, grid: Grid) -> dict:
    """Unchecked moments of a batch of states, shape ``(M, n)``.

    Each row is normalized on the fly, so the result is valid for slightly
    unnormalized intermediates.
    """
    x, dx = grid.x, grid.spacing
    w = np.abs(psi) ** 2
    norm = np.sum(w, axis=-1) * dx
    mx = np.sum(x * w, axis=-1) * dx / norm
    y = x - mx[..., None]
    var = np.sum(y ** 2 * w, axis=-1) * dx / norm
    psi_hat = np.fft.fft(psi, axis=-1)
    wk = np.abs(psi_hat) ** 2
    mp = np.sum(grid.k * wk, axis=-1) / np.sum(wk, axis=-1)
    p_psi = np.fft.ifft(grid.k * psi_hat, axis=-1)
    cxp = np.real(np.sum(psi.conj() * y * p_psi, axis=-1)) * dx / norm
    return {"norm": norm, "x": mx, "p": mp, "var_x": var, "cov_xp": cxp}


# -- density-matrix diagnostics -------------------------------------------------

def linear_entropy(rho: DensityMatrix) -> float:
    """``S = 1 - tr rho**2``; zero for pure states."""
    return 1.0 - rho.purity()


def _as_kernel(a: State) -> np.ndarray:
    if isinstance(a, WaveFunction):
        return np.outer(a.amplitudes, a.amplitudes.conj())
    return a.entries


def hs_distance(a: State, b: State) -> float:
    """Hilbert-Schmidt distance ``sqrt(tr (a - b)**2)``.

    Wave functions are interpreted as their projectors, so the result is
    independent of global phases.
    """
    _same_grid(a.grid, b.grid)
    dx = a.grid.spacing
    if isinstance(a, WaveFunction) and isinstance(b, WaveFunction):
        na, nb = a.norm() ** 2, b.norm() ** 2
        ov = abs(np.vdot(a.amplitudes, b.amplitudes) * dx) ** 2
        return float(np.sqrt(max(na ** 2 + nb ** 2 - 2 * ov, 0.0)))
    diff = _as_kernel(a) - _as_kernel(b)
    return float(np.sqrt(np.sum(np.abs(diff) ** 2)) * dx)
