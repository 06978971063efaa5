"""Three robustness criteria singling out the pointer width.

* Hilbert-Schmidt robustness: the pure-state drift closest (in HS norm) to the
  master-equation flow, and its stationary Gaussian.
* Predictability sieve: the narrowest Gaussian whose phase-space diffusion
  matrix is still positive semidefinite.
* Uncertainty proportionality: quantum covariance ``C`` proportional to the
  diffusion matrix ``D``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .gaussian import AlphaParam, correlation_matrix
from .master import ModelParams, _check_dt, _steps, liouvillian
from .numerics import (DensityMatrix, WaveFunction, _same_grid, check_boundary,
                       check_normalized, check_nyquist)
from .phasespace import diffusion_matrix


# -- Hilbert-Schmidt speed and optimal drift --------------------------------------

def projector_derivative(psi: WaveFunction, dpsi_dt: WaveFunction) -> DensityMatrix:
    """``d(psi psi^dagger)/dt = dpsi psi^dagger + psi dpsi^dagger``."""
    _same_grid(psi.grid, dpsi_dt.grid)
    a, da = psi.amplitudes, dpsi_dt.amplitudes
    outer = np.outer(da, a.conj())
    return DensityMatrix(psi.grid, outer + outer.conj().T)


def hs_speed(psi: WaveFunction, dpsi_dt: WaveFunction, params: ModelParams) -> float:
    """Hilbert-Schmidt speed ``v = sqrt(tr[(dP/dt - L P)**2])``.

    Builds dense ``N x N`` matrices; intended for grids with N <= 256.
    """
    check_normalized(psi)
    dP = projector_derivative(psi, dpsi_dt)
    LP = liouvillian(psi.projector(), params)
    diff = dP.entries - LP.entries
    return float(np.sqrt(np.sum(np.abs(diff) ** 2)) * psi.grid.spacing)


def _drift_array(a: np.ndarray, grid, m: float, D: float) -> np.ndarray:
    x, dx = grid.x, grid.spacing
    w = np.abs(a) ** 2
    norm = np.sum(w, axis=-1, keepdims=True) * dx
    mx = np.sum(x * w, axis=-1, keepdims=True) * dx / norm
    y2 = (x - mx) ** 2
    var = np.sum(y2 * w, axis=-1, keepdims=True) * dx / norm
    kin = np.fft.ifft(grid.k ** 2 / (2 * m) * np.fft.fft(a, axis=-1), axis=-1)
    return -1j * kin - 0.5 * D * (y2 - var) * a


def drift_rhs(psi: WaveFunction, params: ModelParams) -> WaveFunction:
    """Nonlinear optimal-drift wave equation right-hand side.

    ``-(i/2m) p**2 psi - (D/2) [(x - <x>)**2 - var(x)] psi``.

    This differs from :func:`general_drift` by the phase term ``i <H> psi``;
    both give the same projector derivative.
    """
    check_normalized(psi)
    check_boundary(psi.grid, np.abs(psi.amplitudes) ** 2)
    return WaveFunction(psi.grid, _drift_array(psi.amplitudes, psi.grid, params.m, params.D))


def general_drift(psi: WaveFunction, params: ModelParams) -> WaveFunction:
    """HS-optimal drift for an arbitrary generator, ``(LP) psi - <LP> psi``.

    Evaluated with the dense ``L P`` matrix.
    """
    check_normalized(psi)
    dx = psi.grid.spacing
    LP = liouvillian(psi.projector(), params).entries
    a = psi.amplitudes
    LPpsi = LP @ a * dx
    mean = np.vdot(a, LPpsi) * dx
    return WaveFunction(psi.grid, LPpsi - mean * a)


@dataclass
class DriftRun:
    times: np.ndarray
    states: list = field(default_factory=list)

    @property
    def final(self) -> WaveFunction:
        return self.states[-1]


def evolve_drift(psi0: WaveFunction, params: ModelParams, t_final: float, dt: float,
                 record_stride: int | None = None) -> DriftRun:
    """RK4 integration of :func:`drift_rhs`, renormalizing after every step.

    The step-size guard is the same as for :func:`~pointerlab.master.evolve_master`.
    """
    grid = psi0.grid
    _check_dt(dt, grid, params)
    check_normalized(psi0)
    n_steps, h = _steps(t_final, dt)
    stride = n_steps if record_stride is None else max(1, int(record_stride))
    dx = grid.spacing
    f = lambda a: _drift_array(a, grid, params.m, params.D)  # noqa: E731

    a = np.array(psi0.amplitudes)
    check_boundary(grid, np.abs(a) ** 2)
    run = DriftRun(times=[0.0], states=[psi0])
    for step in range(1, n_steps + 1):
        k1 = f(a)
        k2 = f(a + 0.5 * h * k1)
        k3 = f(a + 0.5 * h * k2)
        k4 = f(a + h * k3)
        a = a + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        a = a / np.sqrt(np.sum(np.abs(a) ** 2) * dx)
        if step % stride == 0 or step == n_steps:
            t = step * h
            check_boundary(grid, np.abs(a) ** 2, f"state at t={t:.4g}")
            check_nyquist(grid, np.abs(np.fft.fft(a)) ** 2)
            run.times.append(t)
            run.states.append(WaveFunction(grid, a))
    run.times = np.asarray(run.times)
    return run


# -- predictability sieve ------------------------------------------------------------

def det_condition(alpha: AlphaParam, params: ModelParams) -> float:
    """Quartic whose sign decides admissibility; ``q <= 0`` iff ``det D >= 0``.

    ``q = a_R**4 + 2 a_R**2 a_I**2 + 16 D m a_R a_I + a_I**4``
    """
    r, i = alpha.re, alpha.im
    return r ** 4 + 2 * r ** 2 * i ** 2 + 16 * params.D * params.m * r * i + i ** 4


INV_PHI = (np.sqrt(5) - 1) / 2


def golden_section_max(f: Callable[[float], float], a: float, b: float,
                       tol: float = 1e-10, max_iter: int = 200) -> float:
    """Maximizer of a unimodal ``f`` on ``[a, b]`` by golden-section search."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


class SieveOptimum(NamedTuple):
    alpha: AlphaParam
    phi: float
    R: float
    constraint_residual: float
    det_D: float


def _sieve_objective(phi):
    # a_R / sqrt(Dm) = R cos(phi) on the active constraint R**2 = -8 sin(2 phi)
    return np.sqrt(np.maximum(-8 * np.sin(2 * phi), 0.0)) * np.cos(phi)


def sieve_search(params: ModelParams, resolution: int = 20000, tol: float = 1e-10) -> SieveOptimum:
    """Brute-force scan plus golden-section refinement of the sieve problem.

    Maximizes ``a_R = sqrt(D m) R cos(phi)`` over ``phi`` in ``(-pi/2, 0)``
    along the boundary ``R**2 + 8 sin(2 phi) = 0`` of the admissible region.
    """
    if resolution < 10_000:
        raise ValueError("resolution must be >= 1e4 scan points")
    phis = np.linspace(-np.pi / 2, 0.0, resolution + 2)[1:-1]
    best = int(np.argmax(_sieve_objective(phis)))
    lo = phis[max(best - 1, 0)]
    hi = phis[min(best + 1, resolution - 1)]
    phi = golden_section_max(lambda p: float(_sieve_objective(p)), lo, hi, tol=tol)
    R = float(np.sqrt(-8 * np.sin(2 * phi)))
    scale = np.sqrt(params.D * params.m)
    alpha = AlphaParam.from_complex(scale * R * np.exp(1j * phi))
    return SieveOptimum(alpha, phi, R, R ** 2 + 8 * np.sin(2 * phi),
                        diffusion_matrix(alpha, params).det)


def sieve_optimize(params: ModelParams, resolution: int = 20000) -> AlphaParam:
    """Numerically optimal sieve width (see :func:`sieve_search`)."""
    return sieve_search(params, resolution).alpha


# -- uncertainty proportionality ---------------------------------------------------------

class Proportionality(NamedTuple):
    is_proportional: bool
    constant: float
    residual: float


def proportionality_check(alpha: AlphaParam, params: ModelParams, tol: float = 1e-9) -> Proportionality:
    """Test ``C = c * D`` entrywise.

    With all entries of ``D`` nonzero, the residual is the largest pairwise
    relative deviation among ``C_ij / D_ij``.  Otherwise ``c`` is the least
    squares slope and the residual is ``|C - cD| / |C|`` (Frobenius).
    """
    C = correlation_matrix(alpha)
    Dm = diffusion_matrix(alpha, params)
    c_vec = np.array([C.xx, C.xp, C.pp])
    d_vec = np.array([Dm.xx, Dm.xp, Dm.pp])
    scale = np.max(np.abs(d_vec))
    if np.all(np.abs(d_vec) > 1e-14 * scale):
        ratios = c_vec / d_vec
        const = float(np.mean(ratios))
        spread = np.max(ratios) - np.min(ratios)
        residual = float(spread / np.max(np.abs(ratios)))
    else:
        w = np.array([1.0, 2.0, 1.0])  # off-diagonal appears twice
        const = float(np.sum(w * c_vec * d_vec) / np.sum(w * d_vec ** 2))
        residual = float(np.sqrt(np.sum(w * (c_vec - const * d_vec) ** 2) / np.sum(w * c_vec ** 2)))
    return Proportionality(residual <= tol, const, residual)
