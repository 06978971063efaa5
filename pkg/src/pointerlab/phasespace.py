"""Classical phase-space layer of the pointer decomposition.

A density matrix written as a mixture ``rho = int f(G) P(G) dG`` of pointer
projectors has a weight ``f`` that obeys a Fokker-Planck equation with free
drift ``(p/m, 0)`` and the constant diffusion matrix

    D_xx = -a_I / (m a_R),   D_xp = |a|**2 / (4 m a_R),   D_pp = D.

Weights are kept in Gaussian closure (mean and covariance), which is exact for
this linear equation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .gaussian import AlphaParam, PhasePoint, pointer_amplitudes
from .numerics import (DensityMatrix, Grid, NumericalGuardError, SymMatrix2,
                       check_boundary)

ADMISSIBLE_TOL = 1e-12


class InadmissibleAlpha(ValueError):
    pass


class QuadratureError(NumericalGuardError):
    pass


@dataclass(frozen=True)
class DiffusionMatrix(SymMatrix2):
    """Pointer-center diffusion matrix; admissible when positive semidefinite."""

    @property
    def admissible(self) -> bool:
        return self.det >= -ADMISSIBLE_TOL and self.xx >= -ADMISSIBLE_TOL and self.pp >= 0


@dataclass(frozen=True)
class GaussianWeight:
    """Gaussian pointer weight ``f(G)`` with mean ``mean`` and covariance ``cov``."""

    mean: PhasePoint
    cov: SymMatrix2

    def __post_init__(self):
        ev = self.cov.eigvalsh()
        if ev[0] < -1e-12 * max(abs(ev[-1]), 1.0):
            raise ValueError(f"weight covariance is not positive semidefinite: {ev}")

    @classmethod
    def point_mass(cls, gamma: PhasePoint) -> "GaussianWeight":
        return cls(gamma, SymMatrix2(0.0, 0.0, 0.0))


def diffusion_matrix(alpha: AlphaParam, params) -> DiffusionMatrix:
    """Diffusion matrix induced on pointer centers of width ``alpha``.

    ``params`` needs ``m`` and ``D`` attributes (:class:`~pointerlab.master.ModelParams`).
    Admissibility is reported by :attr:`DiffusionMatrix.admissible`, not enforced.
    """
    m, D = params.m, params.D
    r = alpha.re
    return DiffusionMatrix(-alpha.im / (m * r), alpha.abs2 / (4 * m * r), D)


def gmatrix(t: float, dmat: SymMatrix2, m: float) -> SymMatrix2:
    """Coefficient matrix ``G(t)`` of the Fourier-space solution.

    The characteristic function of the weight evolves as

        f~(k; t) = exp(-(t/2) k^T G(t) k) f~(kx - kp t/m, kp; 0)

    with ``k = (kx, kp)`` and

        G = [[D_pp,                 -D_xp - D_pp t/2m],
             [-D_xp - D_pp t/2m,    D_xx + D_xp t/m + D_pp t**2/3m**2]].

    The signs of the t-linear terms are the ones for which this expression
    solves the transformed Fokker-Planck equation.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    off = -dmat.xp - dmat.pp * t / (2 * m)
    last = dmat.xx + dmat.xp * t / m + dmat.pp * t ** 2 / (3 * m ** 2)
    return SymMatrix2(dmat.pp, off, last)


def _shear(t, m):
    return np.array([[1.0, t / m], [0.0, 1.0]])


def _closed_form_cov(cov0: np.ndarray, dmat: SymMatrix2, m: float, t: float) -> np.ndarray:
    S = _shear(t, m)
    G = gmatrix(t, dmat, m)
    # k^T (tG) k in (kx, kp) order is the quadratic form of the diffusive
    # covariance in the conjugate order (p, -x)
    diff = t * np.array([[G.pp, -G.xp], [-G.xp, G.xx]])
    return S @ cov0 @ S.T + diff


def _ode_cov(cov0: np.ndarray, dmat: SymMatrix2, m: float, t: float) -> np.ndarray:
    A = np.array([[0.0, 1.0 / m], [0.0, 0.0]])
    Q = dmat.as_array()

    def rhs(_, y):
        S = y.reshape(2, 2)
        return (A @ S + S @ A.T + Q).ravel()

    sol = solve_ivp(rhs, (0.0, t), cov0.ravel(), method="DOP853", rtol=1e-13, atol=1e-14)
    return sol.y[:, -1].reshape(2, 2)


def evolve_weight(w0: GaussianWeight, dmat: SymMatrix2, m: float, t: float,
                  method: str = "closed") -> GaussianWeight:
    """Propagate a Gaussian weight for time ``t``.

    ``method="closed"`` uses the shear transport plus ``t G(t)``;
    ``method="ode"`` integrates ``dS/dt = A S + S A^T + D`` numerically.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    mean = PhasePoint(w0.mean.x_bar + w0.mean.p_bar * t / m, w0.mean.p_bar)
    cov0 = w0.cov.as_array()
    if t == 0:
        return GaussianWeight(mean, w0.cov)
    if method == "closed":
        cov = _closed_form_cov(cov0, dmat, m, t)
    elif method == "ode":
        cov = _ode_cov(cov0, dmat, m, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    return GaussianWeight(mean, SymMatrix2.from_array(cov))


def diffusion_sqrt(dmat: SymMatrix2, dt: float = 1.0) -> np.ndarray:
    """Symmetric square root of ``dmat * dt`` via eigendecomposition.

    Tiny negative eigenvalues from rounding are clipped, so rank-deficient
    (boundary) matrices are handled exactly.
    """
    ev, vec = np.linalg.eigh(dmat.as_array() * dt)
    scale = max(abs(ev[-1]), np.finfo(float).tiny)
    if ev[0] < -1e-10 * scale:
        raise InadmissibleAlpha(
            f"inadmissible alpha: diffusion matrix has negative eigenvalue {ev[0] / dt:.3e}")
    ev = np.where(ev < 1e-13 * scale, 0.0, ev)
    return (vec * np.sqrt(ev)) @ vec.T


def langevin_increments(dmat: SymMatrix2, dt: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` noise increments ``dX = (dxi, dpi)`` with covariance ``dmat dt``."""
    root = diffusion_sqrt(dmat, dt)
    return rng.standard_normal((size, 2)) @ root


def langevin_step(gamma: PhasePoint, dmat: SymMatrix2, m: float, dt: float,
                  rng: np.random.Generator) -> PhasePoint:
    """One Ito-Langevin step ``dG = (p/m, 0) dt + dX``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    dX = langevin_increments(dmat, dt, rng, 1)[0]
    return PhasePoint(gamma.x_bar + gamma.p_bar * dt / m + dX[0], gamma.p_bar + dX[1])


def langevin_ensemble(gammas: np.ndarray, dmat: SymMatrix2, m: float, dt: float,
                      n_steps: int, rng: np.random.Generator) -> np.ndarray:
    """Advance an ``(n, 2)`` array of centers by ``n_steps`` Langevin steps."""
    root = diffusion_sqrt(dmat, dt)
    g = np.array(gammas, dtype=float)
    for _ in range(n_steps):
        g[:, 0] += g[:, 1] * dt / m
        g += rng.standard_normal(g.shape) @ root
    return g


def _quadrature_nodes(weight: GaussianWeight, n_nodes: int, box: float):
    z, wz = np.polynomial.legendre.leggauss(n_nodes)
    z = z * box
    wz = wz * box * np.exp(-z ** 2 / 2) / np.sqrt(2 * np.pi)
    ev, vec = np.linalg.eigh(weight.cov.as_array())
    root = vec * np.sqrt(np.clip(ev, 0.0, None))
    z1, z2 = np.meshgrid(z, z, indexing="ij")
    w = np.outer(wz, wz).ravel()
    zz = np.stack([z1.ravel(), z2.ravel()])
    pts = weight.mean.as_array()[:, None] + root @ zz
    return pts[0], pts[1], w


def reconstruct_rho(weight: GaussianWeight, alpha: AlphaParam, grid: Grid,
                    n_nodes: int = 96, box: float = 6.5, trace_tol: float = 1e-6) -> DensityMatrix:
    """Mixture ``int f(G) P(G) dG`` of pointer projectors by quadrature.

    Tensor Gauss-Legendre rule with ``n_nodes`` points per axis in the
    whitened coordinates of ``weight`` over ``[-box, box]`` standard
    deviations.  Pointer states use their analytic normalization, so weight
    lost off the grid or to an under-resolved rule shows up as trace error.

    Raises
    ------
    QuadratureError
        If the unnormalized trace differs from 1 by more than ``trace_tol``.
    """
    if n_nodes < 2:
        raise ValueError("n_nodes must be >= 2")
    xb, pb, w = _quadrature_nodes(weight, n_nodes, box)
    keep = w > 1e-300
    xb, pb, w = xb[keep], pb[keep], w[keep]
    dx = grid.spacing
    chunk = max(1, 2 ** 22 // grid.n_points)
    r = np.zeros((grid.n_points, grid.n_points), dtype=complex)
    trace = 0.0
    for s in range(0, w.size, chunk):
        amps = pointer_amplitudes(grid.x, alpha, xb[s:s + chunk], pb[s:s + chunk])
        ws = w[s:s + chunk]
        r += (amps * ws[:, None]).T @ amps.conj()
        trace += float(np.sum(ws * np.sum(np.abs(amps) ** 2, axis=1)) * dx)
    if abs(trace - 1) > trace_tol:
        raise QuadratureError(
            f"under-resolved quadrature: trace error {abs(trace - 1):.3e} > {trace_tol:g}")
    r = 0.5 * (r + r.conj().T)
    rho = DensityMatrix(grid, r).normalized()
    check_boundary(grid, rho.diagonal_density(), "reconstructed density matrix")
    return rho
