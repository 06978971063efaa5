"""Gaussian pointer states.

A pointer state is the Gaussian wave packet

    psi(x) = (a_R / 2 pi)**(1/4) * exp(-a (x - xb)**2 / 4 + i pb (x - xb))

with complex width parameter ``a = a_R + i a_I`` (``a_R > 0``) and phase-space
center ``(xb, pb)``.  All members of a family share ``a`` and differ by a
phase-space translation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .numerics import (Grid, SymMatrix2, WaveFunction, batch_moments,
                       check_normalized)

MIN_POINTS_PER_WIDTH = 8
CENTER_MARGIN_WIDTHS = 5.0


@dataclass(frozen=True)
class AlphaParam:
    """Complex Gaussian width parameter; ``re`` must be positive."""

    re: float
    im: float

    def __post_init__(self):
        if not (np.isfinite(self.re) and np.isfinite(self.im)):
            raise ValueError("alpha must be finite")
        if self.re <= 0:
            raise ValueError(f"alpha.re must be > 0 for a normalizable state, got {self.re}")
        object.__setattr__(self, "re", float(self.re))
        object.__setattr__(self, "im", float(self.im))

    @classmethod
    def from_complex(cls, value: complex) -> "AlphaParam":
        return cls(float(np.real(value)), float(np.imag(value)))

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @property
    def abs2(self) -> float:
        return self.re ** 2 + self.im ** 2

    def scaled(self, c: float) -> "AlphaParam":
        return AlphaParam(c * self.re, c * self.im)


@dataclass(frozen=True)
class PhasePoint:
    x_bar: float
    p_bar: float

    def __post_init__(self):
        if not (np.isfinite(self.x_bar) and np.isfinite(self.p_bar)):
            raise ValueError("phase-space point must be finite")
        object.__setattr__(self, "x_bar", float(self.x_bar))
        object.__setattr__(self, "p_bar", float(self.p_bar))

    def as_array(self) -> np.ndarray:
        return np.array([self.x_bar, self.p_bar])


ORIGIN = PhasePoint(0.0, 0.0)


def _check_model(D: float, m: float) -> None:
    if not (D > 0 and m > 0):
        raise ValueError(f"D and m must be positive, got D={D}, m={m}")


def fiducial_alpha(D: float, m: float) -> AlphaParam:
    """Stationary width of the Hilbert-Schmidt-optimal drift, ``(1 - i) sqrt(2 D m)``."""
    _check_model(D, m)
    s = np.sqrt(2 * D * m)
    return AlphaParam(s, -s)


def sieve_alpha(D: float, m: float) -> AlphaParam:
    """Width selected by the predictability sieve, ``3**(1/4) (sqrt 3 - i) sqrt(D m)``."""
    _check_model(D, m)
    c = 3 ** 0.25 * np.sqrt(D * m)
    return AlphaParam(np.sqrt(3) * c, -c)


def equilibrium_width(D: float, m: float, alpha: AlphaParam | None = None) -> float:
    """Position spread ``1/sqrt(alpha.re)`` of a pointer state.

    With ``alpha=None`` the fiducial width ``(2 D m)**(-1/4)`` is returned.
    """
    if alpha is None:
        alpha = fiducial_alpha(D, m)
    return float(alpha.re ** -0.5)


def correlation_matrix(alpha: AlphaParam) -> SymMatrix2:
    """Quantum covariance of ``(x, p)`` in a pointer state.

    ``C = (1/a_R) [[1, -a_I/2], [-a_I/2, |a|**2/4]]``; ``det C = 1/4``.
    """
    r = alpha.re
    return SymMatrix2(1.0 / r, -alpha.im / (2 * r), alpha.abs2 / (4 * r))


def pointer_amplitudes(x: np.ndarray, alpha: AlphaParam, x_bar, p_bar) -> np.ndarray:
    """Analytic pointer-state samples, broadcasting over centers.

    ``x_bar`` and ``p_bar`` may be arrays of shape ``(M,)``; the result then has
    shape ``(M, len(x))``.  No grid checks and no discrete renormalization.
    """
    xb = np.asarray(x_bar, dtype=float)[..., None]
    pb = np.asarray(p_bar, dtype=float)[..., None]
    y = x - xb
    pref = (alpha.re / (2 * np.pi)) ** 0.25
    return pref * np.exp(-alpha.value * y ** 2 / 4 + 1j * pb * y)


def make_pointer_state(grid: Grid, alpha: AlphaParam, gamma: PhasePoint = ORIGIN) -> WaveFunction:
    """Pointer state centered at ``gamma``, normalized on ``grid``.

    Raises
    ------
    ValueError
        If the width is resolved by fewer than 8 grid points, the center sits
        closer than 5 widths to the boundary, or the momentum content reaches
        the Nyquist band.
    """
    sigma = alpha.re ** -0.5
    dx = grid.spacing
    if sigma < MIN_POINTS_PER_WIDTH * dx:
        raise ValueError(
            f"unresolvable width: sigma={sigma:.4g} spans {sigma / dx:.2f} grid points "
            f"(need >= {MIN_POINTS_PER_WIDTH})")
    half = grid.length / 2
    if abs(gamma.x_bar) > half - CENTER_MARGIN_WIDTHS * sigma:
        raise ValueError(
            f"off-grid center: x_bar={gamma.x_bar:.4g} is closer than "
            f"{CENTER_MARGIN_WIDTHS:g} widths to the boundary at +-{half:.4g}")
    sigma_p = np.sqrt(correlation_matrix(alpha).pp)
    if abs(gamma.p_bar) + 8 * sigma_p > grid.k_nyquist:
        raise ValueError(
            f"unresolvable momentum: |p_bar| + 8 sigma_p = {abs(gamma.p_bar) + 8 * sigma_p:.4g} "
            f"exceeds k_max = {grid.k_nyquist:.4g}")
    amps = pointer_amplitudes(grid.x, alpha, gamma.x_bar, gamma.p_bar)
    return WaveFunction(grid, amps).normalized()


def superpose(grid: Grid, alpha: AlphaParam, centers: Sequence[PhasePoint],
              coefficients: Sequence[complex] | None = None) -> WaveFunction:
    """Normalized superposition of pointer states (e.g. a cat state)."""
    if coefficients is None:
        coefficients = np.ones(len(centers))
    amps = sum(c * make_pointer_state(grid, alpha, g).amplitudes
               for c, g in zip(coefficients, centers))
    return WaveFunction(grid, amps).normalized()


def cat_state(grid: Grid, alpha: AlphaParam, separation: float) -> WaveFunction:
    """Even superposition of two pointer states at ``+-separation/2``."""
    half = separation / 2
    return superpose(grid, alpha, [PhasePoint(-half, 0.0), PhasePoint(half, 0.0)])


class GaussianFit(NamedTuple):
    alpha: AlphaParam
    gamma: PhasePoint
    fidelity: float


def _fit_arrays(psi: np.ndarray, grid: Grid):
    mom = batch_moments(psi, grid)
    cxx, cxp = mom["var_x"], mom["cov_xp"]
    if np.any(cxx <= 0):
        raise RuntimeError("internal error: nonpositive position variance in Gaussian fit")
    a_re = 1.0 / cxx
    a_im = -2.0 * cxp / cxx
    y = grid.x - mom["x"][..., None]
    a = (a_re + 1j * a_im)[..., None]
    fit = np.exp(-a * y ** 2 / 4 + 1j * mom["p"][..., None] * y)
    dx = grid.spacing
    fit_norm = np.sum(np.abs(fit) ** 2, axis=-1) * dx
    ov = np.sum(fit.conj() * psi, axis=-1) * dx
    fidelity = np.abs(ov) ** 2 / (fit_norm * mom["norm"])
    return a_re, a_im, mom, np.clip(fidelity, 0.0, 1.0)


def batch_fidelity(psi: np.ndarray, grid: Grid) -> np.ndarray:
    """Gaussian-fit fidelity of every row of ``psi``."""
    return _fit_arrays(psi, grid)[3]


def fit_gaussian(state: WaveFunction) -> GaussianFit:
    """Moment-matched pointer state and its squared overlap with ``state``.

    The width is recovered by inverting the pointer covariance:
    ``a_R = 1/C_xx`` and ``a_I = -2 C_xp / C_xx``.
    """
    check_normalized(state)
    a_re, a_im, mom, fid = _fit_arrays(state.amplitudes, state.grid)
    return GaussianFit(AlphaParam(float(a_re), float(a_im)),
                       PhasePoint(float(mom["x"]), float(mom["p"])), float(fid))
