"""Pointer states of a free particle under position decoherence.

Robustness criteria for Gaussian pointer states, the phase-space diffusion of
their centers, and quantum-state-diffusion trajectories, all on a periodic
spectral grid in units with hbar = 1.
"""
from .numerics import (BoundaryContamination, DensityMatrix, Grid, NumericalBlowup,
                       NumericalGuardError, NyquistContamination, StepSizeError,
                       SymMatrix2, UnnormalizedState, WaveFunction, apply_kinetic,
                       expectation, hs_distance, linear_entropy, moments)
from .gaussian import (AlphaParam, GaussianFit, PhasePoint, cat_state,
                       correlation_matrix, equilibrium_width, fiducial_alpha,
                       fit_gaussian, make_pointer_state, sieve_alpha, superpose)
from .master import (ModelParams, entropy_rate_finite_difference, entropy_rate_initial,
                     evolve_master, liouvillian, max_stable_dt)
from .phasespace import (DiffusionMatrix, GaussianWeight, InadmissibleAlpha,
                         QuadratureError, diffusion_matrix, evolve_weight, gmatrix,
                         langevin_step, reconstruct_rho)
from .robustness import (det_condition, drift_rhs, evolve_drift, general_drift,
                         hs_speed, proportionality_check, sieve_optimize, sieve_search)
from .qsd import (NoiseSpec, TrajectoryRecord, derive_seed, ensemble_average,
                  qsd_step, run_ensemble, run_trajectory, sample_dz)

__version__ = "0.1.0"


def default_grid(D: float = 1.0, m: float = 1.0, n_points: int = 256,
                 widths: float = 20.0) -> Grid:
    """Desk-scale grid spanning ``widths`` fiducial pointer widths."""
    return Grid(n_points, widths * equilibrium_width(D, m))
