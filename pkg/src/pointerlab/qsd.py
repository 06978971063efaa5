"""Quantum state diffusion for the decohered free particle.

Ito-Schroedinger equation

    dpsi = -(i/2m) p**2 psi dt - (D/2) (x - <x>)**2 psi dt + (x - <x>) psi dz

with complex noise ``dz``.  In ``standard`` mode ``E[dz dz*] = D dt`` and
``E[dz dz] = 0``.  In ``alpha_general`` mode ``dz = (a/2) dxi + i dpi`` where
``(dxi, dpi)`` has the pointer-center diffusion covariance of width ``a``;
``E[dz dz*] = D dt`` still holds but ``E[dz dz]`` depends on ``a``.

Integration is Euler-Maruyama for the localization and noise terms with the
free kinetic propagator applied exactly in Fourier space, followed by explicit
renormalization.  Trajectories are batched as rows of a 2D array; every
trajectory owns its random stream, so results do not depend on batching.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .gaussian import AlphaParam, _fit_arrays
from .master import ModelParams, _check_dt, _steps
from .numerics import (EDGE_MASS_TOL, DensityMatrix, Grid, NumericalBlowup, WaveFunction,
                       _same_grid, check_boundary, check_normalized, edge_mass)
from .phasespace import InadmissibleAlpha, diffusion_matrix, diffusion_sqrt

MODES = ("standard", "alpha_general")
NOISE_BLOCK = 1024
NORM_COLLAPSE = 1e-6


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model for QSD trajectories.

    ``m`` is needed in ``alpha_general`` mode because the center diffusion
    matrix scales with ``1/m``.
    """

    mode: str = "standard"
    D: float = 1.0
    alpha: AlphaParam | None = None
    seed: int = 0
    m: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"noise mode must be one of {MODES}, got {self.mode!r}")
        if not (self.D >= 0 and self.m > 0):
            raise ValueError("noise D must be non-negative and m positive")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "seed", int(self.seed))
        if self.mode == "alpha_general":
            if self.alpha is None:
                raise ValueError("alpha_general mode requires alpha")
            dmat = diffusion_matrix(self.alpha, self)
            if not dmat.admissible:
                raise InadmissibleAlpha(
                    f"inadmissible alpha {self.alpha.value}: diffusion matrix det {dmat.det:.3e} < 0")

    @classmethod
    def for_model(cls, params: ModelParams, mode: str = "standard",
                  alpha: AlphaParam | None = None, seed: int = 0) -> "NoiseSpec":
        return cls(mode=mode, D=params.D, alpha=alpha, seed=seed, m=params.m)


def derive_seed(master_seed: int, index: int) -> int:
    """Independent 64-bit seed for trajectory ``index`` (SeedSequence spawning)."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _dz_from_normals(spec: NoiseSpec, dt: float, g: np.ndarray) -> np.ndarray:
    if spec.mode == "standard":
        return np.sqrt(spec.D * dt / 2) * (g[..., 0] + 1j * g[..., 1])
    root = diffusion_sqrt(diffusion_matrix(spec.alpha, spec), dt)
    dX = g @ root
    return 0.5 * spec.alpha.value * dX[..., 0] + 1j * dX[..., 1]


def sample_dz(spec: NoiseSpec, dt: float, rng: np.random.Generator, size: int | None = None):
    """Draw complex noise increments (two standard normals per increment)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    g = rng.standard_normal((1 if size is None else size, 2))
    dz = _dz_from_normals(spec, dt, g)
    return complex(dz[0]) if size is None else dz


def max_qsd_dt(grid: Grid, params: ModelParams) -> float:
    """Step guard for the explicit localization term, ``0.4 / (D L**2)``.

    The kinetic part is propagated exactly and does not constrain ``dt``.
    """
    return 0.4 / (params.D * grid.length ** 2) if params.D > 0 else np.inf


def _em_step(psi: np.ndarray, grid: Grid, params: ModelParams, dt: float,
             dz: np.ndarray, kin_phase: np.ndarray | None = None):
    """One step on a batch ``(M, n)``; returns the new batch and the norms
    squared before renormalization."""
    x, dx = grid.x, grid.spacing
    w = np.abs(psi) ** 2
    mx = np.sum(x * w, axis=-1, keepdims=True) * dx / (np.sum(w, axis=-1, keepdims=True) * dx)
    y = x - mx
    psi = psi * (1 - 0.5 * params.D * dt * y ** 2 + y * np.asarray(dz)[..., None])
    if kin_phase is None:
        kin_phase = np.exp(-0.5j * dt * grid.k ** 2 / params.m)
    psi = np.fft.ifft(kin_phase * np.fft.fft(psi, axis=-1), axis=-1)
    n2 = np.sum(np.abs(psi) ** 2, axis=-1) * dx
    if not np.all(np.isfinite(n2)) or np.min(n2) < NORM_COLLAPSE ** 2:
        raise NumericalBlowup("numerical blowup, reduce dt")
    return psi / np.sqrt(n2)[..., None], n2


def qsd_step(psi: WaveFunction, params: ModelParams, spec: NoiseSpec, dt: float,
             rng: np.random.Generator | None = None, dz: complex | None = None) -> WaveFunction:
    """Advance one state by one step.

    Either ``rng`` (noise drawn from ``spec``) or an explicit increment ``dz``
    must be supplied.
    """
    check_normalized(psi)
    check_boundary(psi.grid, np.abs(psi.amplitudes) ** 2)
    _check_dt(dt, psi.grid, params, max_qsd_dt(psi.grid, params))
    if dz is None:
        if rng is None:
            raise ValueError("supply rng or dz")
        dz = sample_dz(spec, dt, rng)
    out, _ = _em_step(psi.amplitudes[None, :], psi.grid, params, dt, np.array([dz]))
    return WaveFunction(psi.grid, out[0])


@dataclass
class TrajectoryRecord:
    """Observables of one QSD run sampled every ``record_stride`` steps.

    ``centers[:, 0]`` and ``centers[:, 1]`` are ``<x>`` and ``<p>`` in the lab
    frame; ``offsets`` is the co-moving window shift used when re-centering.
    """

    times: np.ndarray
    centers: np.ndarray
    variances: np.ndarray
    gaussian_fidelity: np.ndarray
    seed: int
    offsets: np.ndarray
    snapshots: list | None = None


def _propagate(psi0: np.ndarray, grid: Grid, params: ModelParams, specs: Sequence[NoiseSpec],
               t_final: float, dt: float, record_stride: int | None, recenter: bool,
               keep_snapshots: bool):
    n_steps, h = _steps(t_final, dt)
    stride = n_steps if record_stride is None else max(1, int(record_stride))
    record_steps = [s for s in range(n_steps + 1) if s % stride == 0 or s == n_steps]
    M, n = psi0.shape
    dx = grid.spacing
    x = grid.x
    kin_phase = np.exp(-0.5j * h * grid.k ** 2 / params.m)
    rngs = [np.random.default_rng(s.seed) for s in specs]
    spec0 = specs[0]
    shift_trigger = max(1, n // 10)

    psi = np.array(psi0, dtype=complex)
    offsets = np.zeros(M)
    out = {k: np.empty((M, len(record_steps))) for k in ("x", "p", "var", "fid", "offset")}
    snaps = [[] for _ in range(M)] if keep_snapshots else None

    def record(col, step):
        check_boundary(grid, np.abs(psi) ** 2, f"trajectory state at step {step}")
        _, _, mom, fid = _fit_arrays(psi, grid)
        out["x"][:, col] = mom["x"] + offsets
        out["p"][:, col] = mom["p"]
        out["var"][:, col] = mom["var_x"]
        out["fid"][:, col] = fid
        out["offset"][:, col] = offsets
        if keep_snapshots:
            for i in range(M):
                snaps[i].append(WaveFunction(grid, psi[i]))

    col = 0
    record(col, 0)
    col += 1
    step = 0
    while step < n_steps:
        nb = min(NOISE_BLOCK, n_steps - step)
        normals = np.stack([r.standard_normal((nb, 2)) for r in rngs])
        dz_block = _dz_from_normals(spec0, h, normals)
        for s in range(nb):
            if recenter:
                w = np.abs(psi) ** 2
                mx = np.sum(x * w, axis=-1) * dx
                shift = np.rint(mx / dx).astype(int)
                for i in np.nonzero(np.abs(shift) >= shift_trigger)[0]:
                    # a half-localized cat would push its fading branch into the edge
                    rolled = np.roll(psi[i], -shift[i])
                    if edge_mass(grid, np.abs(rolled) ** 2) > 1e-3 * EDGE_MASS_TOL:
                        continue
                    psi[i] = rolled
                    offsets[i] += shift[i] * dx
            psi, _ = _em_step(psi, grid, params, h, dz_block[:, s], kin_phase)
            step += 1
            if col < len(record_steps) and step == record_steps[col]:
                record(col, step)
                col += 1

    times = np.array(record_steps) * h
    records = [
        TrajectoryRecord(times=times,
                         centers=np.column_stack([out["x"][i], out["p"][i]]),
                         variances=out["var"][i], gaussian_fidelity=out["fid"][i],
                         seed=specs[i].seed, offsets=out["offset"][i],
                         snapshots=snaps[i] if keep_snapshots else None)
        for i in range(M)
    ]
    return records, psi, offsets


def _check_start(psi0: WaveFunction, params: ModelParams, spec: NoiseSpec, dt: float) -> None:
    check_normalized(psi0)
    check_boundary(psi0.grid, np.abs(psi0.amplitudes) ** 2, "initial state")
    _check_dt(dt, psi0.grid, params, max_qsd_dt(psi0.grid, params))
    if not (np.isclose(spec.D, params.D) and np.isclose(spec.m, params.m)):
        raise ValueError("NoiseSpec D/m do not match the model parameters")


def run_trajectory(psi0: WaveFunction, params: ModelParams, spec: NoiseSpec, t_final: float,
                   dt: float, record_stride: int | None = None, keep_snapshots: bool = False,
                   recenter: bool = False) -> TrajectoryRecord:
    """Integrate one trajectory driven by the stream seeded with ``spec.seed``.

    With ``recenter=True`` the state is rolled back by whole grid points
    whenever its center drifts more than a tenth of the box from the middle,
    unless the shifted state would put weight near the edge (a cat that has
    not yet picked a branch).
    The equation depends on ``x`` only through ``x - <x>``, so this is an
    exact change of frame on the periodic grid; recorded centers are in the
    lab frame.
    """
    _check_start(psi0, params, spec, dt)
    records, _, _ = _propagate(psi0.amplitudes[None, :], psi0.grid, params, [spec],
                               t_final, dt, record_stride, recenter, keep_snapshots)
    return records[0]


@dataclass
class Ensemble:
    grid: Grid
    records: list
    final_states: np.ndarray
    final_offsets: np.ndarray
    seeds: list = field(default_factory=list)

    def final_wavefunctions(self) -> list:
        return [WaveFunction(self.grid, a) for a in self.final_states]

    def stack(self, name: str) -> np.ndarray:
        """``(n_traj, n_records)`` array of a record attribute."""
        if name in ("x", "p"):
            return np.array([r.centers[:, 0 if name == "x" else 1] for r in self.records])
        return np.array([getattr(r, name) for r in self.records])

    @property
    def times(self) -> np.ndarray:
        return self.records[0].times


def run_ensemble(psi0: WaveFunction, params: ModelParams, spec: NoiseSpec, t_final: float,
                 dt: float, n_traj: int, master_seed: int, record_stride: int | None = None,
                 batch_size: int = 64, threads: int = 1, recenter: bool = False) -> Ensemble:
    """Run ``n_traj`` trajectories with seeds ``derive_seed(master_seed, i)``.

    Trajectories are grouped in fixed batches of ``batch_size`` and the
    batches may run on ``threads`` worker threads; output order and values
    are independent of ``threads``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    _check_start(psi0, params, spec, dt)
    specs = [replace(spec, seed=derive_seed(master_seed, i)) for i in range(n_traj)]
    batches = [specs[i:i + batch_size] for i in range(0, n_traj, batch_size)]

    def work(batch):
        start = np.repeat(psi0.amplitudes[None, :], len(batch), axis=0)
        return _propagate(start, psi0.grid, params, batch, t_final, dt, record_stride,
                          recenter, False)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, batches))
    else:
        results = [work(b) for b in batches]
    records = [r for res in results for r in res[0]]
    finals = np.concatenate([res[1] for res in results])
    offsets = np.concatenate([res[2] for res in results])
    return Ensemble(psi0.grid, records, finals, offsets, [s.seed for s in specs])


def _as_rows(states, grid: Grid | None):
    if isinstance(states, np.ndarray):
        if grid is None:
            raise ValueError("grid is required when passing an array of amplitudes")
        return np.asarray(states, dtype=complex), grid
    states = list(states)
    grid = states[0].grid
    for s in states[1:]:
        _same_grid(grid, s.grid)
    return np.array([s.amplitudes for s in states]), grid


def ensemble_average(states, grid: Grid | None = None) -> DensityMatrix:
    """Trace-normalized mean projector ``(1/M) sum psi psi^dagger``.

    ``states`` is a list of wave functions or an ``(M, n)`` amplitude array
    (then ``grid`` is required).  Rows are reduced in index order.
    """
    A, grid = _as_rows(states, grid)
    if A.shape[0] < 2:
        raise ValueError("need at least 2 states")
    r = A.T @ A.conj() / A.shape[0]
    return DensityMatrix(grid, r).normalized()


def bootstrap_hs_bound(states, grid: Grid | None = None, n_boot: int = 200,
                       rng: np.random.Generator | None = None) -> float:
    """RMS HS distance between bootstrap-resampled and full-sample mean projectors.

    Uses the Gram matrix of squared overlaps, so no resampled density matrix is
    ever formed.
    """
    A, grid = _as_rows(states, grid)
    M = A.shape[0]
    rng = np.random.default_rng(0) if rng is None else rng
    norms = np.sum(np.abs(A) ** 2, axis=1) * grid.spacing
    gram = np.abs(A.conj() @ A.T * grid.spacing) ** 2 / np.outer(norms, norms)
    d2 = np.empty(n_boot)
    for b in range(n_boot):
        counts = np.bincount(rng.integers(0, M, M), minlength=M)
        u = (counts - 1.0) / M
        d2[b] = u @ gram @ u
    return float(np.sqrt(np.mean(np.clip(d2, 0, None))))


def localization_half_time(times: np.ndarray, fidelity: np.ndarray) -> float:
    """First time the ensemble-median infidelity falls to half its initial value."""
    med = np.median(np.atleast_2d(fidelity), axis=0)
    infid = 1 - med
    if infid[0] <= 0:
        return 0.0
    hit = np.nonzero(infid <= 0.5 * infid[0])[0]
    return float(times[hit[0]]) if hit.size else float("nan")
