import numpy as np
import pytest

from pointerlab import (AlphaParam, Grid, ModelParams, NoiseSpec, PhasePoint, StepSizeError,
                        WaveFunction, derive_seed, diffusion_matrix, ensemble_average,
                        evolve_drift, fiducial_alpha, hs_distance, make_pointer_state, qsd_step,
                        run_ensemble, run_trajectory, sample_dz, InadmissibleAlpha, cat_state,
                        equilibrium_width)
from pointerlab.qsd import (_em_step, bootstrap_hs_bound, localization_half_time, max_qsd_dt)

P = ModelParams(1.0, 1.0)
FID = fiducial_alpha(1, 1)


def test_noise_spec_validation():
    with pytest.raises(ValueError, match="noise mode"):
        NoiseSpec(mode="colored")
    with pytest.raises(ValueError, match="requires alpha"):
        NoiseSpec(mode="alpha_general")
    with pytest.raises(InadmissibleAlpha):
        NoiseSpec(mode="alpha_general", alpha=AlphaParam(1.0, 0.0))
    with pytest.raises(ValueError, match="64-bit"):
        NoiseSpec(seed=-1)
    with pytest.raises(ValueError):
        NoiseSpec(D=-1.0)


def test_derive_seed():
    a = [derive_seed(7, i) for i in range(100)]
    assert len(set(a)) == 100
    assert a == [derive_seed(7, i) for i in range(100)]
    assert derive_seed(8, 0) != a[0]
    assert all(0 <= s < 2 ** 64 for s in a)


@pytest.mark.parametrize("mode", ["standard", "alpha_general"])
def test_noise_moments(mode):
    n, dt = 200_000, 1e-3
    spec = NoiseSpec(mode=mode, D=1.0, alpha=FID)
    dz = sample_dz(spec, dt, np.random.default_rng(1), size=n)
    assert abs(dz.mean()) <= 3 * np.sqrt(dt / n)
    assert abs(np.mean(np.abs(dz) ** 2) - dt) <= 3 * dt * np.sqrt(2 / n)
    assert abs(np.mean(dz ** 2)) <= 3 * dt * np.sqrt(2 / n)
    assert isinstance(sample_dz(spec, dt, np.random.default_rng(1)), complex)


def test_general_mode_pseudo_correlation_depends_on_alpha():
    a = AlphaParam(1.0, -2.0)
    p = ModelParams(1.0, 1.0)
    spec = NoiseSpec(mode="alpha_general", D=1.0, alpha=a)
    n, dt = 400_000, 1e-3
    dz = sample_dz(spec, dt, np.random.default_rng(2), size=n)
    d = diffusion_matrix(a, p)
    expected = (a.value ** 2 / 4 * d.xx + 1j * a.value * d.xp - d.pp) * dt
    assert abs(expected) > 0.5 * dt
    assert abs(np.mean(dz ** 2) - expected) < 3 * np.std(dz ** 2) / np.sqrt(n)
    assert abs(np.mean(np.abs(dz) ** 2) - dt) < 3 * np.std(np.abs(dz) ** 2) / np.sqrt(n)


def test_step_needs_noise_source(psi0):
    spec = NoiseSpec()
    with pytest.raises(ValueError, match="rng or dz"):
        qsd_step(psi0, P, spec, 1e-3)


def test_step_guard(psi0):
    with pytest.raises(StepSizeError, match="dt too large"):
        qsd_step(psi0, P, NoiseSpec(), 10 * max_qsd_dt(psi0.grid, P), dz=0j)


def test_closed_system_limit_is_free_propagation():
    grid = Grid(256, 24.0)
    p = ModelParams(1.0, 1e-14)
    psi = make_pointer_state(grid, AlphaParam(1.5, 0.0), PhasePoint(0, 0.5))
    out = qsd_step(psi, p, NoiseSpec(D=1e-14), 1e-3, dz=0j)
    free = np.fft.ifft(np.exp(-0.5j * 1e-3 * grid.k ** 2) * np.fft.fft(psi.amplitudes))
    assert np.allclose(out.amplitudes, free, atol=1e-12)


def test_zero_noise_follows_drift_flow(grid):
    psi = make_pointer_state(grid, FID.scaled(1.5))
    dt = 2e-4
    a = psi
    for _ in range(10):
        a = qsd_step(a, P, NoiseSpec(), dt, dz=0j)
    b = evolve_drift(psi, P, 10 * dt, dt).final
    assert hs_distance(a, b) < 1e-6


def test_step_is_normalized_and_norm_drift_is_unbiased(psi0):
    grid = psi0.grid
    rng = np.random.default_rng(4)
    M, dt = 4000, 1e-3
    dz = np.sqrt(dt / 2) * (rng.standard_normal(M) + 1j * rng.standard_normal(M))
    start = np.repeat(psi0.amplitudes[None, :], M, axis=0)
    out, n2 = _em_step(start, grid, P, dt, dz)
    assert np.allclose(np.sum(np.abs(out) ** 2, axis=1) * grid.spacing, 1)
    dn = n2 - 1
    # mean drift vanishes to O(dt^2); the fluctuation is O(sqrt(dt))
    assert abs(dn.mean()) < 3 * dn.std() / np.sqrt(M) + 10 * dt ** 2
    assert dn.std() < 5 * np.sqrt(dt)


def test_center_increment_statistics(psi0):
    grid = psi0.grid
    rng = np.random.default_rng(9)
    M, dt = 20_000, 1e-3
    dz = np.sqrt(dt / 2) * (rng.standard_normal(M) + 1j * rng.standard_normal(M))
    start = np.repeat(psi0.amplitudes[None, :], M, axis=0)
    out, _ = _em_step(start, grid, P, dt, dz)
    w = np.abs(out) ** 2
    dx_bar = np.sum(grid.x * w, axis=1) * grid.spacing
    d = diffusion_matrix(FID, P)
    assert abs(dx_bar.mean()) < 3 * np.sqrt(d.xx * dt / M)
    assert abs(dx_bar.var() / (d.xx * dt) - 1) < 3 * np.sqrt(2 / M) + 0.01


def test_strong_order_half():
    grid = Grid(128, 12.0)
    psi = make_pointer_state(grid, AlphaParam(1.0, 0.3)).amplitudes
    M, T, nref = 32, 0.1, 4096
    rng = np.random.default_rng(1)
    fine = np.sqrt(T / nref / 2) * (rng.standard_normal((nref, M)) + 1j * rng.standard_normal((nref, M)))

    def run(n):
        k, h = nref // n, T / n
        s = np.repeat(psi[None], M, 0)
        for i in range(n):
            s, _ = _em_step(s, grid, P, h, fine[i * k:(i + 1) * k].sum(0))
        return s

    ref = run(nref)
    ns = np.array([64, 128, 256, 512])
    errs = []
    for n in ns:
        ov = np.abs(np.sum(run(n).conj() * ref, axis=1) * grid.spacing) ** 2
        errs.append(np.sqrt(np.mean(2 - 2 * ov)))
    slope = np.polyfit(np.log(T / ns), np.log(errs), 1)[0]
    assert 0.35 < slope < 0.75


def test_trajectory_determinism(psi0):
    spec = NoiseSpec(seed=42)
    a = run_trajectory(psi0, P, spec, 0.05, 1e-3, record_stride=10)
    b = run_trajectory(psi0, P, spec, 0.05, 1e-3, record_stride=10)
    assert np.array_equal(a.centers, b.centers) and np.array_equal(a.gaussian_fidelity, b.gaussian_fidelity)
    assert a.seed == 42 and len(a.times) == len(a.variances) == 6
    assert np.all((a.gaussian_fidelity >= 0) & (a.gaussian_fidelity <= 1))
    c = run_trajectory(psi0, P, NoiseSpec(seed=43), 0.05, 1e-3, record_stride=10)
    assert not np.array_equal(a.centers, c.centers)


def test_ensemble_independent_of_batching_and_threads(psi0):
    spec = NoiseSpec()
    kw = dict(t_final=0.03, dt=1e-3, n_traj=10, master_seed=3, record_stride=10)
    a = run_ensemble(psi0, P, spec, batch_size=64, threads=1, **kw)
    b = run_ensemble(psi0, P, spec, batch_size=3, threads=3, **kw)
    assert np.array_equal(a.final_states, b.final_states)
    assert np.array_equal(a.stack("x"), b.stack("x"))
    single = run_trajectory(psi0, P, NoiseSpec(seed=derive_seed(3, 4)), 0.03, 1e-3, record_stride=10)
    assert np.array_equal(single.centers, a.records[4].centers)


def test_ensemble_rejects_empty(psi0):
    with pytest.raises(ValueError, match="n_traj must be >= 1"):
        run_ensemble(psi0, P, NoiseSpec(), 0.01, 1e-3, 0, 0)


def test_spec_must_match_model(psi0):
    with pytest.raises(ValueError, match="do not match"):
        run_trajectory(psi0, P, NoiseSpec(D=2.0), 0.01, 1e-3)


def test_recentering_is_an_exact_frame_change():
    grid = Grid(256, 24.0)
    psi = make_pointer_state(grid, FID, PhasePoint(0.0, 6.0))
    spec = NoiseSpec(seed=5)
    a = run_trajectory(psi, P, spec, 1.0, 5e-4, record_stride=100, recenter=True)
    assert np.any(a.offsets != 0)
    # without re-centering the same path hits the boundary
    with pytest.raises(Exception, match="boundary"):
        run_trajectory(psi, P, spec, 2.0, 5e-4, record_stride=100)
    b = run_trajectory(psi, P, spec, 0.5, 5e-4, record_stride=100)
    c = run_trajectory(psi, P, spec, 0.5, 5e-4, record_stride=100, recenter=True)
    assert np.any(c.offsets != 0)
    assert np.allclose(b.centers, c.centers, atol=1e-8)


def test_ensemble_average_and_bootstrap(psi0):
    grid = psi0.grid
    rho = ensemble_average([psi0, psi0, psi0])
    assert hs_distance(rho, psi0) < 1e-12
    assert bootstrap_hs_bound([psi0] * 5) < 1e-12
    a = make_pointer_state(grid, FID, PhasePoint(-2, 0))
    b = make_pointer_state(grid, FID, PhasePoint(2, 0))
    assert bootstrap_hs_bound([a, b] * 20) > 0
    with pytest.raises(ValueError):
        ensemble_average([psi0])
    with pytest.raises(ValueError, match="grid mismatch"):
        ensemble_average([psi0, make_pointer_state(Grid(256, 20.0), FID)])


def test_localization_half_time():
    t = np.linspace(0, 1, 11)
    fid = np.tile(1 - 0.5 * np.exp(-3 * t), (5, 1))
    assert np.isclose(localization_half_time(t, fid), 0.3)
    assert localization_half_time(t, np.ones((3, 11))) == 0.0


def test_recentering_waits_for_a_cat_to_pick_a_branch():
    s0 = equilibrium_width(1.0, 1.0)
    grid = Grid(256, 24 * s0)
    cat = cat_state(grid, fiducial_alpha(1, 1), 10 * s0)
    # seed 1010 / index 25 shifted a half-localized cat into the edge band before the guard
    ens = run_ensemble(cat, P, NoiseSpec.for_model(P), 0.3, 8e-4, n_traj=64, master_seed=1010,
                       record_stride=125, recenter=True)
    assert np.all(np.isfinite(ens.stack("x")))


def test_closed_system_step_is_free_propagation(small_grid):
    params = ModelParams(m=1.0, D=0.0)
    psi = make_pointer_state(small_grid, AlphaParam(1.0, 0.0), PhasePoint(0.0, 0.5))
    out = qsd_step(psi, params, NoiseSpec.for_model(params), 0.05, dz=0.0)
    phase = np.exp(-0.5j * 0.05 * small_grid.k ** 2)
    ref = np.fft.ifft(phase * np.fft.fft(psi.amplitudes))
    assert np.max(np.abs(out.amplitudes - ref)) < 1e-13
