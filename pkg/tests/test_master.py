import numpy as np
import pytest

from pointerlab import (DensityMatrix, Grid, ModelParams, StepSizeError, BoundaryContamination,
                        entropy_rate_finite_difference, entropy_rate_initial, evolve_master,
                        expectation, fiducial_alpha, hs_distance, liouvillian,
                        make_pointer_state, max_stable_dt, AlphaParam, PhasePoint)
from pointerlab.master import _Generator

from oracles import dense_liouvillian, gaussian_kernel, master_gaussian_covariance, pointer_covariance


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(m=0.0)
    with pytest.raises(ValueError):
        ModelParams(D=-1.0)
    assert ModelParams(m=4.0, D=1.0).t_decoherence == 2.0


def test_liouvillian_matches_dense_oracle(small_grid, rng):
    params = ModelParams(m=1.7, D=0.6)
    psi = make_pointer_state(small_grid, AlphaParam(1.2, -0.4), PhasePoint(0.5, 0.3))
    rho = psi.projector()
    got = liouvillian(rho, params).entries
    ref = dense_liouvillian(rho.entries, small_grid, params.m, params.D)
    assert np.max(np.abs(got - ref)) < 1e-10 * np.max(np.abs(ref))


def test_fast_hermitian_path_equals_general(small_grid, rng):
    params = ModelParams(m=0.8, D=1.3)
    A = rng.standard_normal((128, 128)) + 1j * rng.standard_normal((128, 128))
    H = A + A.conj().T
    gen = _Generator(small_grid, params)
    assert np.allclose(gen(H), gen.general(H), atol=1e-10)
    ref = dense_liouvillian(A, small_grid, params.m, params.D)
    assert np.allclose(gen.general(A), ref, atol=1e-9)


def test_liouvillian_is_traceless_and_hermitian(small_grid, params):
    rho = make_pointer_state(small_grid, fiducial_alpha(1, 1), PhasePoint(0.4, 0.2)).projector()
    L = liouvillian(rho, params)
    assert abs(np.trace(L.entries) * small_grid.spacing) < 1e-12
    assert L.hermiticity_error() < 1e-12


def test_evolution_matches_gaussian_oracle():
    params = ModelParams(m=1.0, D=1.0)
    grid = Grid(256, 24.0)
    alpha = fiducial_alpha(1, 1)
    gamma = (0.8, 0.5)
    psi = make_pointer_state(grid, alpha, PhasePoint(*gamma))
    t = 0.5
    run = evolve_master(psi.projector(), params, t, max_stable_dt(grid, params), record_stride=200)
    V = master_gaussian_covariance(pointer_covariance(alpha.re, alpha.im), t, params.m, params.D)
    mean = (gamma[0] + gamma[1] * t / params.m, gamma[1])
    ref = DensityMatrix(grid, gaussian_kernel(grid, mean, V)).normalized()
    assert hs_distance(run.final, ref) < 1e-7
    assert not run.warnings
    obs = run.observables()
    assert np.all(np.diff(obs["purity"]) < 0)
    assert np.isclose(obs["var_x"][-1], V[0, 0], rtol=1e-7)
    assert np.isclose(obs["var_p"][-1], V[1, 1], rtol=1e-7)
    assert np.allclose(run.final.trace(), 1.0, atol=1e-10)


def test_step_size_guard(small_grid, params):
    rho = make_pointer_state(small_grid, fiducial_alpha(1, 1)).projector()
    with pytest.raises(StepSizeError, match="dt too large"):
        evolve_master(rho, params, 0.1, 10 * max_stable_dt(small_grid, params))


def test_boundary_guard_during_evolution(params):
    grid = Grid(128, 12.0)
    psi = make_pointer_state(grid, fiducial_alpha(1, 1), PhasePoint(0.0, 3.0))
    with pytest.raises(BoundaryContamination):
        evolve_master(psi.projector(), params, 2.0, max_stable_dt(grid, params), record_stride=20)


def test_non_hermitian_start_rejected(small_grid, params):
    psi = make_pointer_state(small_grid, fiducial_alpha(1, 1))
    bad = DensityMatrix(small_grid, 1j * psi.projector().entries)
    with pytest.raises(ValueError, match="Hermitian"):
        evolve_master(bad, params, 0.01, 1e-4)


def test_entropy_rate(params):
    grid = Grid(256, 24.0)
    psi = make_pointer_state(grid, AlphaParam(1.0, 0.0))
    # var x = 1 here; the generator gives dS/dt = 2 D var x
    assert np.isclose(entropy_rate_initial(psi, params), 2.0)
    fd = entropy_rate_finite_difference(psi, params)
    assert abs(fd / 2.0 - 1) < 0.01


@pytest.mark.parametrize("D", [0.0, 1e-12])
def test_closed_system_keeps_purity(small_grid, D):
    params = ModelParams(m=1.0, D=D)
    rho = make_pointer_state(small_grid, fiducial_alpha(1, 1)).projector()
    run = evolve_master(rho, params, 0.2, max_stable_dt(small_grid, params))
    assert 1 - run.final.purity() <= 1e-8


def test_coherence_decay_with_frozen_kinetics():
    # m huge: only the double commutator acts, rho_jk decays as exp(-D a^2 t / 2)
    grid = Grid(256, 24.0)
    params = ModelParams(m=1e8, D=1.0)
    a = 10 * 2 ** -0.25
    from pointerlab import cat_state
    cat = cat_state(grid, fiducial_alpha(1, 1), a)
    rho = cat.projector()
    t = 0.05
    run = evolve_master(rho, params, t, 2e-4, monitor_positivity=False)
    x = grid.x
    j, k = np.argmin(np.abs(x + a / 2)), np.argmin(np.abs(x - a / 2))
    sep = x[k] - x[j]
    ratio = abs(run.final.entries[j, k]) / abs(rho.entries[j, k])
    assert np.isclose(ratio, np.exp(-0.5 * sep ** 2 * t), rtol=1e-8)


def test_diagonal_state_feels_no_decoherence(small_grid, params):
    rho = DensityMatrix(small_grid, np.diag(np.exp(-small_grid.x ** 2)))
    gen = _Generator(small_grid, params)
    assert np.all(gen.decay[np.diag_indices(128)] == 0)
    L = gen.general(rho.entries)
    ref = dense_liouvillian(rho.entries, small_grid, params.m, 0.0)
    assert np.allclose(np.diag(L), np.diag(ref), atol=1e-12)


def test_linearity(small_grid, params):
    a = make_pointer_state(small_grid, fiducial_alpha(1, 1), PhasePoint(-1.0, 0.0)).projector()
    b = make_pointer_state(small_grid, fiducial_alpha(1, 1), PhasePoint(1.0, 0.5)).projector()
    mix = DensityMatrix(small_grid, 0.3 * a.entries + 0.7 * b.entries)
    dt = max_stable_dt(small_grid, params)
    fa, fb, fm = (evolve_master(r, params, 0.1, dt).final for r in (a, b, mix))
    assert np.max(np.abs(fm.entries - 0.3 * fa.entries - 0.7 * fb.entries)) < 1e-9


def test_moment_closure(params):
    grid = Grid(256, 24.0)
    psi = make_pointer_state(grid, fiducial_alpha(1, 1), PhasePoint(0.0, 0.4))
    dt = max_stable_dt(grid, params)
    run = evolve_master(psi.projector(), params, 0.4, dt, record_stride=50)
    obs = run.observables()
    t = obs["t"]
    p2 = obs["var_p"] + obs["mean_p"] ** 2
    assert np.allclose(np.diff(p2) / np.diff(t), params.D, rtol=1e-3)
    assert np.allclose(obs["mean_p"], 0.4, atol=1e-9)
    assert np.allclose(np.diff(obs["mean_x"]) / np.diff(t), 0.4, rtol=1e-3)
    assert np.allclose([r.hermiticity_error() for r in run.states], 0, atol=1e-10)
    assert np.allclose([r.trace() for r in run.states], 1, atol=1e-8)
