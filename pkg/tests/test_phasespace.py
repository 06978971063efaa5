import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pointerlab import (AlphaParam, DensityMatrix, GaussianWeight, Grid, InadmissibleAlpha,
                        ModelParams, PhasePoint, QuadratureError, SymMatrix2, diffusion_matrix,
                        evolve_master, evolve_weight, fiducial_alpha, gmatrix, hs_distance,
                        langevin_step, make_pointer_state, max_stable_dt, reconstruct_rho,
                        sieve_alpha, correlation_matrix)
from pointerlab.phasespace import diffusion_sqrt, langevin_ensemble, langevin_increments

from oracles import (fp_fourier_residual, gaussian_kernel, printed_gmatrix,
                     pointer_covariance)

P = ModelParams(1.0, 1.0)


def test_diffusion_matrix_fiducial():
    d = diffusion_matrix(fiducial_alpha(1, 1), P)
    assert np.allclose(d.as_array(), [[1, 0.7071068], [0.7071068, 1]], atol=1e-7)
    assert np.isclose(d.det, 0.5) and d.admissible


def test_diffusion_matrix_sieve_is_degenerate():
    d = diffusion_matrix(sieve_alpha(1, 1), P)
    assert abs(d.det) < 1e-12 and d.admissible


def test_real_alpha_is_inadmissible():
    a = AlphaParam(1.5, 0.0)
    d = diffusion_matrix(a, P)
    assert d.xx == 0
    assert np.isclose(d.det, -a.abs2 ** 2 / (16 * a.re ** 2))
    assert not d.admissible
    with pytest.raises(InadmissibleAlpha, match="inadmissible alpha"):
        diffusion_sqrt(d, 0.1)


@given(st.floats(0.05, 10), st.floats(-10, 10), st.floats(0.1, 5), st.floats(0.1, 5))
@settings(max_examples=100)
def test_diffusion_matrix_relations(re, im, m, D):
    a, p = AlphaParam(re, im), ModelParams(m, D)
    d, C = diffusion_matrix(a, p), correlation_matrix(a)
    assert np.isclose(d.xx, 2 * C.xp / m) and np.isclose(d.xp, C.pp / m) and d.pp == D
    det = -D * im / (m * re) - a.abs2 ** 2 / (16 * m ** 2 * re ** 2)
    assert np.isclose(d.det, det, rtol=1e-9, atol=1e-12 * (abs(d.xx * d.pp) + d.xp ** 2))


def test_gmatrix_values():
    d = diffusion_matrix(fiducial_alpha(1, 1), P)
    G0 = gmatrix(0.0, d, 1.0)
    assert np.allclose(G0.as_array(), [[d.pp, -d.xp], [-d.xp, d.xx]])
    G1 = gmatrix(1.0, d, 1.0)
    assert np.allclose(G1.as_array(), [[1, -1.2071068], [-1.2071068, 2.0404401]], atol=1e-7)
    with pytest.raises(ValueError):
        gmatrix(-1.0, d, 1.0)


def _f0(a, b):
    return np.exp(-0.3 * a ** 2 - 0.2 * b ** 2 + 0.05 * a * b + 0.4j * a - 0.1j * b)


@pytest.mark.parametrize("alpha,params", [
    (fiducial_alpha(1, 1), P),
    (sieve_alpha(1, 1), P),
    (AlphaParam(1.1, -2.0), ModelParams(1.3, 0.7)),
])
def test_gmatrix_solves_transformed_fp_equation(alpha, params):
    d = diffusion_matrix(alpha, params)
    for t in (0.3, 1.0, 4.0):
        for xt, pt in ((0.3, -0.7), (1.1, 0.4), (-0.5, 0.9)):
            r = fp_fourier_residual(lambda s: gmatrix(s, d, params.m), d, params.m, t, xt, pt, _f0)
            assert r <= 1e-8


def test_printed_sign_convention_fails_the_fp_equation():
    d = diffusion_matrix(fiducial_alpha(1, 1), P)
    r = fp_fourier_residual(lambda s: printed_gmatrix(s, d, 1.0), d, 1.0, 1.0, 0.3, -0.7, _f0)
    assert r > 1e-2


def test_closed_form_matches_moment_ode():
    rng = np.random.default_rng(3)
    for alpha, params in ((fiducial_alpha(1, 1), P), (sieve_alpha(2, 0.5), ModelParams(0.5, 2))):
        d = diffusion_matrix(alpha, params)
        A = rng.standard_normal((2, 2))
        w0 = GaussianWeight(PhasePoint(0.3, -1.0), SymMatrix2.from_array(A @ A.T))
        for t in np.linspace(0, 10, 11):
            c = evolve_weight(w0, d, params.m, t).cov.as_array()
            o = evolve_weight(w0, d, params.m, t, method="ode").cov.as_array()
            assert np.max(np.abs(c - o)) <= 1e-9 * max(1, np.max(np.abs(c)))
        w = evolve_weight(w0, d, params.m, 2.0)
        assert np.isclose(w.mean.x_bar, 0.3 - 2.0 / params.m) and w.mean.p_bar == -1.0


def test_weight_validation():
    with pytest.raises(ValueError, match="positive semidefinite"):
        GaussianWeight(PhasePoint(0, 0), SymMatrix2(1.0, 2.0, 1.0))
    with pytest.raises(ValueError):
        evolve_weight(GaussianWeight.point_mass(PhasePoint(0, 0)),
                      diffusion_matrix(fiducial_alpha(1, 1), P), 1.0, 1.0, method="euler")


def test_diffusion_sqrt_handles_singular_matrix():
    d = diffusion_matrix(sieve_alpha(1, 1), P)
    R = diffusion_sqrt(d, 0.01)
    assert np.allclose(R @ R, d.as_array() * 0.01, atol=1e-14)


def test_langevin_increment_covariance(rng):
    d = diffusion_matrix(fiducial_alpha(1, 1), P)
    dt = 0.01
    dX = langevin_increments(d, dt, rng, 200_000)
    cov = np.cov(dX.T)
    se = np.sqrt(2 / 200_000) * dt * np.array([[1, 1], [1, 1]]) * 1.5
    assert np.all(np.abs(cov - d.as_array() * dt) < 3 * se)


def test_langevin_step_and_ensemble_are_consistent():
    d = diffusion_matrix(fiducial_alpha(1, 1), P)
    g = PhasePoint(1.0, 2.0)
    a = langevin_step(g, d, 1.0, 0.1, np.random.default_rng(5))
    b = langevin_ensemble(np.array([[1.0, 2.0]]), d, 1.0, 0.1, 1, np.random.default_rng(5))[0]
    assert np.allclose([a.x_bar, a.p_bar], b)


def test_langevin_ensemble_tracks_closed_form():
    d = diffusion_matrix(fiducial_alpha(1, 1), P)
    rng = np.random.default_rng(11)
    g = langevin_ensemble(np.zeros((40_000, 2)), d, 1.0, 0.01, 100, rng)
    ref = evolve_weight(GaussianWeight.point_mass(PhasePoint(0, 0)), d, 1.0, 1.0).cov.as_array()
    assert np.allclose(np.cov(g.T), ref, rtol=0.05, atol=0.02)


def test_reconstruction_of_point_mass_is_the_pointer_state():
    grid = Grid(256, 24.0)
    a = fiducial_alpha(1, 1)
    w = GaussianWeight(PhasePoint(0.5, 0.2), SymMatrix2(1e-14, 0, 1e-14))
    rho = reconstruct_rho(w, a, grid, n_nodes=48)
    assert hs_distance(rho, make_pointer_state(grid, a, PhasePoint(0.5, 0.2))) < 1e-6


def test_reconstruction_matches_gaussian_oracle():
    # mixing pointer states with Gaussian weight gives a Gaussian state with covariance C + Sigma
    grid = Grid(256, 24.0)
    a = fiducial_alpha(1, 1)
    Sigma = np.array([[0.5, 0.1], [0.1, 0.4]])
    w = GaussianWeight(PhasePoint(-0.3, 0.4), SymMatrix2.from_array(Sigma))
    rho = reconstruct_rho(w, a, grid)
    V = pointer_covariance(a.re, a.im) + Sigma
    ref = DensityMatrix(grid, gaussian_kernel(grid, (-0.3, 0.4), V)).normalized()
    assert hs_distance(rho, ref) < 1e-8


def test_reconstruction_matches_master_evolution():
    grid = Grid(256, 24.0)
    a = fiducial_alpha(1, 1)
    psi = make_pointer_state(grid, a)
    t = 0.2
    rho_t = evolve_master(psi.projector(), P, t, max_stable_dt(grid, P)).final
    w = evolve_weight(GaussianWeight.point_mass(PhasePoint(0, 0)), diffusion_matrix(a, P), 1.0, t)
    assert hs_distance(reconstruct_rho(w, a, grid), rho_t) < 1e-6


def test_under_resolved_quadrature_is_reported():
    grid = Grid(256, 24.0)
    w = GaussianWeight(PhasePoint(0, 0), SymMatrix2(2.0, 0.0, 2.0))
    with pytest.raises(QuadratureError, match="under-resolved"):
        reconstruct_rho(w, fiducial_alpha(1, 1), grid, n_nodes=6)
