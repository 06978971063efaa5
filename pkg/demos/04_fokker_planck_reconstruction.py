"""Phase-space weights versus the master equation.

A Gaussian weight over pointer centers evolves by the Fokker-Planck
equation; reconstructing the mixture reproduces the master-equation state.
"""
# %%
import time

import numpy as np

import pointerlab as pl

D, m = 1.0, 1.0
params = pl.ModelParams(m, D)
alpha = pl.fiducial_alpha(D, m)
dmat = pl.diffusion_matrix(alpha, params)
print("diffusion matrix:\n", dmat.as_array())

w0 = pl.GaussianWeight(pl.PhasePoint(0.0, 0.0), pl.SymMatrix2(0.4, 0.0, 0.4))
for t in (0.0, 0.5, 1.0):
    w = pl.evolve_weight(w0, dmat, m, t)
    print(f"t = {t}: weight covariance {w.cov.as_array().round(6).tolist()}")

# %%
grid = pl.Grid(192, 24 * pl.equilibrium_width(D, m))
t_final = 0.5
start = time.perf_counter()
rho0 = pl.reconstruct_rho(w0, alpha, grid)
rho_master = pl.evolve_master(rho0, params, t_final, pl.max_stable_dt(grid, params)).final
rho_fp = pl.reconstruct_rho(pl.evolve_weight(w0, dmat, m, t_final), alpha, grid)
print(f"HS distance at t = {t_final}: {pl.hs_distance(rho_master, rho_fp):.2e}"
      f"  ({time.perf_counter() - start:.1f} s)")
print("purity:", 1 - pl.linear_entropy(rho_master))
