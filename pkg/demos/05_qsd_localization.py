"""Quantum state diffusion localizes a cat state onto one pointer.

A superposition of two fiducial pointers 10 widths apart collapses onto one
branch; the trajectory average reproduces the master-equation state.
"""
# %%
import numpy as np

import pointerlab as pl

D, m = 1.0, 1.0
params = pl.ModelParams(m, D)
sigma0 = pl.equilibrium_width(D, m)
grid = pl.Grid(256, 24 * sigma0)
alpha = pl.fiducial_alpha(D, m)
cat = pl.cat_state(grid, alpha, 10 * sigma0)

ens = pl.run_ensemble(cat, params, pl.NoiseSpec.for_model(params), 5.0, 8e-4, n_traj=40,
                      master_seed=5, record_stride=1250, recenter=True)
fid = ens.stack("gaussian_fidelity")
x = ens.stack("x")
print("time    median fidelity")
for t, f in zip(ens.times, np.median(fid, axis=0)):
    print(f"{t:5.2f}   {f:.5f}")
print("fraction on the right branch:", np.mean(x[:, -1] > 0))
print("median var x at the end:", np.median(ens.stack("variances")[:, -1]),
      " fiducial", 1 / np.sqrt(2 * D * m))

# %%
# unraveling: the ensemble average against the master equation, short time
psi = pl.make_pointer_state(grid, alpha)
t = 0.2
ens = pl.run_ensemble(psi, params, pl.NoiseSpec.for_model(params), t, 5e-4, n_traj=200,
                      master_seed=6)
rho = pl.evolve_master(psi.projector(), params, t, pl.max_stable_dt(grid, params)).final
print("HS(ensemble mean, master):", pl.hs_distance(pl.ensemble_average(ens.final_states, grid), rho))
