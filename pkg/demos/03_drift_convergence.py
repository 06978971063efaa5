"""Norm-preserving drift pulls Gaussians onto the fiducial pointer.

Starts from Gaussians that are too narrow and too wide and follows the
fitted alpha under the drift flow.
"""
# %%
import numpy as np

import pointerlab as pl

D, m = 1.0, 1.0
params = pl.ModelParams(m, D)
grid = pl.default_grid(D, m)
fid = pl.fiducial_alpha(D, m)
dt = pl.max_stable_dt(grid, params)

for factor in (2.0, 0.5):
    psi = pl.make_pointer_state(grid, pl.AlphaParam(factor * fid.re, fid.im))
    print(f"start alpha_R x {factor}")
    for t in (0.0, 1.0, 3.0, 10.0):
        state = psi if t == 0 else pl.evolve_drift(psi, params, t, dt).final
        a = pl.fit_gaussian(state).alpha.value
        print(f"  t = {t:5.1f}  alpha = {a:.6f}  |alpha - alpha_f|/|alpha_f| = "
              f"{abs(a - fid.value) / abs(fid.value):.2e}")

# %%
# the fiducial state itself only picks up a global phase
psi0 = pl.make_pointer_state(grid, fid)
rate = pl.drift_rhs(psi0, params).amplitudes / psi0.amplitudes
print("d psi/dt / psi at the center:", rate[grid.n_points // 2],
      " expected", -1j * np.sqrt(D / (8 * m)))
