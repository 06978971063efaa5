"""Pointer states and their correlation matrix.

Builds the fiducial pointer state on the default grid, fits it back, and
prints how the diffusion matrix changes as the width parameter moves away
from the fiducial value.
"""
# %%
import numpy as np

import pointerlab as pl

D, m = 1.0, 1.0
params = pl.ModelParams(m, D)
grid = pl.default_grid(D, m)
alpha = pl.fiducial_alpha(D, m)
print("fiducial alpha:", alpha.value)
print("equilibrium width sigma0:", pl.equilibrium_width(D, m))

# %%
psi = pl.make_pointer_state(grid, alpha, pl.PhasePoint(1.0, -0.5))
fit = pl.fit_gaussian(psi)
print("fitted alpha:", fit.alpha.value, " fidelity:", fit.fidelity)
print("<x>, <p>:", pl.expectation(psi, "x"), pl.expectation(psi, "p"))

C = pl.correlation_matrix(alpha)
print("correlation matrix:\n", C.as_array())
print("det C =", C.det, "(minimum uncertainty is 1/4)")

# %%
# scan alpha_R at fixed alpha_I; det D changes sign at the admissibility boundary
for scale in (0.25, 0.5, 1.0, 2.0, 4.0):
    a = pl.AlphaParam(scale * alpha.re, alpha.im)
    dm = pl.diffusion_matrix(a, params)
    print(f"alpha_R x {scale:<4}  det D = {dm.det:+.4f}  admissible = {dm.admissible}")
