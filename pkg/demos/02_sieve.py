"""Sieve optimum: the widest admissible alpha_R.

Scans the boundary of the admissible region and compares the refined
optimum with the closed form 3**(1/4) (sqrt(3) - i) sqrt(D m).
"""
# %%
import numpy as np

import pointerlab as pl

for D, m in ((1.0, 1.0), (0.5, 2.0), (3.0, 0.1)):
    opt = pl.sieve_search(pl.ModelParams(m, D))
    closed = pl.sieve_alpha(D, m).value
    print(f"D={D:<4} m={m:<4} alpha_s = {opt.alpha.value:.7f}  closed form {closed:.7f}"
          f"  phi/pi = {opt.phi / np.pi:+.6f}  det D = {opt.det_D:.1e}")

# %%
# the objective along the boundary R**2 = -8 sin(2 phi)
phis = np.linspace(-np.pi / 2, 0, 13)[1:-1]
for phi in phis:
    R = np.sqrt(-8 * np.sin(2 * phi))
    print(f"phi = {phi:+.3f}   alpha_R / sqrt(Dm) = {R * np.cos(phi):.4f}")
