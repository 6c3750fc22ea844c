"""Pressure, s0, the four-system zeta factorization and the curve gap.

Run with ``python demos/02_pressure_and_zeta.py``.
"""

import math

import numpy as np

from tilezeta.catalog import bump_potential
from tilezeta.metricize import Potential
from tilezeta.subdivision import lattes_rule
from tilezeta.thermo import normalize, pressure, s0, spectral_gap_estimate
from tilezeta.zeta import factorization_grid, periodic_pressure_estimate, pressure_on_curve, verify_factorization, zeta_log_truncated

rule = lattes_rule(2)
one = Potential.constant(rule, 1)
phi = bump_potential(rule)  # 1 everywhere, 3 on one tile

# %% pressure from the Perron root, checked against periodic points
print("P(0)  =", pressure(rule, Potential.constant(rule, 0)).value, " log 4 =", math.log(4))
for t in (-1.0, 0.5, 1.0):
    P = pressure(rule, phi, t).value
    print(f"P({t:+.1f} phi) = {P:.9f}   periodic sum at n=12: {periodic_pressure_estimate(rule, phi, t, 12):.9f}")

s = s0(rule, phi)
print("s0(phi) =", s, "  s0(1) =", s0(rule, one))

# %% the normalized operator and its mean-zero decay
data = normalize(rule, phi, 1.0, 2)
print("gibbs weights sum to", data.gibbs.sum(), "; <m,u> =", data.m @ data.u)
fit = spectral_gap_estimate(rule, phi, depth=2)
print("fitted decay ratio", round(fit.ratio, 4), "residual", fit.residual)

# %% zeta: per-n factorization through the tile, edge-color, edge and post systems
rep = verify_factorization(rule, phi, factorization_grid(s), 5)
print("factorization holds:", rep.ok, " worst residual", rep.max_error)
acc = zeta_log_truncated(rule, "tile", phi, complex(s + 0.5), 6)
print("log zeta_tile truncated:", acc.log_sum, "terms", acc.trend)

# %% pressure on the invariant curve stays below the full pressure
for name, pot in (("zero", Potential.constant(rule, 0)), ("bump", phi)):
    cp = pressure_on_curve(rule, pot)
    print(f"{name}: P(f) = {cp.full:.6f}  P(f|C) = {cp.curve:.6f}  gap = {cp.gap:.6f}")
print("log 2 =", np.log(2))
