"""Temporal distances, cohomology and the strong non-integrability probe.

Run with ``python demos/03_integrability.py``.
"""

import random

from tilezeta.catalog import bump_potential, return_potential
from tilezeta.metricize import VisualMetricParams, cohomology_test, holder_seminorm, nli_test, random_coboundary, sni_probe
from tilezeta.subdivision import lattes_rule

rule = lattes_rule(2)
cells = rule.cells
params = VisualMetricParams(Lambda=2.0, alpha=1.0)

# A coboundary-plus-constant has constant periodic averages and no temporal distance.
cob = random_coboundary(rule, 2, 2, random.Random(0))
print("coboundary:", cohomology_test(rule, cob).constant, "|", nli_test(rule, cob).describe(cells))

# A depth-1 potential is not cohomologous to a constant, but along tile codings
# its value is fixed by the branch tile, so every temporal distance vanishes.
bump = bump_potential(rule)
res = cohomology_test(rule, bump)
print("bump: cohomologous =", res.cohomologous, "witness", res.witness)
print("bump:", nli_test(rule, bump).describe(cells))

# Comparing the first and third tile gives nonzero temporal distances.
ret = return_potential(rule)
print("return:", nli_test(rule, ret).describe(cells))
print("holder seminorm of return potential:", holder_seminorm(rule, ret, params))

report = sni_probe(rule, ret, params, N0=1, M0=1, M_max=1, span=2)
print(report.to_csv())
print("floor on the scanned range:", report.floor, "clears 1e-3:", report.clears_threshold)
