"""The Lattes pillow: cells, shifts and fixed points.

Run with ``python demos/01_pillow_cells.py``.
"""

from tilezeta.coding import fixed_points, is_topologically_mixing, matrix_power_trace, shift_of_kind, verify_counting_identity
from tilezeta.subdivision import Dn_and_lambda0, build_level, degree, lattes_rule, serialize_rule, validate_rule

rule = lattes_rule(2)
print(serialize_rule(rule).splitlines()[0], "...")
print("valid:", validate_rule(rule).ok, " degree:", degree(rule))

# %% level complexes: 2 * 4^n tiles, 4 * 4^n edges, and always a sphere
for n in range(5):
    lvl = build_level(rule, n)
    print(f"level {n}: {len(lvl.tiles):5d} tiles {len(lvl.edges):5d} edges  chi = {lvl.euler_characteristic}")

table, lam = Dn_and_lambda0(rule, 4)
print("D_n:", table, " expansion estimate", lam)

# %% the three shifts and the post map
for kind in ("tile", "edge", "edge_color", "post"):
    sh = shift_of_kind(rule, kind)
    traces = [matrix_power_trace(sh.transition, n) for n in range(1, 6)]
    print(f"{kind:10s} {sh.size:3d} states  mixing={is_topologically_mixing(sh)!s:5s} traces {traces}")

# %% fixed points of f and the multiplicity identity at each of them
for fp in fixed_points(rule, 1):
    print(f"{fp.location:15s} {fp.coding(rule.cells, 4):40s} deg {fp.degree}")

for n in range(1, 5):
    rep = verify_counting_identity(rule, n)
    print(f"n={n}: identity {'holds' if rep.ok else 'FAILS'}, weighted count {rep.weighted_count} = 1 + 4^{n}")
