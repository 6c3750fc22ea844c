"""Counting primitive orbits by weighted length and comparing with Li.

Run with ``python demos/04_prime_orbits.py``.  Takes a few seconds.
"""

import time

from tilezeta.catalog import bump_potential
from tilezeta.counting import export_ledger, horizon_check, import_ledger, pot_report, primitive_orbits
from tilezeta.metricize import Potential
from tilezeta.subdivision import lattes_rule

rule = lattes_rule(2)
phi = bump_potential(rule)

t0 = time.perf_counter()
ledger = primitive_orbits(rule, phi, 9)
print(f"{len(ledger.records)} primitive orbits up to period 9 in {time.perf_counter() - t0:.1f}s")
print("orbits per period:", ledger.by_period())
print("completeness horizon:", ledger.horizon, "| missed at period 10:", len(horizon_check(rule, phi, ledger)))

rep = pot_report(rule, phi, [1, 2, 3, 4, 5, 6, 7, 8, 9], ledger)
print(rep.to_csv())
print(rep.summary())

# with a constant potential every length is an integer multiple of the period
const = primitive_orbits(rule, Potential.constant(rule, 1), 6)
print(pot_report(rule, Potential.constant(rule, 1), [3, 6], const).summary())

text = export_ledger(ledger, rule)
print("ledger export:", len(text) // 1024, "KiB; round trip exact:", import_ledger(text, rule) == ledger)
