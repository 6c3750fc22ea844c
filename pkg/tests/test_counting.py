import math
import random
from fractions import Fraction

import pytest
from scipy import special
from hypothesis import given, settings, strategies as st

from tilezeta.catalog import bump_potential
from tilezeta.coding import CodedPoint, fixed_points, resolve_periodic
from tilezeta.counting import (
    LEDGER_VERSION,
    export_ledger,
    horizon_check,
    import_ledger,
    lattice_constant,
    li,
    pi_count,
    pot_report,
    primitive_orbits,
)
from tilezeta.metricize import Potential, birkhoff_sum, random_coboundary
from tilezeta.subdivision import RuleError, lattes_rule, parse_rule, serialize_rule
from tilezeta.thermo import s0


@pytest.fixture(scope="module")
def bump_ledger(lattes2, bump):
    return primitive_orbits(lattes2, bump, 7)


@pytest.fixture(scope="module")
def one_ledger(lattes2, one):
    return primitive_orbits(lattes2, one, 7)


def test_period_one_orbits_are_fixed_points(lattes2, bump_ledger):
    assert bump_ledger.by_period()[1] == len(fixed_points(lattes2, 1)) == 5


def test_sieve_identity(lattes2, bump_ledger):
    counts = bump_ledger.by_period()
    for n in range(1, 7):
        total = sum(d * counts[d] for d in range(1, n + 1) if n % d == 0)
        assert total == len(fixed_points(lattes2, n))


def test_weighted_sieve_reproduces_degree_count(bump_ledger):
    for n in range(1, 7):
        total = sum(
            r.period * r.degree ** (n // r.period) for r in bump_ledger.records if n % r.period == 0
        )
        assert total == 1 + 4**n


def test_lengths_agree_with_point_sums(lattes2, bump, bump_ledger):
    cells = lattes2.cells
    rng = random.Random(0)
    sample = rng.sample(bump_ledger.records, 60)
    for r in sample:
        x = CodedPoint.make((), resolve_periodic(cells, r.representative))
        assert birkhoff_sum(lattes2, bump, x, r.period) == r.length


def test_records_are_primitive_and_rotation_canonical(bump_ledger):
    seen = set()
    for r in bump_ledger.records:
        w = r.representative
        assert len(w) == r.period
        rotations = {w[i:] + w[:i] for i in range(len(w))}
        assert len(rotations) == len(w)
        assert w == min(rotations)
        assert not rotations & seen
        seen |= rotations
    keys = [(r.period, r.representative) for r in bump_ledger.records]
    assert keys == sorted(keys)


def test_ledger_independent_of_state_order(lattes2, bump_ledger):
    # reorder the tile lines, which renumbers the tile states
    text = serialize_rule(lattes2)
    head, rest = text.split("[one_tiles]\n")
    tiles, tail = rest.split("\n[", 1)
    shuffled = tiles.splitlines()
    random.Random(5).shuffle(shuffled)
    rule = parse_rule(head + "[one_tiles]\n" + "\n".join(shuffled) + "\n[" + tail, "lattes:2")
    names = lambda r: [r.cells.names[t] for t in r.cells.tile_cells]
    assert names(rule) != names(lattes2)
    ledger = primitive_orbits(rule, bump_potential(rule), 7)
    key = lambda led: sorted((r.period, r.length, r.degree, r.location) for r in led.records)
    assert key(ledger) == key(bump_ledger)


def test_threads_do_not_change_ledger(lattes2, bump, bump_ledger):
    assert primitive_orbits(lattes2, bump, 7, threads=4) == bump_ledger


# ---------------------------------------------------------------------------
# Li and pi


def test_li_values():
    assert li(2) == 0.0
    assert li(10) == pytest.approx(5.1204, abs=1e-4)
    # principal value, frozen from a 30-digit mpmath evaluation
    assert li(0.5) == pytest.approx(-1.4238348231785808, rel=1e-12)
    with pytest.raises(ValueError):
        li(0)


def test_li_against_closed_form():
    for y in (3.0, 10.0, 1e3, 1e6, 1e8):
        closed = float(special.expi(math.log(y)) - special.expi(math.log(2)))
        assert li(y) == pytest.approx(closed, rel=1e-11)


def test_li_asymptotic_ratio():
    # li(y) log y / y = 1 + 1/log y + ..., so the ratio is still 1.086 at y = 1e6
    ratio = lambda y: li(y) * math.log(y) / y
    assert ratio(1e6) == pytest.approx(1.0862652960881658, rel=1e-9)
    values = [ratio(10.0**k) for k in (6, 12, 20, 40, 80)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert abs(values[2] - 1) < 0.05
    assert abs(values[-1] - 1) < 0.01


def test_pi_count_constant(one_ledger):
    counts = one_ledger.by_period()
    for T in (0.5, 1, 2.5, 5, 7):
        assert pi_count(one_ledger, T) == sum(c for p, c in counts.items() if p <= math.floor(T))


def test_pi_count_below_minimum(bump_ledger):
    assert pi_count(bump_ledger, min(r.length for r in bump_ledger.records) - Fraction(1, 10)) == 0


@given(st.floats(0, 7), st.floats(0, 7))
def test_pi_count_monotone(a, b):
    ledger = _cached_one()
    lo, hi = sorted((a, b))
    assert pi_count(ledger, lo) <= pi_count(ledger, hi)


_CACHE = {}


def _cached_one():
    if "one" not in _CACHE:
        rule = lattes_rule(2)
        _CACHE["one"] = primitive_orbits(rule, Potential.constant(rule, 1), 7)
    return _CACHE["one"]


def test_pi_count_beyond_horizon(bump_ledger):
    assert bump_ledger.horizon == 7.0
    with pytest.raises(RuleError, match="horizon"):
        pi_count(bump_ledger, 7.5)


def test_horizon_check_finds_nothing_new(lattes2, bump):
    ledger = primitive_orbits(lattes2, bump, 5)
    assert horizon_check(lattes2, bump, ledger) == []


def test_horizon_for_signed_potential(lattes2):
    phi = Potential.constant(lattes2, -1).add(lattes2, random_coboundary(lattes2, 0, 1, random.Random(1)))
    with pytest.raises(RuleError):
        primitive_orbits(lattes2, phi, 3)
    mixed = Potential.constant(lattes2, 2).add(lattes2, random_coboundary(lattes2, 0, 1, random.Random(4), spread=1))
    ledger = primitive_orbits(lattes2, mixed, 4)
    if mixed.base_minimum() > 0:
        assert ledger.horizon == 4 * float(mixed.base_minimum())
    assert horizon_check(lattes2, mixed, ledger) == []


# ---------------------------------------------------------------------------
# report


def test_lattice_flag_constant(lattes2, one, one_ledger):
    rep = pot_report(lattes2, one, [2, 4, 6], ledger=one_ledger)
    assert rep.lattice and rep.lattice_constant == 1
    assert "lattice case" in rep.summary()


def test_lattice_flag_coboundary(lattes2):
    phi = random_coboundary(lattes2, Fraction(3, 2), 2, random.Random(9))
    ledger = primitive_orbits(lattes2, phi, 5)
    assert all(r.length == Fraction(3, 2) * r.period for r in ledger.records)
    assert lattice_constant(ledger) == Fraction(3, 2)
    assert pot_report(lattes2, phi, [3, 6], ledger=ledger).lattice


def test_non_cohomologous_ratios(lattes2, bump, bump_ledger):
    rep = pot_report(lattes2, bump, [2, 3, 4, 5, 6, 7], ledger=bump_ledger)
    assert not rep.lattice
    assert all(0 < r.ratio < math.inf for r in rep.rows)
    assert math.isfinite(rep.trend_slope)
    assert rep.to_csv().splitlines()[0] == "T,pi,Li_exp_s0T,ratio"


def test_scale_consistency(lattes2, bump, bump_ledger):
    double = bump.scale(2)
    ledger2 = primitive_orbits(lattes2, double, 7)
    assert s0(lattes2, double) == pytest.approx(s0(lattes2, bump) / 2, abs=1e-9)
    for T in (2, 3.5, 5, 7):
        assert pi_count(ledger2, 2 * T) == pi_count(bump_ledger, T)


# ---------------------------------------------------------------------------
# persistence


def test_ledger_round_trip(lattes2, bump_ledger):
    text = export_ledger(bump_ledger, lattes2)
    assert text.startswith(f"# {LEDGER_VERSION}")
    back = import_ledger(text, lattes2)
    assert back == bump_ledger
    assert export_ledger(back, lattes2) == text


def test_ledger_round_trip_keeps_note(lattes2):
    from tilezeta.counting import Ledger

    led = Ledger("lattes:2", 3, [], 1.5, "horizon from 2-step positivity, c_N = 1/2")
    assert import_ledger(export_ledger(led, lattes2), lattes2) == led


def test_ledger_bad_header(lattes2, bump_ledger):
    text = export_ledger(bump_ledger, lattes2)
    with pytest.raises(RuleError, match="version"):
        import_ledger(text.replace(LEDGER_VERSION, "tilezeta-orbit-ledger/0"), lattes2)
    lines = text.splitlines()
    with pytest.raises(RuleError, match="malformed ledger header"):
        import_ledger("\n".join([lines[0], "period,length"] + lines[2:]), lattes2)
    with pytest.raises(RuleError, match="malformed ledger row"):
        import_ledger("\n".join(lines[:2] + ["1,nope,1,1,tile-interior"]), lattes2)
