import cmath
import math
import random

import pytest

from tilezeta.coding import CodedPoint, matrix_power_trace, post_point, shift_of_kind
from tilezeta.metricize import Potential
from tilezeta.subdivision import RuleError
from tilezeta.thermo import pressure, s0
from tilezeta.zeta import (
    Em_bound,
    SYSTEMS,
    Zn,
    curve_preimages,
    enumerate_Em,
    factorization_grid,
    periodic_point_sum,
    periodic_pressure_estimate,
    pressure_on_curve,
    random_vertex_sequence,
    verify_factorization,
    verify_Zn_orbit_decomposition,
    zeta_log_truncated,
)


@pytest.mark.parametrize("system", ["tile", "edge", "edge_color", "post"])
def test_zero_s_counts_periodic_words(lattes2, one, system):
    A = shift_of_kind(lattes2, system).transition
    for n in range(1, 5):
        assert Zn(lattes2, system, one, 0, n) == matrix_power_trace(A, n)
    assert Zn(lattes2, "tile", one, 0, 1) == 4


def test_degree_weighted_points(lattes2, lattes3, one):
    for n in range(1, 5):
        assert Zn(lattes2, "f", one, 0, n, "deg") == 1 + 4**n
    one3 = Potential.constant(lattes3, 1)
    for n in range(1, 3):
        assert Zn(lattes3, "f", one3, 0, n, "deg") == 1 + 9**n


@pytest.mark.parametrize("system", SYSTEMS)
def test_constant_potential_scales_terms(lattes2, one, system):
    s = 0.4 - 1.1j
    for n in range(1, 4):
        assert Zn(lattes2, system, one, s, n) == pytest.approx(cmath.exp(-s * n) * Zn(lattes2, system, one, 0, n), rel=1e-13)


def test_bad_arguments(lattes2, one):
    with pytest.raises(ValueError):
        Zn(lattes2, "nope", one, 0, 1)
    with pytest.raises(ValueError):
        Zn(lattes2, "tile", one, 0, 1, weight="2")


def test_truncation_diagnostics(lattes2, one):
    empty = zeta_log_truncated(lattes2, "tile", one, 2.0, 0)
    assert empty.log_sum == 0 and empty.zeta == 1 and empty.terms == ()
    conv = zeta_log_truncated(lattes2, "tile", one, 2.0, 6)
    assert conv.trend == "decreasing" and conv.mean_ratio < 1
    # trace(A^n) e^{-sn} <= 8 (4 e^{-s})^n
    for n, z in enumerate(conv.terms, start=1):
        assert abs(z) <= 8 * (4 * math.exp(-2.0)) ** n
    div = zeta_log_truncated(lattes2, "tile", one, math.log(4) - 0.5, 6)
    assert div.trend == "growing"
    assert div.to_csv().splitlines()[0] == "n,re_Z,im_Z,abs_Z_over_n"


def test_truncation_extends_without_changing_terms(lattes2, bump):
    a = zeta_log_truncated(lattes2, "tile", bump, 1.5 + 0.5j, 3)
    b = zeta_log_truncated(lattes2, "tile", bump, 1.5 + 0.5j, 5)
    assert b.terms[:3] == a.terms


@pytest.mark.parametrize("system", SYSTEMS)
def test_orbit_decomposition(lattes2, bump, system):
    rng = random.Random(hash(system) % 1000)
    s = complex(rng.uniform(0.5, 2.0), rng.uniform(-2, 2))
    N = 7 if system in ("tile", "f") else 8
    weight = "deg" if system == "f" else "1"
    report = verify_Zn_orbit_decomposition(lattes2, system, bump, s, N, weight)
    assert report.ok, report.max_error


def test_fixed_orbit_term(lattes2, bump):
    s = 0.9 + 0.2j
    rep = verify_Zn_orbit_decomposition(lattes2, "tile", bump, s, 1)
    # n = 1 has only d = 1: the plain sum over fixed words
    assert rep.rows[0].direct == pytest.approx(rep.rows[0].from_orbits, abs=1e-15)


def test_factorization_at_zero_is_counting(lattes2, bump):
    rep = verify_factorization(lattes2, bump, [0], 4)
    assert rep.ok
    for r in rep.rows:
        assert r.Z_deg == 1 + 4**r.n


def test_factorization_on_grid(lattes2, bump, one):
    grid = factorization_grid(s0(lattes2, bump))
    assert len(grid) == 5
    for phi in (one, bump):
        rep = verify_factorization(lattes2, phi, grid, 4)
        assert rep.ok, rep.max_error
    assert rep.to_csv().splitlines()[0].startswith("re_s,im_s,n,")


def test_factorization_lattes3(lattes3):
    phi = Potential.constant(lattes3, 1).add(lattes3, Potential.indicator(lattes3, "tf_1_1", 3))
    assert verify_factorization(lattes3, phi, [1.0 + 0.5j], 3).ok


def test_trace_route_matches_enumeration(lattes2, bump):
    for n in range(1, 6):
        for t in (-1.0, 0.5):
            total, scale = periodic_point_sum(lattes2, bump, t, n)
            assert total * math.exp(scale) == pytest.approx(Zn(lattes2, "f", bump, -t, n, "deg"), rel=1e-12)


def test_periodic_pressure_estimate(lattes2, bump):
    est = periodic_pressure_estimate(lattes2, bump, -1.0, 10)
    assert est == pytest.approx(pressure(lattes2, bump, -1.0).value, abs=1e-3)


# ---------------------------------------------------------------------------
# curve pressure


def test_curve_pressure_lattes(lattes2, lattes3):
    for rule, k in ((lattes2, 2), (lattes3, 3)):
        cp = pressure_on_curve(rule, Potential.constant(rule, 0))
        assert cp.curve == pytest.approx(math.log(k), abs=1e-12)
        assert cp.gap == pytest.approx(math.log(k), abs=1e-12)


def test_curve_gap_shift_invariant(lattes2, bump):
    base = pressure_on_curve(lattes2, bump).gap
    shifted = pressure_on_curve(lattes2, bump.add(lattes2, Potential.constant(lattes2, 5))).gap
    assert shifted == pytest.approx(base, abs=1e-12)
    assert base > 0


# ---------------------------------------------------------------------------
# E_m


def test_em_first_step_and_doubling(lattes2):
    rng = random.Random(11)
    for _ in range(10):
        q, seq = random_vertex_sequence(lattes2, 3, 10, rng)
        sizes = [len(e) for e in enumerate_Em(lattes2, 3, seq, q)]
        assert 1 <= sizes[0] <= 2
        assert all(b <= 2 * a for a, b in zip(sizes, sizes[1:]))
        assert all(size >= 1 for size in sizes)


def test_em_bound_small_level(lattes2):
    rng = random.Random(2)
    for _ in range(5):
        q, seq = random_vertex_sequence(lattes2, 14, 20, rng)
        sizes = [len(e) for e in enumerate_Em(lattes2, 14, seq, q)]
        assert all(size <= Em_bound(14, n) for n, size in enumerate(sizes, start=1))


def test_em_rejects_non_vertices(lattes2):
    cells = lattes2.cells
    q = post_point(cells, 0)
    # the fixed point inside a curve edge is interior to one m-edge at every level
    inside = CodedPoint.make((), (cells.index["eh_1_0"],))
    with pytest.raises(RuleError, match="level-m vertex"):
        enumerate_Em(lattes2, 3, [inside], q)
    with pytest.raises(ValueError):
        random_vertex_sequence(lattes2, 0, 3, random.Random(0))
