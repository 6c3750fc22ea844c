import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tilezeta.coding import (
    EDGE_INTERIOR,
    POSTCRITICAL,
    TILE_INTERIOR,
    CodedPoint,
    admissible_word_array,
    fixed_points,
    is_topologically_mixing,
    matrix_power_trace,
    periodic_words,
    point_of_word,
    post_point,
    shift_of_kind,
    tile_shift,
    verify_counting_identity,
)

KINDS = ("tile", "edge", "edge_color", "post")


def test_tile_shift_is_mixing(lattes2, lattes3):
    assert is_topologically_mixing(tile_shift(lattes2))
    assert is_topologically_mixing(tile_shift(lattes3))


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_trace_matches_enumeration(lattes2, kind, n):
    shift = shift_of_kind(lattes2, kind)
    A = shift.transition.astype(np.int64)
    brute = sum(
        1 for w in admissible_word_array(shift, n) if A[w[-1], w[0]]
    )
    assert matrix_power_trace(shift.transition, n) == brute == len(periodic_words(shift, n))


def test_word_array_is_sorted_and_admissible(lattes2):
    shift = tile_shift(lattes2)
    words = admissible_word_array(shift, 3)
    assert len(words) == 8 * 4 * 4
    as_tuples = [tuple(w) for w in words]
    assert as_tuples == sorted(as_tuples)
    assert all(shift.is_admissible(w) for w in as_tuples)


@pytest.mark.parametrize("k,n_max", [(2, 4), (3, 3)])
def test_counting_identity_and_total(k, n_max, lattes2, lattes3):
    rule = lattes2 if k == 2 else lattes3
    for n in range(1, n_max + 1):
        report = verify_counting_identity(rule, n)
        assert report.ok, report.failures()
        # a degree d branched cover of the sphere has d^n + 1 fixed points of f^n with multiplicity
        assert report.weighted_count == (k * k) ** n + 1


def test_counting_csv_has_pass_column(lattes2):
    text = verify_counting_identity(lattes2, 1).to_csv()
    lines = text.strip().splitlines()
    assert lines[0].endswith(",pass")
    assert all(line.endswith(",1") for line in lines[1:])


def test_fixed_points_classes_lattes2(lattes2):
    pts = fixed_points(lattes2, 1)
    got = {(p.location, p.coding(lattes2.cells, 1)) for p in pts}
    assert got == {
        (POSTCRITICAL, "P0"),
        (EDGE_INTERIOR, "eh_1_0"),
        (EDGE_INTERIOR, "ev_0_1"),
        (TILE_INTERIOR, "tf_1_1"),
        (TILE_INTERIOR, "tb_1_1"),
    }
    assert all(p.degree == 1 for p in pts)


def test_post_point_orbit(lattes2):
    cells = lattes2.cells
    for i in range(cells.m):
        x = post_point(cells, i)
        assert x.carrier(0) == cells.post_cell[i]
        assert x.image(1) == post_point(cells, cells.post_map[i])


def test_fixed_points_reject_zero():
    from tilezeta.subdivision import lattes_rule

    with pytest.raises(ValueError):
        fixed_points(lattes_rule(2), 0)


cells_letter = st.integers(min_value=0, max_value=40)


@given(st.lists(cells_letter, max_size=4), st.lists(cells_letter, min_size=1, max_size=4), st.integers(0, 3))
def test_normalization_preserves_sequence(prefix, period, reps):
    x = CodedPoint.make(prefix, period * (reps + 1))
    n = len(prefix) + 3 * len(period) * (reps + 1) + 2
    naive = (prefix + period * (n + 1))[:n]
    assert list(x.window(0, n)) == naive
    # normalized form is canonical
    assert CodedPoint.make(x.prefix, x.period) == x


@given(st.lists(cells_letter, max_size=4), st.lists(cells_letter, min_size=1, max_size=4), st.integers(0, 6), st.integers(0, 6))
def test_image_is_a_semigroup(prefix, period, i, j):
    x = CodedPoint.make(prefix, period)
    assert x.image(i).image(j) == x.image(i + j)
    assert x.image(i).window(0, 5) == x.window(i, 5)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_pullback_inverts_image(data):
    from tilezeta.subdivision import lattes_rule

    rule = lattes_rule(2)
    ts = tile_shift(rule)
    n = data.draw(st.integers(1, 3))
    words = periodic_words(ts, n)
    w = words[data.draw(st.integers(0, len(words) - 1))]
    y = point_of_word(rule, ts, (), tuple(w))
    cells = rule.cells
    cell = ts.states[w[-1]]
    x = y.pullback(cell, cells)
    assert x.image(1) == y
