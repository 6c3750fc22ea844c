import random
import warnings
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from tilezeta.coding import fixed_points, point_of_word, tile_shift, tile_words_containing
from tilezeta.metricize import (
    Potential,
    VisualMetricParams,
    backward_branches,
    birkhoff_sum,
    branch_length,
    cohomology_test,
    delta,
    delta_terms,
    holder_seminorm,
    nli_test,
    point_value,
    random_coboundary,
    separation_level,
    sni_probe,
    temporal_distance,
    tile_words,
    visual_distance,
)
from tilezeta.subdivision import RuleError, build_level, lattes_rule, tile_adjacency

PARAMS = VisualMetricParams(2.0, 1.0)
RULE = lattes_rule(2)


def _points(rule, n):
    return {fp.coding(rule.cells, n): fp.point for fp in fixed_points(rule, n)}


def _oracle_separation(rule, x, y, max_level=5):
    """Least level with disjoint tiles around x and y, from the explicit complexes."""
    cells = rule.cells
    for n in range(1, max_level + 1):
        adj = tile_adjacency(build_level(rule, n))
        for a in tile_words_containing(cells, x, n):
            for b in tile_words_containing(cells, y, n):
                if a != b and b not in adj[a]:
                    return n
    return None


def test_distance_to_self_is_zero(lattes2):
    for x in _points(lattes2, 2).values():
        assert visual_distance(lattes2, x, x, PARAMS) == 0.0


def test_known_separations(lattes2):
    pts = _points(lattes2, 1)
    p0 = pts["P0"]
    assert separation_level(lattes2, p0, pts["tf_1_1"]) == 1
    assert separation_level(lattes2, p0, pts["tb_1_1"]) == 1
    assert separation_level(lattes2, p0, pts["eh_1_0"]) == 2
    assert visual_distance(lattes2, p0, pts["eh_1_0"], PARAMS) == 0.25


def test_separation_matches_adjacency_oracle(lattes2):
    pts = list(_points(lattes2, 2).values())
    for i, x in enumerate(pts):
        for y in pts[i + 1 :]:
            assert separation_level(lattes2, x, y) == _oracle_separation(lattes2, x, y)


def test_distance_is_symmetric(lattes2):
    pts = list(_points(lattes2, 2).values())
    for x in pts:
        for y in pts:
            assert visual_distance(lattes2, x, y, PARAMS) == visual_distance(lattes2, y, x, PARAMS)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_common_tile_and_disjoint_tile_bounds(seed, n):
    rng = random.Random(seed)
    cells = RULE.cells
    ts = tile_shift(RULE)

    def random_point(head):
        w = list(head)
        while len(w) < n + 3:
            w.append(rng.choice([s for s in ts.successors[w[-1]]]))
        # close the word up into a periodic one
        tail = [w[-1]]
        while not ts.transition[tail[-1], w[0]]:
            tail.append(rng.choice(ts.successors[tail[-1]]))
        word = tuple(w) + tuple(tail[1:])
        return point_of_word(RULE, ts, (), word)

    head = [rng.randrange(ts.size)]
    while len(head) < n:
        head.append(rng.choice(ts.successors[head[-1]]))
    x, y = random_point(head), random_point(head)
    if x != y:
        # both lie in the n-tile coded by head
        assert visual_distance(RULE, x, y, PARAMS) <= PARAMS.Lambda ** (-n + 1)
    z = random_point([rng.randrange(ts.size)])
    m = separation_level(RULE, x, z) if x != z else None
    if m is not None:
        wx = tile_words_containing(cells, x, m)
        wz = tile_words_containing(cells, z, m)
        adj = tile_adjacency(build_level(RULE, m))
        assert any(b != a and b not in adj[a] for a in wx for b in wz)
        assert visual_distance(RULE, x, z, PARAMS) >= PARAMS.Lambda ** (-m)


def test_metric_params_validation():
    with pytest.raises(ValueError):
        VisualMetricParams(1.0, 1.0)
    with pytest.raises(ValueError):
        VisualMetricParams(2.0, 0.0)


def test_holder_seminorm(lattes2, one):
    ind = Potential.indicator(lattes2, "tf_0_0")
    assert holder_seminorm(lattes2, one, PARAMS) == 0.0
    assert holder_seminorm(lattes2, ind, PARAMS) == 4.0
    assert holder_seminorm(lattes2, ind.scale(-3), PARAMS) == 12.0


@settings(max_examples=20, deadline=None)
@given(st.fractions(min_value=-5, max_value=5, max_denominator=7))
def test_holder_seminorm_homogeneous(c):
    phi = Potential.indicator(RULE, "tb_0_1", Fraction(3, 2))
    assert holder_seminorm(RULE, phi.scale(c), PARAMS) == pytest.approx(abs(float(c)) * holder_seminorm(RULE, phi, PARAMS))


def test_birkhoff_sums(lattes2, bump):
    x = _points(lattes2, 1)["tf_1_1"]
    assert birkhoff_sum(lattes2, bump, x, 0) == 0
    assert birkhoff_sum(lattes2, bump, x, 7) == 7 * point_value(lattes2, bump, x) == 21
    c = Potential.constant(lattes2, Fraction(5, 3))
    for fp in fixed_points(lattes2, 2):
        assert birkhoff_sum(lattes2, c, fp.point, 4) == Fraction(20, 3)


# ---------------------------------------------------------------------------
# temporal distances


def _random_pair_data(rule, phi, rng, extra=0):
    cells = rule.cells
    L = branch_length(phi) + extra
    image = rng.choice(sorted({cells.img[t] for t in cells.tile_cells}))
    branches = backward_branches(cells, L, image)
    xi, eta = rng.choice(branches), rng.choice(branches)
    start = rng.choice([t for t in cells.tile_cells if cells.carrier[t] == image])
    length = max(2, phi.symbolic_depth)

    def coding():
        w = [start]
        while len(w) < length:
            w.append(rng.choice([s for s in cells.succ[w[-1]] if cells.dim[s] == 2]))
        return tuple(w)

    return xi, eta, coding(), coding(), coding()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_temporal_distance_trivial_cases(seed):
    rng = random.Random(seed)
    phi = random_coboundary(RULE, 0, 2, rng).add(RULE, Potential.indicator(RULE, "tf_1_0", rng.randint(1, 9)))
    xi, eta, xw, yw, _ = _random_pair_data(RULE, phi, rng)
    assert temporal_distance(RULE, phi, xi, eta, xw, xw) == 0
    assert temporal_distance(RULE, phi, xi, xi, xw, yw) == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_coboundaries_have_zero_temporal_distance(seed, j):
    rng = random.Random(seed)
    phi = random_coboundary(RULE, Fraction(rng.randint(-9, 9), 4), j, rng)
    xi, eta, xw, yw, _ = _random_pair_data(RULE, phi, rng)
    assert temporal_distance(RULE, phi, xi, eta, xw, yw) == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_delta_terms_vanish_past_depth(seed):
    rng = random.Random(seed)
    phi = Potential.from_table(
        RULE, 3, {tuple(RULE.cells.names[t] for t in w): rng.randint(-5, 5) for w in tile_words(RULE.cells, 3)}
    )
    xi, _, xw, yw, _ = _random_pair_data(RULE, phi, rng, extra=3)
    terms = delta_terms(phi, xi, xw, yw)
    assert all(t == 0 for t in terms[phi.symbolic_depth :])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_delta_cocycle_identity(seed):
    rng = random.Random(seed)
    ret = Potential.from_table(
        RULE, 3, {tuple(RULE.cells.names[t] for t in w): Fraction(rng.randint(-9, 9), 2) for w in tile_words(RULE.cells, 3)}
    )
    xi, _, xw, yw, zw = _random_pair_data(RULE, ret, rng)
    assert delta(RULE, ret, xi, xw, yw) == delta(RULE, ret, xi, zw, yw) - delta(RULE, ret, xi, zw, xw)


def test_inadmissible_branch_rejected(lattes2, ret):
    cells = lattes2.cells
    a, b = next(
        (a, b) for a in cells.tile_cells for b in cells.tile_cells if cells.carrier[a] != cells.img[b]
    )
    xw = next(w for w in tile_words(cells, 3) if cells.carrier[w[0]] == cells.img[a])
    with pytest.raises(RuleError, match="inadmissible branch"):
        delta(lattes2, ret, (a, b), xw, xw)


def test_depth_one_potentials_have_zero_temporal_distance(lattes2, bump):
    # along tile codings a depth-1 value is fixed by the branch tile alone
    verdict = nli_test(lattes2, bump, samples=5000)
    assert verdict.locally_integrable_on_samples


def test_nli_verdicts(lattes2, one, ret):
    assert nli_test(lattes2, one).locally_integrable_on_samples
    rng = random.Random(7)
    assert nli_test(lattes2, random_coboundary(lattes2, 2, 2, rng)).locally_integrable_on_samples
    verdict = nli_test(lattes2, ret)
    assert not verdict.locally_integrable_on_samples
    xi, eta, xw, yw = verdict.witness
    assert temporal_distance(lattes2, ret, xi, eta, xw, yw) == verdict.value != 0
    assert verdict.describe(lattes2.cells).startswith("witness-of-non-integrability")


def test_cohomology(lattes2, one, bump):
    assert cohomology_test(lattes2, one).constant == 1
    res = cohomology_test(lattes2, bump)
    assert not res.cohomologous
    first, second = res.witness
    assert first[2] != second[2]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 2))
def test_coboundary_shift_leaves_constant(seed, j):
    rng = random.Random(seed)
    c = Fraction(rng.randint(-20, 20), rng.randint(1, 6))
    phi = random_coboundary(RULE, c, j, rng)
    assert cohomology_test(RULE, phi, n_max=3).constant == c
    base = Potential.constant(RULE, 3)
    shifted = base.add(RULE, random_coboundary(RULE, 0, j, rng))
    assert cohomology_test(RULE, shifted, n_max=3).constant == cohomology_test(RULE, base, n_max=3).constant == 3


# ---------------------------------------------------------------------------
# strong non-integrability probe


def test_sni_constant_is_zero(lattes2, one):
    report = sni_probe(lattes2, one, PARAMS, M_max=1, span=1)
    assert report.rows and all(r.ratio == 0 for r in report.rows)
    assert not report.clears_threshold


def test_sni_coboundary_vanishes_once_branches_cover_beta(lattes2):
    phi = random_coboundary(lattes2, 1, 2, random.Random(3))
    report = sni_probe(lattes2, phi, PARAMS, N0=1, M_max=1, span=2)
    assert all(r.ratio == 0 for r in report.rows if r.N >= 2)


def test_sni_witness_potential_has_positive_floor(lattes2, ret):
    report = sni_probe(lattes2, ret, PARAMS, M0=1, M_max=1, span=2)
    assert report.floor > 0
    assert report.clears_threshold
    assert report.to_csv().splitlines()[0] == "M,N,color,tile,branch_1,branch_2,ratio"


def test_sni_warns_on_large_exponent(lattes2, one):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sni_probe(lattes2, one, VisualMetricParams(3.0, 1.0), M_max=1, span=0)
    assert any("expansion estimate" in str(w.message) for w in caught)
