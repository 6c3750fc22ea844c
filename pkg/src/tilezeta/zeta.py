"""Periodic-point sums, zeta truncations and the four-system factorization.

Every system is weighted by point values: a periodic word contributes
exp(-s S_n phi(x)) where x is the point it codes and S_n phi(x) is the exact
Birkhoff sum of the canonical-tile evaluation.  This keeps the per-n
factorization exact across the tile, edge, edge-color and post systems.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .coding import (
    CodedPoint,
    boundary_fixed_points,
    edge_words_containing,
    fixed_points,
    iterate_degree,
    periodic_words,
    point_of_word,
    post_point,
    shift_of_kind,
    tile_words_containing,
)
from .metricize import Potential, _canonical, birkhoff_sum
from .subdivision import RuleError, SubdivisionRule, admissible_words
from .thermo import potential_vector, pressure, weighted_matrix

SYSTEMS = ("f", "tile", "edge", "edge_color", "post")


class _SumCache:
    """Birkhoff sums keyed by point, shared between systems."""

    def __init__(self, rule: SubdivisionRule, phi: Potential):
        self.rule, self.phi = rule, phi
        self.sums: dict = {}
        self.points: dict = {}

    def birkhoff(self, x: CodedPoint, n: int) -> Fraction:
        key = (x, n)
        if key not in self.sums:
            self.sums[key] = birkhoff_sum(self.rule, self.phi, x, n)
        return self.sums[key]

    def point(self, shift, word) -> CodedPoint:
        key = (shift.kind, word)
        if key not in self.points:
            self.points[key] = point_of_word(self.rule, shift, (), word)
        return self.points[key]


def _exp_weight(s: complex, value: Fraction) -> complex:
    return cmath.exp(-s * float(value))


def periodic_terms(rule: SubdivisionRule, system: str, phi: Potential, n: int, weight: str = "1", cache=None):
    """(point, Birkhoff sum, multiplicity weight) for every n-periodic element of a system."""
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}")
    if weight not in ("1", "deg"):
        raise ValueError("weight must be '1' or 'deg'")
    cache = cache or _SumCache(rule, phi)
    cells = rule.cells
    out = []
    if system == "f":
        for fp in fixed_points(rule, n):
            w = fp.degree if weight == "deg" else 1
            out.append((fp.point, cache.birkhoff(fp.point, n), w))
        return out
    shift = shift_of_kind(rule, system)
    for row in periodic_words(shift, n):
        word = tuple(int(v) for v in row)
        x = cache.point(shift, word)
        w = iterate_degree(cells, x, n) if weight == "deg" else 1
        out.append((x, cache.birkhoff(x, n), w))
    return out


def Zn(rule: SubdivisionRule, system: str, phi: Potential, s: complex, n: int, weight: str = "1", cache=None) -> complex:
    """Sum over n-periodic elements of weight * exp(-s S_n phi)."""
    if n == 0:
        return 0j
    return complex(sum(w * _exp_weight(s, S) for _, S, w in periodic_terms(rule, system, phi, n, weight, cache)))


@dataclass(frozen=True)
class SeriesAccumulator:
    s: complex
    terms: tuple[complex, ...]
    log_sum: complex
    trend: str
    mean_ratio: float

    @property
    def zeta(self) -> complex:
        return cmath.exp(self.log_sum)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "re_Z", "im_Z", "abs_Z_over_n"])
        for n, z in enumerate(self.terms, start=1):
            w.writerow([n, repr(z.real), repr(z.imag), repr(abs(z) / n)])
        return buf.getvalue()


def _trend(terms) -> tuple[str, float]:
    mags = [abs(z) / n for n, z in enumerate(terms, start=1)]
    if len(mags) < 3:
        return "too-short", float("nan")
    tail = mags[len(mags) - max(2, len(mags) // 3) :]
    ratios = [b / a for a, b in zip(tail, tail[1:]) if a > 0]
    if not ratios:
        return "vanishing", 0.0
    r = float(np.exp(np.mean(np.log(np.maximum(ratios, 1e-300)))))
    return ("decreasing" if r < 1 else "growing"), r


def zeta_log_truncated(rule: SubdivisionRule, system: str, phi: Potential, s: complex, N: int, weight: str = "1") -> SeriesAccumulator:
    """Sum of Z^(n)/n for n <= N with a convergence diagnostic on the tail."""
    cache = _SumCache(rule, phi)
    terms = tuple(Zn(rule, system, phi, s, n, weight, cache) for n in range(1, N + 1))
    log_sum = sum((z / n for n, z in enumerate(terms, start=1)), 0j)
    trend, r = _trend(terms)
    return SeriesAccumulator(complex(s), terms, log_sum, trend, r)


# ---------------------------------------------------------------------------
# orbit decomposition


def primitive_orbits_of(rule: SubdivisionRule, system: str, phi: Potential, d: int, weight: str = "1", cache=None):
    """Primitive orbits of exact period d: list of (length l, degree weight)."""
    cache = cache or _SumCache(rule, phi)
    cells = rule.cells
    if system == "f":
        elems = [(fp.point, fp.degree) for fp in fixed_points(rule, d)]
        key = lambda x: x
        step = lambda x: x.image()
        period_of = lambda x: len(x.period) if not x.prefix else None
    else:
        shift = shift_of_kind(rule, system)
        elems = [(tuple(int(v) for v in row), None) for row in periodic_words(shift, d)]
        key = lambda w: w
        step = lambda w: w[1:] + w[:1]
        period_of = lambda w: next(p for p in range(1, len(w) + 1) if len(w) % p == 0 and w == w[:p] * (len(w) // p))
    seen = set()
    orbits = []
    for e, deg in elems:
        if key(e) in seen or period_of(e) != d:
            continue
        orbit = [e]
        for _ in range(d - 1):
            orbit.append(step(orbit[-1]))
        seen.update(key(o) for o in orbit)
        x = e if system == "f" else cache.point(shift, e)
        length = cache.birkhoff(x, d)
        w = 1
        if weight == "deg":
            w = iterate_degree(cells, x, d)
        orbits.append((length, w))
    return orbits


@dataclass(frozen=True)
class DecompositionRow:
    n: int
    direct: complex
    from_orbits: complex

    @property
    def error(self) -> float:
        return abs(self.direct - self.from_orbits)


@dataclass(frozen=True)
class Report:
    rows: tuple
    tolerance: float

    @property
    def ok(self) -> bool:
        return all(r.error <= self.tolerance * max(1.0, abs(r.direct)) for r in self.rows)

    @property
    def max_error(self) -> float:
        return max((r.error for r in self.rows), default=0.0)


def verify_Zn_orbit_decomposition(
    rule: SubdivisionRule, system: str, phi: Potential, s: complex, N: int, weight: str = "1", tol: float = 1e-12
) -> Report:
    """Z^(n) against the sum over d | n of d times the primitive-orbit terms."""
    cache = _SumCache(rule, phi)
    orbits = {d: primitive_orbits_of(rule, system, phi, d, weight, cache) for d in range(1, N + 1)}
    rows = []
    for n in range(1, N + 1):
        direct = Zn(rule, system, phi, s, n, weight, cache)
        grouped = 0j
        for d in range(1, n + 1):
            if n % d:
                continue
            for length, w in orbits[d]:
                grouped += d * (w ** (n // d)) * _exp_weight(s, length * (n // d))
        rows.append(DecompositionRow(n, direct, grouped))
    return Report(tuple(rows), tol)


@dataclass(frozen=True)
class FactorRow:
    s: complex
    n: int
    Z_deg: complex
    Z_tile: complex
    Z_edge_color: complex
    Z_edge: complex
    Z_post: complex

    @property
    def combined(self) -> complex:
        return self.Z_tile - self.Z_edge_color + self.Z_edge + self.Z_post

    @property
    def error(self) -> float:
        return abs(self.Z_deg - self.combined)


@dataclass(frozen=True)
class FactorizationReport:
    rows: tuple[FactorRow, ...]
    tolerance: float

    @property
    def ok(self) -> bool:
        return all(r.error <= self.tolerance * max(1.0, abs(r.Z_deg)) for r in self.rows)

    @property
    def max_error(self) -> float:
        return max((r.error for r in self.rows), default=0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re_s", "im_s", "n", "Z_deg", "Z_tile", "Z_edge_color", "Z_edge", "Z_post", "abs_error"])
        for r in self.rows:
            w.writerow(
                [repr(r.s.real), repr(r.s.imag), r.n]
                + [f"{z.real!r}{z.imag:+.17g}j" for z in (r.Z_deg, r.Z_tile, r.Z_edge_color, r.Z_edge, r.Z_post)]
                + [repr(r.error)]
            )
        return buf.getvalue()


def verify_factorization(rule: SubdivisionRule, phi: Potential, s_grid, N: int, tol: float = 1e-10) -> FactorizationReport:
    """Per-n check Z_deg,f = Z_tile - Z_edge_color + Z_edge + Z_post.

    The left side comes from the fixed points of f^n with local degrees; the
    right side from the periodic words of the three shifts and the post
    points, each enumerated on its own.
    """
    cache = _SumCache(rule, phi)
    rows = []
    for s in s_grid:
        s = complex(s)
        for n in range(1, N + 1):
            rows.append(
                FactorRow(
                    s,
                    n,
                    Zn(rule, "f", phi, s, n, "deg", cache),
                    Zn(rule, "tile", phi, s, n, "1", cache),
                    Zn(rule, "edge_color", phi, s, n, "1", cache),
                    Zn(rule, "edge", phi, s, n, "1", cache),
                    Zn(rule, "post", phi, s, n, "1", cache),
                )
            )
    return FactorizationReport(tuple(rows), tol)


def factorization_grid(s0_value: float) -> list[complex]:
    """Five test points around s0: Re s in {s0 - 0.3, s0 + 0.3}, Im s in {0, 1}, plus one off-grid point."""
    return [complex(s0_value + a, b) for a in (-0.3, 0.3) for b in (0.0, 1.0)] + [complex(s0_value + 0.3, 0.5)]


# ---------------------------------------------------------------------------
# large-n periodic sums via traces


def _symbolic_periodic_sum(phi: Potential, word) -> Fraction:
    """Birkhoff sum of the symbolic potential along a periodic tile word."""
    K = phi.symbolic_depth
    n = len(word)
    ext = tuple(word) * (-(-(n + K) // n) + 1)
    return sum((phi.symbolic_value(ext[j : j + K]) for j in range(n)), Fraction(0))


def _log_trace_power(A: np.ndarray, n: int) -> complex:
    return complex(np.trace(np.linalg.matrix_power(A, n)))


def periodic_point_sum(rule: SubdivisionRule, phi: Potential, t: complex, n: int, weight: str = "deg") -> tuple[complex, float]:
    """Sum over fixed points x of f^n of w(x) exp(t S_n phi(x)) via a trace.

    Returned as (mantissa, log-scale) with the value mantissa * exp(scale).
    Interior fixed points are in bijection with periodic tile words that do
    not code a point of the curve, so the trace of the weighted tile matrix
    is corrected by removing the curve-coding words and adding the curve
    fixed points with their point values.
    """
    cells = rule.cells
    K = phi.symbolic_depth
    logw = t * potential_vector(rule, phi, K)
    W = weighted_matrix(rule, logw, K)
    scale = n * W.shift
    total = _log_trace_power(W.matrix.toarray(), n)
    for x in boundary_fixed_points(rule, n):
        for w in tile_words_containing(cells, x, n, periodic=True):
            total -= cmath.exp(t * float(_symbolic_periodic_sum(phi, w)) - scale)
        deg = iterate_degree(cells, x, n) if weight == "deg" else 1
        total += deg * cmath.exp(t * float(birkhoff_sum(rule, phi, x, n)) - scale)
    return total, scale


def periodic_pressure_estimate(rule: SubdivisionRule, phi: Potential, t: float, n: int) -> float:
    """(1/n) log of the degree-weighted periodic-point sum of exp(t S_n phi)."""
    total, scale = periodic_point_sum(rule, phi, t, n, "deg")
    return (math.log(total.real) + scale) / n


# ---------------------------------------------------------------------------
# dynamics on the curve


def edge_words(rule: SubdivisionRule, k: int):
    cells = rule.cells
    return admissible_words(lambda c: [e for e in cells.succ[c] if cells.dim[e] == 1 and cells.on_curve[e]], cells.curve_edges, k)


@dataclass(frozen=True)
class CurvePressure:
    curve: float
    full: float

    @property
    def gap(self) -> float:
        return self.full - self.curve


def pressure_on_curve(rule: SubdivisionRule, phi: Potential, t: float = 1.0) -> CurvePressure:
    """P(f|_C, t phi) from the weighted edge-word matrix, and P(f, t phi).

    Each edge k-word carries the value of its canonical tile word; the edge
    shift need not be mixing, so the spectral radius is taken directly.
    """
    cells = rule.cells
    K = phi.symbolic_depth
    words = edge_words(rule, K)
    index = {w: i for i, w in enumerate(words)}
    vals = np.array([t * float(phi.symbolic_value(_canonical(cells, w))) for w in words])
    shift = float(vals.max())
    A = np.zeros((len(words), len(words)))
    for i, w in enumerate(words):
        for e in cells.succ[w[-1]]:
            j = index.get(w[1:] + (e,))
            if j is not None:
                A[i, j] = math.exp(vals[i] - shift)
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    return CurvePressure(shift + math.log(rho), pressure(rule, phi, t).value)


# ---------------------------------------------------------------------------
# E_m


def curve_preimages(rule: SubdivisionRule, x: CodedPoint) -> list[CodedPoint]:
    """Points y on the curve with f(y) = x, in a deterministic order."""
    cells = rule.cells
    out = set()
    for e in cells.curve_edges:
        try:
            out.add(x.pullback(e, cells))
        except RuleError:
            continue
    return sorted(out)


def edge_pair(rule: SubdivisionRule, p: CodedPoint, m: int) -> list[tuple[int, ...]]:
    """The two m-edges on the curve meeting at the m-vertex p."""
    words = edge_words_containing(rule.cells, p, m)
    if len(words) != 2:
        raise RuleError("point is not a level-m vertex on the curve")
    return sorted(words)


def in_closed_word(cells, x: CodedPoint, word) -> bool:
    return all(x.carrier(i) in cells.faces[c] for i, c in enumerate(word))


def enumerate_Em(rule: SubdivisionRule, m: int, sequence, q: CodedPoint) -> list[set]:
    """E_m(q_j, ..., q_1; q) for j = 1..n, built by the one-step recursion.

    ``sequence`` lists q_1, q_2, ..., q_n (q_1 is used first).  Returns the
    list of sets for every prefix length.
    """
    cells = rule.cells
    pairs = [edge_pair(rule, p, m) for p in sequence]
    current = {q}
    out = []
    for pair in pairs:
        nxt = set()
        for x in current:
            for y in curve_preimages(rule, x):
                if any(in_closed_word(cells, y, e) for e in pair):
                    nxt.add(y)
        current = nxt
        out.append(current)
    return out


def edge_word_endpoints(rule: SubdivisionRule, word) -> list[CodedPoint]:
    cells = rule.cells
    e0 = cells.img[word[-1]]  # a 0-edge
    pts = []
    for v in (e0 - cells.m, (e0 - cells.m + 1) % cells.m):
        x = post_point(cells, v)
        for c in reversed(word):
            x = x.pullback(c, cells)
        pts.append(x)
    return pts


def _extendable_preimages(rule: SubdivisionRule, x: CodedPoint) -> list[CodedPoint]:
    # f(C) may be a proper subset of C, so skip preimages with no preimage of their own
    return [y for y in curve_preimages(rule, x) if curve_preimages(rule, y)]


def random_vertex_sequence(rule: SubdivisionRule, m: int, n: int, rng: random.Random):
    """A random backward orbit on the curve and m-vertices following it.

    Returns (q, [q_1, ..., q_n]) where q is an m-vertex on the curve and each
    q_i is an endpoint of an m-edge containing the i-th backward iterate, so
    that every E_m set along the sequence is nonempty.
    """
    if m < 1:
        raise ValueError("m must be positive")
    cells = rule.cells
    starts = [v for v in range(cells.m) if _extendable_preimages(rule, post_point(cells, v))]
    if not starts:
        raise RuleError("no backward orbit on the curve")
    x = post_point(cells, rng.choice(starts))
    seq = []
    for step in range(m + n):
        options = _extendable_preimages(rule, x)
        if not options:
            raise RuleError("backward orbit on the curve ran into a dead end")
        x = rng.choice(options)
        if step == m - 1:
            q = x
        elif step >= m:
            word = rng.choice(sorted(edge_words_containing(cells, x, m)))
            seq.append(rng.choice(edge_word_endpoints(rule, word)))
    return q, seq


def Em_bound(m: int, n: int) -> float:
    return m * 2 ** (n / m)
