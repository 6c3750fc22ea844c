"""Primitive periodic orbits of f with exact lengths, and the orbit counting harness."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy import integrate, special

from .coding import (
    TILE_INTERIOR,
    boundary_fixed_points,
    iterate_degree,
    periodic_words,
    point_class,
    tile_shift,
    tile_words_containing,
)
from .metricize import Potential, birkhoff_sum, cohomology_test
from .subdivision import RuleError, SubdivisionRule
from .thermo import eventual_positivity, s0 as compute_s0, word_space

LEDGER_VERSION = "tilezeta-orbit-ledger/1"
LEDGER_HEADER = ["period", "representative", "length", "degree", "location"]


@dataclass(frozen=True, order=True)
class OrbitRecord:
    period: int
    representative: tuple[int, ...]  # lexicographically least rotation of the carrier period
    length: Fraction
    degree: int
    location: str


@dataclass
class Ledger:
    rule_name: str
    p_max: int
    records: list[OrbitRecord]
    horizon: float
    horizon_note: str = ""

    def lengths(self) -> np.ndarray:
        return np.array([float(r.length) for r in self.records])

    def by_period(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for r in self.records:
            out[r.period] = out.get(r.period, 0) + 1
        return out


def _least_rotation(word: tuple) -> tuple:
    return min(word[i:] + word[:i] for i in range(len(word)))


def _common_denominator(values) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), (v.denominator for v in values), 1)


def _interior_orbits(rule: SubdivisionRule, phi: Potential, p: int) -> list[OrbitRecord]:
    """Primitive orbits of interior points of exact period p, vectorized over tile words."""
    cells = rule.cells
    ts = tile_shift(rule)
    words = periodic_words(ts, p).astype(np.int64)
    if not len(words):
        return []
    base = ts.size
    powers = base ** np.arange(p - 1, -1, -1, dtype=np.int64)
    rotations = np.stack([np.roll(words, -i, axis=1) @ powers for i in range(p)], axis=1)
    codes = rotations[:, 0]
    # words coding curve points are handled by the curve ledger
    curve_codes = []
    for x in boundary_fixed_points(rule, p):
        for w in tile_words_containing(cells, x, p, periodic=True):
            curve_codes.append(sum(ts.state_index[t] * int(b) for t, b in zip(w, powers)))
    keep = ~np.isin(codes, np.array(curve_codes, dtype=np.int64))
    # primitive: no rotation by a proper divisor fixes the word
    for d in range(1, p):
        if p % d == 0:
            keep &= rotations[:, d] != codes
    least = rotations[keep].min(axis=1)
    reps = np.unique(least)
    # decode representatives
    digits = (reps[:, None] // powers[None, :]) % base
    # exact lengths: integer numerators over a common denominator
    K = phi.symbolic_depth
    table = phi.symbolic_table(rule)
    D = _common_denominator(table.values())
    lookup = np.zeros(base**K, dtype=object if D > 2**20 else np.int64)
    kp = base ** np.arange(K - 1, -1, -1, dtype=np.int64)
    for w, v in table.items():
        lookup[int(sum(ts.state_index[t] * int(b) for t, b in zip(w, kp)))] = int(v * D)
    ext = np.concatenate([digits] * (-(-(p + K) // p) + 1), axis=1)
    total = np.zeros(len(digits), dtype=lookup.dtype)
    for j in range(p):
        total = total + lookup[ext[:, j : j + K] @ kp]
    tiles = np.array(ts.states, dtype=np.int64)
    out = []
    for row, num in zip(digits, total):
        out.append(OrbitRecord(p, tuple(int(t) for t in tiles[row]), Fraction(int(num), D), 1, TILE_INTERIOR))
    return out


def _curve_orbits(rule: SubdivisionRule, phi: Potential, p: int) -> list[OrbitRecord]:
    cells = rule.cells
    out, seen = [], set()
    for x in boundary_fixed_points(rule, p):
        if x.prefix or len(x.period) != p or x in seen:
            continue
        y = x
        for _ in range(p):
            seen.add(y)
            y = y.image()
        out.append(
            OrbitRecord(p, _least_rotation(x.period), birkhoff_sum(rule, phi, x, p), iterate_degree(cells, x, p), point_class(cells, x))
        )
    return out


def completeness_horizon(rule: SubdivisionRule, phi: Potential, p_max: int) -> tuple[float, str]:
    """A length T such that every orbit of length <= T has period <= p_max."""
    m = phi.base_minimum()
    if m > 0:
        return float(p_max * m), ""
    N = eventual_positivity(rule, phi)
    if N is None:
        raise RuleError("potential is not eventually positive; no completeness horizon")
    space = word_space(rule, phi.symbolic_depth)
    exact = [phi.symbolic_value(w) for w in space.words]
    succ = [[] for _ in range(space.size)]
    for a, b in zip(space.rows, space.cols):
        succ[a].append(b)
    best = list(exact)
    for _ in range(N - 1):
        best = [exact[i] + min(best[j] for j in succ[i]) for i in range(space.size)]
    cN = min(best)
    symbolic_min = min(exact)
    h = ((p_max + 1) // N) * cN + (N - 1) * min(symbolic_min, 0)
    return max(0.0, float(h)), f"horizon from {N}-step positivity of the symbolic sums (c_N = {cN})"


def _orbits_of_period(rule: SubdivisionRule, phi: Potential, p: int) -> list[OrbitRecord]:
    return _interior_orbits(rule, phi, p) + _curve_orbits(rule, phi, p)


def primitive_orbits(rule: SubdivisionRule, phi: Potential, p_max: int, threads: int = 1) -> Ledger:
    """Every primitive periodic orbit of f with period <= p_max, sorted by (period, representative)."""
    rule.cells  # validate once before fanning out
    periods = range(1, p_max + 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda p: _orbits_of_period(rule, phi, p), periods))
    else:
        chunks = [_orbits_of_period(rule, phi, p) for p in periods]
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=lambda r: (r.period, r.representative))
    horizon, note = completeness_horizon(rule, phi, p_max)
    return Ledger(rule.name, p_max, records, horizon, note)


def horizon_check(rule: SubdivisionRule, phi: Potential, ledger: Ledger) -> list[OrbitRecord]:
    """Orbits of period p_max + 1 that fall under the horizon (should be none)."""
    extra = _orbits_of_period(rule, phi, ledger.p_max + 1)
    return [r for r in extra if float(r.length) <= ledger.horizon]


QUADRATURE_LIMIT = 1e8


def li(y: float) -> float:
    """Logarithmic integral from 2 to y.

    Adaptive quadrature for 1 < y <= 1e8.  Beyond that the integrand spans
    too many magnitudes for quad, and the closed form Ei(log y) - Ei(log 2)
    is used.  For 0 < y < 1 the path crosses the pole at u = 1 and the
    principal value is taken.
    """
    if y <= 0:
        raise ValueError("li needs y > 0")
    if y == 2:
        return 0.0
    if y == 1:
        return -math.inf
    if 1 < y <= QUADRATURE_LIMIT:
        val, err = integrate.quad(lambda u: 1.0 / math.log(u), 2.0, y, epsabs=1e-10, epsrel=1e-12, limit=200)
        if err > 1e-8 * max(1.0, abs(val)):
            raise RuntimeError(f"quadrature did not converge (error estimate {err:g})")
        return val
    return float(special.expi(math.log(y)) - special.expi(math.log(2.0)))


def pi_count(ledger: Ledger, T: float) -> int:
    if T > ledger.horizon + 1e-12:
        raise RuleError(f"T = {T} exceeds the completeness horizon {ledger.horizon}")
    bound = Fraction(T)
    return sum(1 for r in ledger.records if r.length <= bound)


@dataclass(frozen=True)
class POTRow:
    T: float
    count: int
    li_value: float

    @property
    def ratio(self) -> float:
        return self.count / self.li_value if self.li_value > 0 else math.nan


@dataclass(frozen=True)
class POTReport:
    s0: float
    rows: tuple[POTRow, ...]
    lattice_constant: Fraction | None
    trend_slope: float
    trend_residual: float
    horizon: float
    horizon_note: str

    @property
    def lattice(self) -> bool:
        return self.lattice_constant is not None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["T", "pi", "Li_exp_s0T", "ratio"])
        for r in self.rows:
            w.writerow([repr(r.T), r.count, repr(r.li_value), repr(r.ratio)])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"s0 = {self.s0!r}", f"completeness horizon = {self.horizon!r}"]
        if self.horizon_note:
            lines.append(f"caveat: {self.horizon_note}")
        if self.lattice:
            lines.append(f"lattice case: every orbit length is {self.lattice_constant} times its period; lengths cluster on a lattice")
        lines.append(
            f"log(pi/Li) trend over the largest decade of T: slope {self.trend_slope!r}, residual {self.trend_residual!r}"
        )
        lines.append("desk scale only: the asymptotic pi(T) ~ Li(exp(s0 T)) is not verified here")
        return "\n".join(lines) + "\n"


def lattice_constant(ledger: Ledger) -> Fraction | None:
    ks = {r.length / r.period for r in ledger.records}
    return ks.pop() if len(ks) == 1 else None


def pot_report(rule: SubdivisionRule, phi: Potential, T_grid, ledger: Ledger | None = None, p_max: int = 10, s0_value: float | None = None) -> POTReport:
    ledger = ledger or primitive_orbits(rule, phi, p_max)
    s = compute_s0(rule, phi) if s0_value is None else s0_value
    rows = []
    for T in T_grid:
        rows.append(POTRow(float(T), pi_count(ledger, T), li(math.exp(s * T))))
    K = cohomology_test(rule, phi, min(ledger.p_max, 4)).constant
    if K is not None and lattice_constant(ledger) != K:
        raise AssertionError("cohomology test and orbit ledger disagree on the lattice constant")
    usable = [r for r in rows if r.count > 0 and r.li_value > 0]
    slope = resid = math.nan
    if usable:
        T_top = usable[-1].T
        dec = [r for r in usable if r.T >= T_top / 10]
        if len(dec) >= 2:
            xs = np.array([r.T for r in dec])
            ys = np.log([r.ratio for r in dec])
            slope, icpt = np.polyfit(xs, ys, 1)
            resid = float(np.sqrt(np.mean((ys - (slope * xs + icpt)) ** 2)))
    return POTReport(s, tuple(rows), K, float(slope), float(resid), ledger.horizon, ledger.horizon_note)


def export_ledger(ledger: Ledger, rule: SubdivisionRule) -> str:
    cells = rule.cells
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    meta = [f"# {LEDGER_VERSION}", f"rule={ledger.rule_name}", f"p_max={ledger.p_max}", f"horizon={ledger.horizon!r}"]
    if ledger.horizon_note:
        meta.append(f"note={ledger.horizon_note}")
    w.writerow(meta)
    w.writerow(LEDGER_HEADER)
    for r in ledger.records:
        w.writerow([r.period, ".".join(cells.names[c] for c in r.representative), str(r.length), r.degree, r.location])
    return buf.getvalue()


def import_ledger(text: str, rule: SubdivisionRule) -> Ledger:
    cells = rule.cells
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][0] != f"# {LEDGER_VERSION}":
        raise RuleError("ledger version mismatch")
    meta = dict(item.split("=", 1) for item in rows[0][1:])
    if len(rows) < 2 or rows[1] != LEDGER_HEADER:
        raise RuleError("malformed ledger header")
    records = []
    for i, row in enumerate(rows[2:], start=3):
        try:
            period, rep, length, degree, location = row
            rec = OrbitRecord(int(period), tuple(cells.index[n] for n in rep.split(".")), Fraction(length), int(degree), location)
        except (ValueError, KeyError) as exc:
            raise RuleError(f"line {i}: malformed ledger row") from exc
        records.append(rec)
    return Ledger(meta.get("rule", ""), int(meta["p_max"]), records, float(meta["horizon"]), meta.get("note", ""))
