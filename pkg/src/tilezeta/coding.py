"""Symbolic codings: the tile, edge and edge-color shifts, coded points,
fixed points of iterates and the multiplicity counting identity."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .subdivision import RuleCells, RuleError, SubdivisionRule

DEFAULT_WORD_CAP = 20_000_000

TILE_INTERIOR = "tile-interior"
EDGE_INTERIOR = "edge-interior"
POSTCRITICAL = "postcritical"


@dataclass(frozen=True)
class ShiftSystem:
    """A one-sided subshift of finite type.

    ``states`` hold internal labels (1-cell indices, or ``(edge, face)`` pairs
    for the edge-color shift); ``names`` are the printable ids.
    """

    kind: str
    states: tuple
    names: tuple[str, ...]
    transition: np.ndarray
    color: tuple[int | None, ...] = ()
    on_curve: tuple[bool, ...] = ()

    def __post_init__(self):
        self.transition.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.states)

    @cached_property
    def successors(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(np.flatnonzero(row).tolist()) for row in self.transition)

    @cached_property
    def state_index(self) -> dict:
        return {s: i for i, s in enumerate(self.states)}

    def is_admissible(self, word) -> bool:
        return all(self.transition[a, b] for a, b in zip(word, word[1:]))


def tile_shift(rule: SubdivisionRule) -> ShiftSystem:
    """States are 1-tiles; X -> X' iff f(X) contains X'."""
    c = rule.cells
    tiles = c.tile_cells
    A = np.array([[int(c.carrier[b] == c.img[a]) for b in tiles] for a in tiles], dtype=np.int8)
    return ShiftSystem(
        "tile", tuple(tiles), tuple(c.names[t] for t in tiles), A,
        tuple(c.img[t] for t in tiles), tuple(False for _ in tiles),
    )


def edge_shift(rule: SubdivisionRule) -> ShiftSystem:
    """States are the on-curve 1-edges; e1 -> e2 iff f(e1) contains e2."""
    c = rule.cells
    es = c.curve_edges
    A = np.array([[int(c.carrier[b] == c.img[a]) for b in es] for a in es], dtype=np.int8)
    return ShiftSystem("edge", tuple(es), tuple(c.names[e] for e in es), A, tuple(None for _ in es), tuple(True for _ in es))


def edge_color_shift(rule: SubdivisionRule) -> ShiftSystem:
    """States ``(e, c)``: an on-curve edge and the 0-tile on one side of it.

    ``(e1, c1) -> (e2, c2)`` iff f(e1) contains e2 and the tile X^1(e2, c2)
    lies in f(X^1(e1, c1)).
    """
    c = rule.cells
    states = tuple((e, col) for e in c.curve_edges for col in (c.white, c.black))
    for s in states:
        if s not in c.tile_at:
            raise RuleError(f"no unique 1-tile for edge-color state {s}")
    A = np.array(
        [
            [int(c.carrier[e2] == c.img[e1] and c2 == c.img[c.tile_at[(e1, c1)]]) for (e2, c2) in states]
            for (e1, c1) in states
        ],
        dtype=np.int8,
    )
    names = tuple(f"{c.names[e]}/{c.zero_names[col]}" for e, col in states)
    return ShiftSystem("edge_color", states, names, A, tuple(col for _, col in states), tuple(True for _ in states))


def post_system(rule: SubdivisionRule) -> ShiftSystem:
    """The post points with the map induced by f (a deterministic shift)."""
    c = rule.cells
    m = c.m
    A = np.zeros((m, m), dtype=np.int8)
    for i in range(m):
        A[i, c.post_map[i]] = 1
    return ShiftSystem("post", tuple(range(m)), tuple(c.zero_names[:m]), A, tuple(None for _ in range(m)), tuple(True for _ in range(m)))


def shift_of_kind(rule: SubdivisionRule, kind: str) -> ShiftSystem:
    builders = {"tile": tile_shift, "edge": edge_shift, "edge_color": edge_color_shift, "post": post_system}
    if kind not in builders:
        raise ValueError(f"unknown shift kind {kind!r}")
    return builders[kind](rule)


def is_topologically_mixing(shift: ShiftSystem) -> bool:
    """True iff some power of the transition matrix is entrywise positive."""
    S = shift.size
    if S == 0:
        return False
    A = (shift.transition > 0).astype(np.int64)
    # Wielandt: a primitive matrix has A^N > 0 for N = (S - 1)^2 + 1 <= S^2
    N = (S - 1) ** 2 + 1
    P = np.eye(S, dtype=np.int64)
    base = A.copy()
    while N:
        if N & 1:
            P = np.minimum(P @ base, 1)
        base = np.minimum(base @ base, 1)
        N >>= 1
    return bool(P.all())


def matrix_power_trace(A: np.ndarray, n: int) -> int:
    """Exact trace of A^n using Python integers."""
    M = [[int(x) for x in row] for row in A]
    size = len(M)
    P = [[int(i == j) for j in range(size)] for i in range(size)]
    for _ in range(n):
        P = [[sum(P[i][k] * M[k][j] for k in range(size) if M[k][j]) for j in range(size)] for i in range(size)]
    return sum(P[i][i] for i in range(size))


def admissible_word_array(shift: ShiftSystem, n: int, cap: int = DEFAULT_WORD_CAP) -> np.ndarray:
    """All admissible words of length n, lexicographically ordered, as rows."""
    if n < 1:
        raise ValueError("word length must be at least 1")
    succ = shift.successors
    counts = np.array([len(s) for s in succ], dtype=np.int64)
    flat = np.array([t for s in succ for t in s], dtype=np.int32)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    words = np.arange(shift.size, dtype=np.int32).reshape(-1, 1)
    for _ in range(n - 1):
        last = words[:, -1]
        reps = counts[last]
        if int(reps.sum()) > cap:
            raise RuleError(f"resource cap exceeded: more than {cap} words")
        rows = np.repeat(np.arange(len(words)), reps)
        # position of each new letter inside its successor list
        pos = np.arange(len(rows)) - np.repeat(np.cumsum(reps) - reps, reps)
        nxt = flat[offsets[last][rows] + pos]
        words = np.column_stack([words[rows], nxt])
    return words


def periodic_words(shift: ShiftSystem, n: int, cap: int = DEFAULT_WORD_CAP) -> np.ndarray:
    """Words w of length n with w.w admissible: the fixed words of sigma^n."""
    words = admissible_word_array(shift, n, cap)
    closed = shift.transition[words[:, -1], words[:, 0]] > 0
    out = words[closed]
    expected = matrix_power_trace(shift.transition, n)
    if len(out) != expected:
        raise AssertionError(f"periodic word count {len(out)} != trace {expected}")
    return out


# ---------------------------------------------------------------------------
# coded points


def _primitive(word: tuple) -> tuple:
    n = len(word)
    for d in range(1, n + 1):
        if n % d == 0 and word == word[:d] * (n // d):
            return word[:d]
    return word


@dataclass(frozen=True, order=True)
class CodedPoint:
    """A point given by its eventually periodic carrier sequence.

    ``prefix + period + period + ...`` lists the open 1-cell containing
    ``f^i(x)``.  The representation is normalized (shortest period, shortest
    prefix) so equality of points is equality of the two tuples.
    """

    prefix: tuple[int, ...]
    period: tuple[int, ...]

    @staticmethod
    def make(prefix, period) -> "CodedPoint":
        prefix, period = tuple(prefix), _primitive(tuple(period))
        if not period:
            raise ValueError("period must be nonempty")
        while prefix and prefix[-1] == period[-1]:
            prefix = prefix[:-1]
            period = period[-1:] + period[:-1]
        return CodedPoint(prefix, period)

    def carrier(self, i: int) -> int:
        if i < len(self.prefix):
            return self.prefix[i]
        return self.period[(i - len(self.prefix)) % len(self.period)]

    def window(self, start: int, length: int) -> tuple[int, ...]:
        return tuple(self.carrier(i) for i in range(start, start + length))

    def image(self, j: int = 1) -> "CodedPoint":
        """The coded point f^j(x)."""
        if j <= len(self.prefix):
            return CodedPoint.make(self.prefix[j:], self.period)
        r = (j - len(self.prefix)) % len(self.period)
        return CodedPoint.make((), self.period[r:] + self.period[:r])

    def pullback(self, cell: int, cells: RuleCells) -> "CodedPoint":
        """The preimage of this point inside the closed 1-cell ``cell``."""
        target = cells.carrier[self.carrier(0)]
        try:
            pre = cells.chart[cell][target]
        except KeyError as exc:
            raise RuleError(f"point does not lie in the image of {cells.names[cell]}") from exc
        return CodedPoint.make((pre,) + self.prefix, self.period)

    def is_periodic(self) -> bool:
        return not self.prefix


def point_class(cells: RuleCells, x: CodedPoint) -> str:
    dims = {cells.dim[c] for c in x.period}
    if dims == {2}:
        return TILE_INTERIOR
    if dims == {1}:
        if all(cells.on_curve[c] for c in x.period):
            return EDGE_INTERIOR
        raise RuleError("periodic point in an off-curve edge")
    return POSTCRITICAL


def resolve_periodic(cells: RuleCells, word) -> tuple[int, ...]:
    """Carrier word of the unique fixed point of f^n in the closed n-cell ``word``.

    ``word`` is a periodic word of 1-tiles or 1-edges.  The carrier words of
    period n inside its closure are the closed walks of a layered graph; the
    fixed point lies in the open cell of least dimension among them.
    """
    n = len(word)
    paths = [(c,) for c in sorted(cells.faces[word[0]])]
    for i in range(1, n):
        faces = cells.faces[word[i]]
        paths = [p + (c,) for p in paths for c in cells.cells_in.get(cells.img[p[-1]], ()) if c in faces]
    closed = [p for p in paths if cells.carrier[p[0]] == cells.img[p[-1]]]
    if not closed:
        raise RuleError(f"no fixed point in cell word {word}")
    low = min(cells.dim[p[0]] for p in closed)
    best = [p for p in closed if cells.dim[p[0]] == low]
    if len(best) != 1:
        raise RuleError(f"fixed point in cell word {word} is not unique")
    return best[0]


def _cells_of_word(shift: ShiftSystem, word) -> tuple[int, ...]:
    if shift.kind == "edge_color":
        return tuple(shift.states[s][0] for s in word)
    if shift.kind == "post":
        raise ValueError("post words are resolved directly")
    return tuple(shift.states[s] for s in word)


def point_of_word(rule: SubdivisionRule, shift: ShiftSystem, prefix, period) -> CodedPoint:
    """The point coded by ``prefix . period^infinity`` in the given shift."""
    cells = rule.cells
    prefix, period = tuple(prefix), tuple(period)
    full = prefix + period + period
    if not period or not shift.is_admissible(full):
        raise RuleError("inadmissible coding")
    if shift.kind == "post":
        return CodedPoint.make([cells.post_cell[s] for s in prefix], [cells.post_cell[s] for s in period])
    y = CodedPoint.make((), resolve_periodic(cells, _cells_of_word(shift, period)))
    for c in reversed(_cells_of_word(shift, prefix)):
        y = y.pullback(c, cells)
    return y


def post_point(cells: RuleCells, i: int) -> CodedPoint:
    """The coded point of post point ``i`` (a 0-vertex index)."""
    orbit, seen = [], {}
    while i not in seen:
        seen[i] = len(orbit)
        orbit.append(cells.post_cell[i])
        i = cells.post_map[i]
    k = seen[i]
    return CodedPoint.make(orbit[:k], orbit[k:])


def tile_words_containing(cells: RuleCells, x: CodedPoint, n: int, periodic: bool = False):
    """n-tile words whose closed tile contains x (optionally only periodic ones)."""
    words = [(t,) for t in cells.tiles_containing[x.carrier(0)]]
    for i in range(1, n):
        cand = cells.tiles_containing[x.carrier(i)]
        words = [w + (t,) for w in words for t in cand if cells.carrier[t] == cells.img[w[-1]]]
    if periodic:
        words = [w for w in words if cells.carrier[w[0]] == cells.img[w[-1]]]
    return words


def edge_words_containing(cells: RuleCells, x: CodedPoint, n: int, periodic: bool = False):
    words = [(e,) for e in cells.curve_edges_containing[x.carrier(0)]]
    for i in range(1, n):
        cand = cells.curve_edges_containing[x.carrier(i)]
        words = [w + (e,) for w in words for e in cand if cells.carrier[e] == cells.img[w[-1]]]
    if periodic:
        words = [w for w in words if cells.carrier[w[0]] == cells.img[w[-1]]]
    return words


def color_lifts(cells: RuleCells, edge_word, periodic: bool = True) -> int:
    """Number of edge-color words over ``edge_word`` (closing up if periodic)."""
    count = 0
    for c0 in (cells.white, cells.black):
        c = c0
        for e in edge_word:
            c = cells.img[cells.tile_at[(e, c)]]
        if not periodic or c == c0:
            count += 1
    return count


def iterate_degree(cells: RuleCells, x: CodedPoint, n: int) -> int:
    """deg_{f^n}(x) as the product of local degrees along the orbit."""
    d = 1
    for i in range(n):
        d *= cells.point_degree(x.carrier(i))
    return d


def multiplicities(rule: SubdivisionRule, x: CodedPoint, n: int) -> tuple[int, int, int, int]:
    """(M_tile, M_edge_color, M_edge, M_post) for a fixed point x of f^n."""
    cells = rule.cells
    if x.prefix or n % len(x.period):
        raise RuleError("point is not fixed by f^n")
    m_tile = len(tile_words_containing(cells, x, n, periodic=True))
    ews = edge_words_containing(cells, x, n, periodic=True)
    m_edge = len(ews)
    m_color = sum(color_lifts(cells, w) for w in ews)
    m_post = int(all(cells.dim[c] == 0 for c in x.period))
    return m_tile, m_color, m_edge, m_post


@dataclass(frozen=True)
class FixedPoint:
    point: CodedPoint
    location: str
    degree: int

    def coding(self, cells: RuleCells, n: int) -> str:
        return ".".join(cells.names[c] for c in self.point.window(0, n))


def boundary_fixed_points(rule: SubdivisionRule, n: int) -> dict[CodedPoint, str]:
    """Fixed points of f^n on the curve, from the post map and the edge shift."""
    cells = rule.cells
    found: dict[CodedPoint, str] = {}
    for i in range(cells.m):
        x = post_point(cells, i)
        if not x.prefix and n % len(x.period) == 0:
            found[x] = POSTCRITICAL
    es = edge_shift(rule)
    for w in periodic_words(es, n):
        x = CodedPoint.make((), resolve_periodic(cells, _cells_of_word(es, w)))
        cls = point_class(cells, x)
        if cls == POSTCRITICAL and x not in found:
            raise RuleError("edge word resolved to a post point missed by the post map")
        found.setdefault(x, cls)
    return found


def fixed_points(rule: SubdivisionRule, n: int) -> list[FixedPoint]:
    """Every fixed point of f^n once, with its location class and deg_{f^n}."""
    if n < 1:
        raise ValueError("n must be at least 1")
    cells = rule.cells
    found = boundary_fixed_points(rule, n)
    ts = tile_shift(rule)
    for w in periodic_words(ts, n):
        x = CodedPoint.make((), resolve_periodic(cells, _cells_of_word(ts, w)))
        cls = point_class(cells, x)
        if cls != TILE_INTERIOR:
            if x not in found:
                raise RuleError("tile word codes a curve point missed by the edge shift")
            continue
        if x in found:
            raise RuleError("two periodic tile words code one interior point")
        found[x] = cls
    out = [FixedPoint(x, cls, iterate_degree(cells, x, n)) for x, cls in found.items()]
    return sorted(out, key=lambda p: (p.point.prefix, p.point.window(0, n)))


@dataclass(frozen=True)
class CountingRow:
    coding: str
    location: str
    degree: int
    m_tile: int
    m_edge_color: int
    m_edge: int
    m_post: int

    @property
    def passed(self) -> bool:
        return self.m_tile - self.m_edge_color + self.m_edge + self.m_post == self.degree


@dataclass(frozen=True)
class CountingReport:
    n: int
    rows: tuple[CountingRow, ...]

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list[CountingRow]:
        return [r for r in self.rows if not r.passed]

    @property
    def weighted_count(self) -> int:
        return sum(r.degree for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "class", "coding", "degree", "M_tile", "M_edge_color", "M_edge", "M_post", "pass"])
        for r in self.rows:
            w.writerow([self.n, r.location, r.coding, r.degree, r.m_tile, r.m_edge_color, r.m_edge, r.m_post, int(r.passed)])
        return buf.getvalue()


def verify_counting_identity(rule: SubdivisionRule, n: int) -> CountingReport:
    """Check M_tile - M_edge_color + M_edge + M_post = deg_{f^n} at every fixed point."""
    cells = rule.cells
    rows = []
    for fp in fixed_points(rule, n):
        rows.append(CountingRow(fp.coding(cells, n), fp.location, fp.degree, *multiplicities(rule, fp.point, n)))
    return CountingReport(n, tuple(rows))
