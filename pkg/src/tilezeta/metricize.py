"""Locally constant potentials, the combinatorial visual metric, temporal
distances and the integrability testers."""

from __future__ import annotations

import csv
import io
import itertools
import random
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

from .coding import (
    CodedPoint,
    fixed_points,
    resolve_periodic,
)
from .subdivision import Dn_and_lambda0, RuleCells, RuleError, SubdivisionRule, admissible_words


def tile_words(cells: RuleCells, k: int) -> list[tuple[int, ...]]:
    """Admissible k-words of 1-tiles in lexicographic order of tile ids."""
    return admissible_words(lambda c: [s for s in cells.succ[c] if cells.dim[s] == 2], cells.tile_cells, k)


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    return Fraction(value)


@dataclass(frozen=True)
class Potential:
    """A depth-k locally constant potential with an optional coboundary part.

    ``values`` maps every admissible k-word of 1-tiles to an exact rational.
    At a point the value is read off the canonical k-tile containing it (the
    lexicographically least tile word).  ``beta`` optionally adds the exact
    coboundary ``beta(f x) - beta(x)`` of a depth-j table, evaluated with the
    same canonical rule so that it telescopes along every orbit.
    """

    depth: int
    values: dict
    beta_depth: int = 0
    beta: dict | None = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("potential depth must be at least 1")

    # constructors --------------------------------------------------------
    @staticmethod
    def constant(rule: SubdivisionRule, c) -> "Potential":
        cells = rule.cells
        return Potential(1, {w: _as_fraction(c) for w in tile_words(cells, 1)}, label=f"const:{c}")

    @staticmethod
    def from_table(rule: SubdivisionRule, depth: int, table: dict, label: str = "") -> "Potential":
        """Build from a mapping keyed by tuples of tile ids (names)."""
        cells = rule.cells
        values = {}
        for w in tile_words(cells, depth):
            key = tuple(cells.names[t] for t in w)
            if key not in table:
                raise RuleError(f"potential table misses word {'.'.join(key)}")
            values[w] = _as_fraction(table[key])
        return Potential(depth, values, label=label)

    @staticmethod
    def indicator(rule: SubdivisionRule, tile: str, value=1) -> "Potential":
        cells = rule.cells
        if tile not in cells.index or cells.dim[cells.index[tile]] != 2:
            raise RuleError(f"unknown tile {tile!r}")
        t = cells.index[tile]
        return Potential(1, {w: _as_fraction(value) if w[0] == t else Fraction(0) for w in tile_words(cells, 1)}, label=f"indicator:{tile}:{value}")

    @staticmethod
    def coboundary(rule: SubdivisionRule, c, beta_depth: int, beta: dict, label: str = "") -> "Potential":
        """``c + beta o f - beta`` from a depth-j table keyed by tile-id tuples."""
        cells = rule.cells
        table = {}
        for w in tile_words(cells, beta_depth):
            key = tuple(cells.names[t] for t in w)
            if key not in beta:
                raise RuleError(f"coboundary table misses word {'.'.join(key)}")
            table[w] = _as_fraction(beta[key])
        base = Potential.constant(rule, c)
        return Potential(1, base.values, beta_depth, table, label or f"cobound:{c}")

    # arithmetic ----------------------------------------------------------
    def lift(self, rule: SubdivisionRule, depth: int) -> "Potential":
        if depth < self.depth:
            raise ValueError("cannot lower potential depth")
        cells = rule.cells
        values = {w: self.values[w[: self.depth]] for w in tile_words(cells, depth)}
        return Potential(depth, values, self.beta_depth, self.beta, self.label)

    def add(self, rule: SubdivisionRule, other: "Potential") -> "Potential":
        if self.beta is not None and other.beta is not None:
            if self.beta_depth != other.beta_depth:
                raise ValueError("coboundary parts of different depth")
            beta = {w: self.beta[w] + other.beta[w] for w in self.beta}
        else:
            beta = self.beta if self.beta is not None else other.beta
        bd = self.beta_depth if self.beta is not None else other.beta_depth
        d = max(self.depth, other.depth)
        a, b = self.lift(rule, d), other.lift(rule, d)
        values = {w: a.values[w] + b.values[w] for w in a.values}
        label = "+".join(x for x in (self.label, other.label) if x)
        return Potential(d, values, bd if beta is not None else 0, beta, label)

    def scale(self, c) -> "Potential":
        c = _as_fraction(c)
        beta = None if self.beta is None else {w: c * v for w, v in self.beta.items()}
        return Potential(self.depth, {w: c * v for w, v in self.values.items()}, self.beta_depth, beta, f"{c}*({self.label})")

    # symbolic view -------------------------------------------------------
    @property
    def symbolic_depth(self) -> int:
        return max(self.depth, self.beta_depth + 1) if self.beta is not None else self.depth

    def symbolic_value(self, word) -> Fraction:
        """Value on a tile word of length at least ``symbolic_depth``."""
        v = self.values[tuple(word[: self.depth])]
        if self.beta is not None:
            j = self.beta_depth
            v += self.beta[tuple(word[1 : 1 + j])] - self.beta[tuple(word[:j])]
        return v

    def symbolic_table(self, rule: SubdivisionRule) -> dict:
        cells = rule.cells
        return {w: self.symbolic_value(w) for w in tile_words(cells, self.symbolic_depth)}

    def base_minimum(self) -> Fraction:
        return min(self.values.values())

    def is_constant(self) -> bool:
        return self.beta is None and len(set(self.values.values())) == 1


def canonical_tile_word(cells: RuleCells, x: CodedPoint, k: int) -> tuple[int, ...]:
    """Lexicographically least k-tile word whose closed tile contains x."""
    return _canonical(cells, x.window(0, k))


def _canonical(cells: RuleCells, window: tuple[int, ...]) -> tuple[int, ...]:
    cache = cells.__dict__.setdefault("_canonical_cache", {})
    hit = cache.get(window)
    if hit is not None:
        return hit
    k = len(window)
    feasible = [None] * k
    feasible[k - 1] = set(cells.tiles_containing[window[k - 1]])
    for i in range(k - 2, -1, -1):
        feasible[i] = {
            t for t in cells.tiles_containing[window[i]] if any(cells.carrier[s] == cells.img[t] for s in feasible[i + 1])
        }
    word = []
    for i in range(k):
        options = sorted(t for t in feasible[i] if not word or cells.carrier[t] == cells.img[word[-1]])
        if not options:
            raise RuleError("no tile word contains the point")
        word.append(options[0])
    out = tuple(word)
    cache[window] = out
    return out


def point_value(rule: SubdivisionRule, phi: Potential, x: CodedPoint) -> Fraction:
    """phi(x) by the canonical-tile rule."""
    cells = rule.cells
    v = phi.values[canonical_tile_word(cells, x, phi.depth)]
    if phi.beta is not None:
        j = phi.beta_depth
        v += phi.beta[canonical_tile_word(cells, x.image(), j)] - phi.beta[canonical_tile_word(cells, x, j)]
    return v


def birkhoff_sum(rule: SubdivisionRule, phi: Potential, x: CodedPoint, n: int) -> Fraction:
    """S_n phi(x) = sum of phi(f^j x) for j < n, exactly."""
    total = Fraction(0)
    y = x
    for _ in range(n):
        total += point_value(rule, phi, y)
        y = y.image()
    return total


def coding_sum(phi: Potential, word, n: int) -> Fraction:
    """Birkhoff sum along a tile coding (used for branch-relative evaluation)."""
    K = phi.symbolic_depth
    if len(word) < n + K - 1:
        raise ValueError("tile coding too short for this Birkhoff sum")
    return sum((phi.symbolic_value(word[j : j + K]) for j in range(n)), Fraction(0))


# ---------------------------------------------------------------------------
# visual metric


@dataclass(frozen=True)
class VisualMetricParams:
    Lambda: float = 2.0
    alpha: float = 1.0

    def __post_init__(self):
        if not self.Lambda > 1:
            raise ValueError("expansion factor must exceed 1")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")


def _extend_reach(cells: RuleCells, reach, a, b):
    common = cells.faces[a] & cells.faces[b]
    if reach is None:
        return frozenset(common)
    images = {cells.img[s] for s in reach}
    return frozenset(c for c in common if cells.carrier[c] in images)


def tiles_intersect(cells: RuleCells, u, v) -> bool:
    """Whether two closed tiles of the same level share a point."""
    reach = None
    for a, b in zip(u, v):
        reach = _extend_reach(cells, reach, a, b)
        if not reach:
            return False
    return True


def separation_level(rule: SubdivisionRule, x: CodedPoint, y: CodedPoint, max_level: int = 64) -> int | None:
    """Least n with disjoint n-tiles X containing x and Y containing y (None if x = y)."""
    if x == y:
        return None
    cells = rule.cells
    wx = [(t,) for t in cells.tiles_containing[x.carrier(0)]]
    wy = [(t,) for t in cells.tiles_containing[y.carrier(0)]]
    pairs = {(a, b): _extend_reach(cells, None, a[0], b[0]) for a in wx for b in wy}
    level = 1
    while True:
        if any(not r for r in pairs.values()):
            return level
        if level >= max_level:
            raise RuleError(f"points not separated within {max_level} levels")
        cx, cy = cells.tiles_containing[x.carrier(level)], cells.tiles_containing[y.carrier(level)]
        new = {}
        for (a, b), r in pairs.items():
            for s in cx:
                if cells.carrier[s] != cells.img[a[-1]]:
                    continue
                for t in cy:
                    if cells.carrier[t] == cells.img[b[-1]]:
                        new[(a + (s,), b + (t,))] = _extend_reach(cells, r, s, t)
        pairs = new
        level += 1


def visual_distance(rule: SubdivisionRule, x: CodedPoint, y: CodedPoint, params: VisualMetricParams, max_level: int = 64) -> float:
    """Lambda^(-m) where m is the separation level; 0 for equal points."""
    m = separation_level(rule, x, y, max_level)
    return 0.0 if m is None else params.Lambda ** (-m)


def holder_seminorm(rule: SubdivisionRule, phi: Potential, params: VisualMetricParams) -> float:
    """max |phi(w) - phi(w')| Lambda^(alpha m) over pairs of K-tile words.

    m is the first level at which the prefixes of the two words are disjoint
    tiles, or K + 1 when the full K-tiles intersect.
    """
    cells = rule.cells
    table = phi.symbolic_table(rule)
    K = phi.symbolic_depth
    words = sorted(table)
    best = 0.0
    for u, v in itertools.combinations(words, 2):
        diff = abs(table[u] - table[v])
        if not diff:
            continue
        reach, m = None, K + 1
        for j in range(K):
            reach = _extend_reach(cells, reach, u[j], v[j])
            if not reach:
                m = j + 1
                break
        best = max(best, float(diff) * params.Lambda ** (params.alpha * m))
    return best


# ---------------------------------------------------------------------------
# temporal distance and integrability


def is_backward_admissible(cells: RuleCells, branch) -> bool:
    """``branch = (xi_0, xi_-1, ...)`` with f(xi_-(i+1)) containing xi_-i."""
    return all(cells.dim[t] == 2 for t in branch) and all(
        cells.carrier[a] == cells.img[b] for a, b in zip(branch, branch[1:])
    )


def delta_terms(phi: Potential, branch, x_word, y_word) -> list[Fraction]:
    """Terms of the Delta series along a finite branch, on tile codings of x and y."""
    K = phi.symbolic_depth
    out = []
    for i in range(len(branch)):
        head = tuple(reversed(branch[: i + 1]))
        out.append(phi.symbolic_value((head + tuple(x_word))[:K]) - phi.symbolic_value((head + tuple(y_word))[:K]))
    return out


def _check_pair(cells, phi, branch, x_word, y_word):
    K = phi.symbolic_depth
    if not is_backward_admissible(cells, branch):
        raise RuleError("inadmissible branch data")
    if not x_word or not y_word or x_word[0] != y_word[0]:
        raise RuleError("x and y must lie in a common 1-tile")
    if cells.carrier[x_word[0]] != cells.img[branch[0]]:
        raise RuleError("the common 1-tile must lie in f(xi_0)")
    if len(x_word) < max(1, K - 1) or len(y_word) < max(1, K - 1):
        raise RuleError("tile codings of x and y are too short for this potential")
    for w in (x_word, y_word):
        if not cells.is_admissible(w):
            raise RuleError("inadmissible tile coding")


def delta(rule: SubdivisionRule, phi: Potential, branch, x_word, y_word) -> Fraction:
    """Delta_{phi, xi}(x, y); finite because terms of index >= K - 2 vanish."""
    cells = rule.cells
    _check_pair(cells, phi, branch, x_word, y_word)
    return sum(delta_terms(phi, branch, x_word, y_word), Fraction(0))


def branch_length(phi: Potential) -> int:
    return max(1, phi.symbolic_depth - 1)


def temporal_distance(rule: SubdivisionRule, phi: Potential, xi, eta, x_word, y_word) -> Fraction:
    """Delta_xi(x, y) - Delta_eta(x, y) on tile codings of x and y.

    Points are given by tile codings starting in the common 1-tile, and phi
    is read along the coding of each preimage (the branch word followed by
    the coding of the point), which is the value inside the branch tile.
    """
    cells = rule.cells
    if len(xi) < branch_length(phi) or len(eta) < branch_length(phi):
        raise RuleError("branch sequences are shorter than the potential depth requires")
    if cells.img[xi[0]] != cells.img[eta[0]]:
        raise RuleError("branches must satisfy f(xi_0) = f(eta_0)")
    return delta(rule, phi, xi, x_word, y_word) - delta(rule, phi, eta, x_word, y_word)


def backward_branches(cells: RuleCells, length: int, image: int | None = None):
    """All backward-admissible tile sequences of the given length."""
    starts = [t for t in cells.tile_cells if image is None or cells.img[t] == image]
    seqs = [(t,) for t in starts]
    for _ in range(length - 1):
        seqs = [s + (t,) for s in seqs for t in cells.tile_cells if cells.carrier[s[-1]] == cells.img[t]]
    return seqs


def sample_codings(cells: RuleCells, tile: int, length: int, max_period: int = 2):
    """Tile codings (periodic words through ``tile``) of points inside ``tile``."""
    out = []
    for p in range(1, max_period + 1):
        for w in admissible_words(lambda c: [s for s in cells.succ[c] if cells.dim[s] == 2], [tile], p):
            if cells.carrier[w[0]] == cells.img[w[-1]]:
                reps = -(-length // p)
                out.append(tuple((w * reps)[: max(length, p)]))
    return out


@dataclass(frozen=True)
class NLIVerdict:
    locally_integrable_on_samples: bool
    checked: int
    witness: tuple | None = None
    value: Fraction | None = None

    def describe(self, cells: RuleCells) -> str:
        if self.locally_integrable_on_samples:
            return f"locally-integrable-on-samples ({self.checked} temporal distances, all zero)"
        xi, eta, xw, yw = self.witness
        name = lambda w: ".".join(cells.names[t] for t in w)
        return f"witness-of-non-integrability: xi={name(xi)} eta={name(eta)} x={name(xw)} y={name(yw)} value={self.value}"


def nli_test(rule: SubdivisionRule, phi: Potential, samples: int = 20000, max_period: int = 2) -> NLIVerdict:
    """Sweep branch pairs and point pairs; stop at the first nonzero temporal distance."""
    cells = rule.cells
    L = branch_length(phi)
    K = phi.symbolic_depth
    length = max(2, K)
    checked = 0
    for image in sorted({cells.img[t] for t in cells.tile_cells}):
        branches = backward_branches(cells, L, image)
        tiles = [t for t in cells.tile_cells if cells.carrier[t] == image]
        codings = {t: sample_codings(cells, t, length, max_period) for t in tiles}
        for xi, eta in itertools.combinations(branches, 2):
            for t in tiles:
                for xw, yw in itertools.combinations(codings[t], 2):
                    val = temporal_distance(rule, phi, xi, eta, xw, yw)
                    checked += 1
                    if val != 0:
                        return NLIVerdict(False, checked, (xi, eta, xw, yw), val)
                    if checked >= samples:
                        return NLIVerdict(True, checked)
    return NLIVerdict(True, checked)


@dataclass(frozen=True)
class CohomologyResult:
    constant: Fraction | None
    witness: tuple | None = None

    @property
    def cohomologous(self) -> bool:
        return self.constant is not None


def cohomology_test(rule: SubdivisionRule, phi: Potential, n_max: int = 4) -> CohomologyResult:
    """Return K when S_n phi(x) = n K at every fixed point of f^n, n <= n_max."""
    cells = rule.cells
    first = None
    for n in range(1, n_max + 1):
        for fp in fixed_points(rule, n):
            avg = birkhoff_sum(rule, phi, fp.point, n) / n
            label = (n, fp.coding(cells, n), avg)
            if first is None:
                first = label
            elif avg != first[2]:
                return CohomologyResult(None, (first, label))
    return CohomologyResult(first[2] if first else None)


def random_coboundary(rule: SubdivisionRule, c, beta_depth: int, rng: random.Random, spread: int = 5) -> Potential:
    """c + beta o f - beta with a random rational depth-j table beta."""
    cells = rule.cells
    beta = {}
    for w in tile_words(cells, beta_depth):
        beta[tuple(cells.names[t] for t in w)] = Fraction(rng.randint(-spread * 4, spread * 4), rng.randint(1, 4))
    return Potential.coboundary(rule, c, beta_depth, beta)


# ---------------------------------------------------------------------------
# strong non-integrability probe


@dataclass(frozen=True)
class ProbeRow:
    M: int
    N: int
    color: str
    tile: str
    branch_1: str
    branch_2: str
    ratio: float


@dataclass(frozen=True)
class SNIReport:
    rows: tuple[ProbeRow, ...]
    epsilon: float
    floor: float

    @property
    def clears_threshold(self) -> bool:
        return self.floor >= self.epsilon

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["M", "N", "color", "tile", "branch_1", "branch_2", "ratio"])
        for r in self.rows:
            w.writerow([r.M, r.N, r.color, r.tile, r.branch_1, r.branch_2, repr(r.ratio)])
        return buf.getvalue()


def _tile_word_extensions(cells, word, depth):
    out = [tuple(word)]
    for _ in range(depth):
        out = [w + (s,) for w in out for s in cells.succ[w[-1]] if cells.dim[s] == 2]
    return out


def touches_boundary(cells: RuleCells, sub, X) -> bool:
    """Whether the closed tile ``sub`` (a word extending ``X``) meets the boundary of X.

    A point of ``sub`` lies on the boundary of X exactly when its carrier word
    leaves X somewhere in the first len(X) letters.
    """
    states = {(c, c != X[0]) for c in cells.faces[sub[0]]}
    for i in range(1, len(sub)):
        faces = cells.faces[sub[i]]
        states = {
            (c, left or (i < len(X) and c != X[i]))
            for (p, left) in states
            for c in cells.cells_in.get(cells.img[p], ())
            if c in faces
        }
    return any(left for _, left in states)


def interior_pair(cells: RuleCells, X, depth: int = 3):
    """Two disjoint sub-tiles ``depth`` levels below X that avoid its boundary."""
    subs = [s for s in _tile_word_extensions(cells, X, depth) if not touches_boundary(cells, s, X)]
    best = None
    for a, b in itertools.combinations(subs, 2):
        if tiles_intersect(cells, a, b):
            continue
        split = next(i for i in range(len(a)) if a[i] != b[i])
        # prefer pairs that split as early as possible (largest separation)
        if best is None or split < best[0]:
            best = (split, a, b)
    if best is None:
        raise RuleError("no interior pair of disjoint sub-tiles at this depth")
    return best[1], best[2]


def periodic_tail(cells: RuleCells, word) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Greedy least-tile continuation of ``word`` until it closes into a cycle."""
    w = list(word)
    seen = {}
    while w[-1] not in seen:
        seen[w[-1]] = len(w) - 1
        w.append(min(s for s in cells.succ[w[-1]] if cells.dim[s] == 2))
    i = seen[w[-1]]
    return tuple(w[: i + 1]), tuple(w[i + 1 :])


def point_in_tile(rule: SubdivisionRule, word):
    """A coded point of the closed tile ``word`` and a long tile coding of it."""
    cells = rule.cells
    prefix, period = periodic_tail(cells, word)
    x = CodedPoint.make((), resolve_periodic(cells, period))
    for c in reversed(prefix):
        x = x.pullback(c, cells)
    return x, prefix, period


def sni_probe(
    rule: SubdivisionRule,
    phi: Potential,
    params: VisualMetricParams,
    N0: int = 1,
    M0: int = 1,
    M_max: int = 2,
    candidate_tiles=None,
    span: int = 2,
    epsilon: float = 1e-3,
    max_tiles: int = 16,
    max_pairs: int = 4096,
    depth: int = 3,
) -> SNIReport:
    """Scan the ratio of the strong non-integrability bound over finite ranges.

    For each colour c with its candidate M0-tile Y, each M-tile X inside Y
    (M0 <= M <= M_max, at most ``max_tiles`` of them) and each N in
    [N0, N0 + span], the row records the largest ratio over pairs of
    (N + M0)-tiles mapped onto Y by f^N.  The two points sit in disjoint
    sub-tiles of X away from its boundary.  The floor is the least row.
    """
    cells = rule.cells
    K = phi.symbolic_depth
    _, lambda0 = Dn_and_lambda0(rule, 4)
    if params.Lambda**params.alpha > lambda0 + 1e-9:
        warnings.warn(f"Lambda^alpha = {params.Lambda ** params.alpha:g} exceeds the expansion estimate {lambda0:g}")
    if candidate_tiles is None:
        cand = {}
        for w in tile_words(cells, M0):
            cand.setdefault(cells.img[w[-1]], w)
        candidates = [cand[c] for c in sorted(cand)]
    else:
        candidates = [tuple(cells.index[t] for t in c.split(".")) for c in candidate_tiles]
    name = lambda w: ".".join(cells.names[t] for t in w)
    rows = []
    for Y in candidates:
        if len(Y) != M0 or not cells.is_admissible(Y):
            raise RuleError(f"candidate {name(Y)} is not an admissible {M0}-tile")
        color = cells.zero_names[cells.img[Y[-1]]]
        for M in range(M0, M_max + 1):
            for X in _tile_word_extensions(cells, Y, M - M0)[:max_tiles]:
                s1, s2 = interior_pair(cells, X, depth)
                (p1, pre1, per1), (p2, pre2, per2) = point_in_tile(rule, s1), point_in_tile(rule, s2)
                dist = visual_distance(rule, p1, p2, params)
                c1 = pre1 + per1 * (K + 1)
                c2 = pre2 + per2 * (K + 1)
                for N in range(N0, N0 + span + 1):
                    heads = [h for h in tile_words(cells, N) if cells.carrier[Y[0]] == cells.img[h[-1]]]
                    best = None
                    for h1, h2 in itertools.islice(itertools.combinations(heads, 2), max_pairs):
                        val = (
                            coding_sum(phi, h1 + c1, N)
                            - coding_sum(phi, h2 + c1, N)
                            - coding_sum(phi, h1 + c2, N)
                            + coding_sum(phi, h2 + c2, N)
                        )
                        ratio = abs(float(val)) / dist**params.alpha
                        if best is None or ratio > best[0]:
                            best = (ratio, h1, h2)
                    if best is None:
                        raise RuleError("no admissible branch pair at these parameters")
                    rows.append(ProbeRow(M, N, color, name(X), name(best[1] + Y), name(best[2] + Y), best[0]))
    floor = min(r.ratio for r in rows) if rows else 0.0
    return SNIReport(tuple(rows), epsilon, floor)
