"""Transfer operators on depth-k locally constant functions.

Functions of depth k are vectors indexed by the admissible k-words of
1-tiles.  A transition w -> w' means w' is the word of f(x) when w is the
word of x, i.e. w[1:] == w'[:-1].  The weighted matrix carries e^{psi(w)} on
each transition and the Ruelle operator acts on vectors as its transpose.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from .coding import is_topologically_mixing, tile_shift
from .metricize import Potential, tile_words
from .subdivision import RuleError, SubdivisionRule

TOLERANCE = 1e-12
MAX_ITERS = 100_000


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class WordSpace:
    """Admissible k-words of 1-tiles with their transition structure."""

    depth: int
    words: tuple[tuple[int, ...], ...]
    index: dict
    face: np.ndarray  # 0-tile containing the first tile
    rows: np.ndarray
    cols: np.ndarray

    @property
    def size(self) -> int:
        return len(self.words)

    def on_face(self, color: int) -> np.ndarray:
        return np.flatnonzero(self.face == color)


def word_space(rule: SubdivisionRule, k: int) -> WordSpace:
    cells = rule.cells
    cache = cells.__dict__.setdefault("_word_spaces", {})
    if k in cache:
        return cache[k]
    words = tuple(tile_words(cells, k))
    index = {w: i for i, w in enumerate(words)}
    rows, cols = [], []
    for i, w in enumerate(words):
        for t in cells.succ[w[-1]]:
            if cells.dim[t] != 2:
                continue
            j = index.get(w[1:] + (t,))
            if j is not None:
                rows.append(i)
                cols.append(j)
    face = np.array([cells.carrier[w[0]] for w in words], dtype=np.int64)
    space = WordSpace(k, words, index, face, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))
    cache[k] = space
    return space


def potential_vector(rule: SubdivisionRule, phi: Potential, k: int) -> np.ndarray:
    """Float values of phi on the k-words (k at least its symbolic depth)."""
    K = phi.symbolic_depth
    if k < K:
        raise RuleError(f"depth {k} is below the potential's depth {K}")
    space = word_space(rule, k)
    table = {w: float(v) for w, v in phi.symbolic_table(rule).items()}
    return np.array([table[w[:K]] for w in space.words])


def working_depth(phi: Potential, depth: int | None) -> int:
    return max(phi.symbolic_depth, depth or 1)


@dataclass(frozen=True)
class WeightedMatrix:
    """Sparse matrix with entries exp(psi(source) - shift) on allowed transitions.

    ``shift`` is subtracted from the exponent for overflow safety; the true
    matrix is exp(shift) times ``matrix``.
    """

    space: WordSpace
    matrix: sp.csr_matrix
    shift: float = 0.0

    def operator(self) -> sp.csr_matrix:
        """The Ruelle operator (up to the factor exp(shift)) acting on vectors."""
        return self.matrix.T.tocsr()


def weighted_matrix(rule: SubdivisionRule, log_weights: np.ndarray, k: int, rescale: bool = True) -> WeightedMatrix:
    """Weighted transitions from per-word log weights (real or complex)."""
    space = word_space(rule, k)
    log_weights = np.asarray(log_weights)
    shift = float(np.max(log_weights.real)) if rescale and log_weights.size else 0.0
    data = np.exp(log_weights[space.rows] - shift)
    M = sp.csr_matrix((data, (space.rows, space.cols)), shape=(space.size, space.size))
    return WeightedMatrix(space, M, shift)


def potential_matrix(rule: SubdivisionRule, phi: Potential, t: complex = 1.0, depth: int | None = None) -> WeightedMatrix:
    k = working_depth(phi, depth)
    return weighted_matrix(rule, t * potential_vector(rule, phi, k), k)


def _require_mixing(rule: SubdivisionRule) -> None:
    cells = rule.cells
    flag = cells.__dict__.get("_tile_mixing")
    if flag is None:
        flag = is_topologically_mixing(tile_shift(rule))
        cells.__dict__["_tile_mixing"] = flag
    if not flag:
        raise RuleError("tile shift is not topologically mixing; Perron data is degenerate")


@dataclass(frozen=True)
class PerronResult:
    value: float  # log of the Perron root of the rescaled matrix
    vector: np.ndarray
    residual: float
    iterations: int
    method: str


def perron(A: sp.spmatrix, tol: float = TOLERANCE, max_iters: int = MAX_ITERS) -> PerronResult:
    """Perron root and positive eigenvector of a nonnegative primitive matrix."""
    n = A.shape[0]
    v = np.ones(n) / n
    lam = 0.0
    for it in range(1, max_iters + 1):
        w = A @ v
        new = w.sum()
        if new <= 0:
            break
        w /= new
        done = abs(new - lam) <= tol * new and np.max(np.abs(w - v)) <= tol * np.max(w)
        v, lam = w, new
        if done:
            res = float(np.max(np.abs(A @ v - lam * v)) / np.max(v))
            return PerronResult(math.log(lam), v, res, it, "power")
    # fall back to a dense eigensolver
    vals, vecs = np.linalg.eig(A.toarray())
    i = int(np.argmax(vals.real))
    lam = float(vals[i].real)
    v = np.abs(vecs[:, i].real)
    v /= v.sum()
    if lam <= 0:
        raise ConvergenceError("Perron root is not positive")
    res = float(np.max(np.abs(A @ v - lam * v)) / np.max(v))
    return PerronResult(math.log(lam), v, res, max_iters, "dense")


@dataclass(frozen=True)
class PressureResult:
    value: float
    residual: float
    iterations: int
    depth: int
    method: str


def pressure(
    rule: SubdivisionRule,
    phi: Potential,
    t: float = 1.0,
    depth: int | None = None,
    tol: float = TOLERANCE,
    max_iters: int = MAX_ITERS,
) -> PressureResult:
    """P(f, t phi) as the log Perron root of the weighted tile-word matrix."""
    _require_mixing(rule)
    W = potential_matrix(rule, phi, t, depth)
    res = perron(W.operator(), tol, max_iters)
    return PressureResult(W.shift + res.value, res.residual, res.iterations, W.space.depth, res.method)


def eventual_positivity(rule: SubdivisionRule, phi: Potential, cap: int = 64) -> int | None:
    """Least n <= cap with S_n phi > 0 on every admissible tile word, else None."""
    space = word_space(rule, phi.symbolic_depth)
    exact = {i: phi.symbolic_value(w) for i, w in enumerate(space.words)}
    succ = [[] for _ in range(space.size)]
    for a, b in zip(space.rows, space.cols):
        succ[a].append(b)
    best = dict(exact)  # min over length-n paths of the Birkhoff sum, exact
    for n in range(1, cap + 1):
        if min(best.values()) > 0:
            return n
        best = {i: exact[i] + min(best[j] for j in succ[i]) for i in range(space.size)}
    return None


def s0(
    rule: SubdivisionRule,
    phi: Potential,
    depth: int | None = None,
    tol: float = 1e-12,
    cap: int = 64,
) -> float:
    """The unique zero of t -> P(f, -t phi) for eventually positive phi."""
    if eventual_positivity(rule, phi, cap) is None:
        raise RuleError(f"eventual positivity not certified within {cap} steps")
    P = lambda t: pressure(rule, phi, -t, depth).value
    lo, hi = 0.0, 1.0
    p_lo = P(lo)
    if p_lo <= 0:
        raise RuleError("pressure at t = 0 is not positive")
    grid = [(lo, p_lo)]
    while P(hi) > 0:
        grid.append((hi, P(hi)))
        lo, hi = hi, 2 * hi
        if hi > 1e8:
            raise RuleError("could not bracket the zero of the pressure")
    grid.append((hi, P(hi)))
    vals = [p for _, p in grid]
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise RuleError("sampled pressure is not strictly decreasing")
    return brentq(P, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


def pressure_curve(rule: SubdivisionRule, phi: Potential, ts, depth: int | None = None) -> list[tuple[float, float]]:
    return [(float(t), pressure(rule, phi, t, depth).value) for t in ts]


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class NormalizedPotentialData:
    P: float
    u: np.ndarray  # eigenfunction: L u = e^P u
    m: np.ndarray  # eigenmeasure: L* m = e^P m, total mass 1
    gibbs: np.ndarray
    space: WordSpace
    tilde: sp.csr_matrix  # transitions of the normalized potential
    residual_u: float
    residual_m: float
    t: float = 1.0
    log_weights: np.ndarray = field(default=None, repr=False)

    def tilde_operator(self) -> sp.csr_matrix:
        return self.tilde.T.tocsr()

    def cylinder_weight(self, word) -> float:
        """Gibbs measure of the cylinder of a tile word of length >= k."""
        k = self.space.depth
        if len(word) < k:
            raise ValueError("cylinder shorter than the working depth")
        idx = [self.space.index[tuple(word[i : i + k])] for i in range(len(word) - k + 1)]
        w = self.u[idx[0]]
        for i in idx[:-1]:
            w *= math.exp(self.log_weights[i] - self.P)
        return float(w * self.m[idx[-1]])

    def gibbs_constant(self) -> float:
        return float(max(self.u.max() / self.u.min(), self.m.max() / self.m.min()))


def normalize(
    rule: SubdivisionRule,
    phi: Potential,
    t: float = 1.0,
    depth: int | None = None,
    tol: float = TOLERANCE,
    max_iters: int = MAX_ITERS,
) -> NormalizedPotentialData:
    """Perron data of t phi and the transition weights of the normalized potential."""
    _require_mixing(rule)
    k = working_depth(phi, depth)
    logw = t * potential_vector(rule, phi, k)
    W = weighted_matrix(rule, logw, k)
    right = perron(W.operator(), tol, max_iters)  # eigenfunction u
    left = perron(W.matrix.tocsr(), tol, max_iters)  # eigenmeasure m
    P = W.shift + right.value
    m = left.vector / left.vector.sum()
    u = right.vector / float(m @ right.vector)
    space = W.space
    data = np.exp(logw[space.rows] - P) * u[space.rows] / u[space.cols]
    tilde = sp.csr_matrix((data, (space.rows, space.cols)), shape=(space.size, space.size))
    L = W.operator() * math.exp(W.shift)
    res_u = float(np.max(np.abs(L @ u - math.exp(P) * u)) / np.max(u))
    res_m = float(np.max(np.abs(L.T @ m - math.exp(P) * m)) / np.max(m))
    if max(res_u, res_m) > 1e-8:
        raise ConvergenceError(f"eigen-residuals too large: {res_u:.3g}, {res_m:.3g}")
    return NormalizedPotentialData(P, u, m, u * m, space, tilde, res_u, res_m, t, logw)


# ---------------------------------------------------------------------------
# Ruelle operators


def complex_log_weights(rule: SubdivisionRule, psi, k: int, coefficient: complex = 1.0) -> np.ndarray:
    """Per-word log weights of ``coefficient * psi``.

    ``psi`` is a Potential or a pair (real part, imaginary part) of Potentials.
    """
    if isinstance(psi, Potential):
        return coefficient * potential_vector(rule, psi, k)
    re, im = psi
    return coefficient * (potential_vector(rule, re, k) + 1j * potential_vector(rule, im, k))


def _psi_depth(psi) -> int:
    if isinstance(psi, Potential):
        return psi.symbolic_depth
    return max(p.symbolic_depth for p in psi)


def ruelle_apply(rule: SubdivisionRule, psi, u: np.ndarray, n: int = 1, coefficient: complex = 1.0) -> np.ndarray:
    """L_psi^n u for a depth-j function u given as a vector over j-words."""
    u = np.asarray(u)
    k = _infer_depth(rule, u)
    if k < _psi_depth(psi):
        raise RuleError("function depth is below the potential depth")
    W = weighted_matrix(rule, complex_log_weights(rule, psi, k, coefficient), k, rescale=False)
    return operator_power_apply(W.operator(), u, n)


def operator_power_apply(L: sp.spmatrix, u: np.ndarray, n: int) -> np.ndarray:
    v = np.array(u, dtype=np.result_type(L.dtype, np.asarray(u).dtype))
    for _ in range(n):
        v = L @ v
    return v


def _infer_depth(rule: SubdivisionRule, u: np.ndarray) -> int:
    for k in range(1, 12):
        if word_space(rule, k).size == len(u):
            return k
        if word_space(rule, k).size > len(u):
            break
    raise RuleError(f"vector of length {len(u)} is not a function on k-words")


@dataclass(frozen=True)
class TransitionWeights:
    """Transition weights on a word space (a Ruelle operator in sparse form)."""

    space: WordSpace
    matrix: sp.csr_matrix

    @staticmethod
    def of(rule: SubdivisionRule, psi, k: int | None = None, coefficient: complex = 1.0) -> "TransitionWeights":
        k = max(_psi_depth(psi), k or 1)
        W = weighted_matrix(rule, complex_log_weights(rule, psi, k, coefficient), k, rescale=False)
        return TransitionWeights(W.space, W.matrix)

    @staticmethod
    def tilde(data: NormalizedPotentialData) -> "TransitionWeights":
        return TransitionWeights(data.space, data.tilde)

    def operator(self) -> sp.csr_matrix:
        return self.matrix.T.tocsr()

    def lookup(self) -> dict:
        coo = self.matrix.tocoo()
        return {(int(a), int(b)): v for a, b, v in zip(coo.row, coo.col, coo.data)}


def split_ruelle_piece(
    rule: SubdivisionRule, weights: TransitionWeights, color: int, E, n: int, u: np.ndarray
) -> np.ndarray:
    """Sum over the n-tiles in E mapped onto the 0-tile ``color`` by f^n.

    The result is a vector over k-words (zero off ``color``).  ``E`` is a
    collection of admissible n-tile words (tuples of tile indices, or of
    0-tile indices when n = 0).  Preimages are enumerated one by one, so this
    is an independent route to the matrix form of the operator.
    """
    cells = rule.cells
    space = weights.space
    k = space.depth
    u = np.asarray(u)
    out = np.zeros(space.size, dtype=np.result_type(u.dtype, weights.matrix.dtype))
    targets = space.on_face(color)
    if n == 0:
        E = set(E)
        if not E <= {cells.black, cells.white}:
            raise RuleError("E is not a union of 0-tiles")
        if color in E:
            out[targets] = u[targets]
        return out
    E = [tuple(e) for e in E]
    for e in E:
        if len(e) != n or not cells.is_admissible(e) or any(cells.dim[t] != 2 for t in e):
            raise RuleError("E is not tile-aligned: expected admissible n-tile words")
    table = weights.lookup()
    for e in E:
        if cells.img[e[-1]] != color:
            continue
        for j in targets:
            z = e + space.words[j]
            idx = [space.index[z[i : i + k]] for i in range(n + 1)]
            w = 1.0
            for a, b in zip(idx, idx[1:]):
                w = w * table[(a, b)]
            out[j] += w * u[idx[0]]
    return out


def split_pair(space: WordSpace, rule: SubdivisionRule, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cells = rule.cells
    return v[space.on_face(cells.black)], v[space.on_face(cells.white)]


def join_pair(space: WordSpace, rule: SubdivisionRule, pair) -> np.ndarray:
    cells = rule.cells
    u_b, u_w = (np.asarray(p) for p in pair)
    out = np.zeros(space.size, dtype=np.result_type(u_b.dtype, u_w.dtype))
    out[space.on_face(cells.black)] = u_b
    out[space.on_face(cells.white)] = u_w
    return out


def split_ruelle_apply(rule: SubdivisionRule, weights: TransitionWeights, pair, n: int) -> tuple[np.ndarray, np.ndarray]:
    """The split operator on (u_b, u_w) via the four colour blocks of L^n."""
    space = weights.space
    L = weights.operator()
    u = join_pair(space, rule, pair)
    if n == 0:
        return split_pair(space, rule, u.copy())
    cells = rule.cells
    faces = {c: space.on_face(c) for c in (cells.black, cells.white)}
    Ln = L
    for _ in range(n - 1):
        Ln = Ln @ L
    Ln = Ln.tocsr()
    out = []
    for c in (cells.black, cells.white):
        v = 0
        for c2 in (cells.black, cells.white):
            block = Ln[faces[c]][:, faces[c2]]
            v = v + block @ u[faces[c2]]
        out.append(np.asarray(v))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# spectral gap


@dataclass(frozen=True)
class GapFit:
    ratio: float
    residual: float
    norms: tuple[tuple[int, float], ...]
    collapsed: bool = False

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "sup_norm"])
        for n, v in self.norms:
            w.writerow([n, repr(v)])
        w.writerow(["ratio", repr(self.ratio)])
        w.writerow(["residual", repr(self.residual)])
        w.writerow(["collapsed", int(self.collapsed)])
        return buf.getvalue()


def spectral_gap_estimate(
    rule: SubdivisionRule,
    phi: Potential,
    t: float = 1.0,
    n_range: tuple[int, int] = (2, 12),
    depth: int | None = None,
    samples: int = 4,
    seed: int = 0,
) -> GapFit:
    """Fit the geometric decay of the normalized operator on mean-zero inputs.

    Random pairs are centred with the Gibbs weights and pushed forward; the
    worst sup-norm at each n (relative to the input) is fitted by least
    squares in log scale.  When the operator kills mean-zero functions
    outright (all norms below 1e-14 on the fitted range) the fit is reported
    as collapsed with ratio 0.
    """
    data = normalize(rule, phi, t, depth)
    L = data.tilde_operator()
    rng = np.random.default_rng(seed)
    lo, hi = n_range
    worst = np.zeros(hi + 1)
    any_input = False
    for _ in range(samples):
        u = rng.standard_normal(data.space.size)
        u -= float(data.gibbs @ u)
        scale = np.max(np.abs(u))
        if scale < 1e-14:
            continue
        any_input = True
        v = u / scale
        for n in range(1, hi + 1):
            v = L @ v
            worst[n] = max(worst[n], float(np.max(np.abs(v))))
    if not any_input:
        raise RuleError("fit degenerate: all inputs vanish after centring")
    ns = np.arange(lo, hi + 1)
    norms = worst[lo : hi + 1]
    table = tuple((int(n), float(v)) for n, v in zip(ns, norms))
    if np.all(norms < 1e-14):
        return GapFit(0.0, 0.0, table, collapsed=True)
    keep = norms >= 1e-14
    if keep.sum() < 2:
        return GapFit(0.0, 0.0, table, collapsed=True)
    slope, icpt = np.polyfit(ns[keep], np.log(norms[keep]), 1)
    resid = float(np.sqrt(np.mean((np.log(norms[keep]) - (slope * ns[keep] + icpt)) ** 2)))
    return GapFit(float(math.exp(slope)), resid, table)


def export_pressure_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "pressure"])
    for t, p in rows:
        w.writerow([repr(float(t)), repr(float(p))])
    return buf.getvalue()
