"""Two-tile subdivision rules and their level-n cell complexes.

A rule describes the first subdivision of the sphere by an invariant Jordan
curve: the 0-cells (post points, curve arcs, the white and black faces) and
the 1-cells (vertices, edges, tiles) together with the image of every 1-cell.

Internally every level-n cell is a *carrier word*: a sequence of 1-cells
``(s_0, ..., s_{n-1})`` where the open 0-cell containing ``s_{i+1}`` is the
image of ``s_i``.  The word names the open n-cell of points ``x`` whose
iterate ``f^i(x)`` lies in the open 1-cell ``s_i``.  Closure incidence is
checked letter by letter, so tiles, edges and vertices at any level never
need explicit geometry.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property

WHITE = "white"
BLACK = "black"
COLORS = (WHITE, BLACK)

DEFAULT_CELL_CAP = 2_000_000


class RuleError(ValueError):
    """Raised for malformed rule files or rules that fail validation."""


@dataclass(frozen=True)
class ZeroEdge:
    id: str
    start: str
    end: str


@dataclass(frozen=True)
class OneVertex:
    id: str
    image: str
    on_curve: bool
    incident_tile_count: int | None = None


@dataclass(frozen=True)
class OneEdge:
    id: str
    image: str
    endpoints: tuple[str, str]
    on_curve: bool
    orientation_preserving: bool


@dataclass(frozen=True)
class OneTile:
    id: str
    color: str
    # oriented edges, tile on the left; a leading "-" reverses the edge
    boundary: tuple[str, ...]


@dataclass(frozen=True)
class SubdivisionRule:
    post: tuple[str, ...]
    zero_edges: tuple[ZeroEdge, ...]
    one_vertices: tuple[OneVertex, ...]
    one_edges: tuple[OneEdge, ...]
    one_tiles: tuple[OneTile, ...]
    curve_edge_cycle: tuple[str, ...]
    name: str = field(default="", compare=False)

    @property
    def post_count(self) -> int:
        return len(self.post)

    @cached_property
    def cells(self) -> "RuleCells":
        report = validate_rule(self)
        if not report.ok:
            raise RuleError(f"rule failed validation: {report.first_failure()}")
        return RuleCells(self)


# ---------------------------------------------------------------------------
# parsing and serialization

_SECTIONS = ("post", "zero_edges", "one_vertices", "one_edges", "one_tiles", "curve_cycle")


def _flag(token: str, lineno: int) -> bool:
    if token in ("1", "true"):
        return True
    if token in ("0", "false"):
        return False
    raise RuleError(f"line {lineno}: syntax error: expected 0/1 flag, got {token!r}")


def _ident(token: str, lineno: int) -> str:
    if not token or not token.isascii() or any(ch.isspace() or ch in ",#[]" for ch in token):
        raise RuleError(f"line {lineno}: syntax error: bad identifier {token!r}")
    if token.startswith("-"):
        raise RuleError(f"line {lineno}: syntax error: identifier may not start with '-'")
    return token


def parse_rule(text: str, name: str = "") -> SubdivisionRule:
    """Parse rule-file text; resolves references but does not check dynamics."""
    rows: dict[str, list[tuple[int, list[str]]]] = {s: [] for s in _SECTIONS}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or line[1:-1] not in rows:
                raise RuleError(f"line {lineno}: syntax error: unknown section {line!r}")
            section = line[1:-1]
            continue
        if section is None:
            raise RuleError(f"line {lineno}: syntax error: record outside a section")
        rows[section].append((lineno, [tok.strip() for tok in line.split(",")]))

    def expect(section, lineno, fields, lo, hi=None):
        hi = lo if hi is None else hi
        if not lo <= len(fields) <= hi:
            raise RuleError(f"line {lineno}: syntax error: [{section}] record needs {lo} fields")

    post = []
    for lineno, f in rows["post"]:
        expect("post", lineno, f, 1)
        post.append(_ident(f[0], lineno))
    zero_edges = []
    for lineno, f in rows["zero_edges"]:
        expect("zero_edges", lineno, f, 3)
        zero_edges.append(ZeroEdge(*(_ident(t, lineno) for t in f)))
    verts = []
    for lineno, f in rows["one_vertices"]:
        expect("one_vertices", lineno, f, 3, 4)
        count = None
        if len(f) == 4 and f[3] not in ("", "-"):
            if not f[3].isdigit():
                raise RuleError(f"line {lineno}: syntax error: bad incident_tile_count {f[3]!r}")
            count = int(f[3])
        verts.append(OneVertex(_ident(f[0], lineno), _ident(f[1], lineno), _flag(f[2], lineno), count))
    edges = []
    for lineno, f in rows["one_edges"]:
        expect("one_edges", lineno, f, 6)
        edges.append(
            OneEdge(
                _ident(f[0], lineno),
                _ident(f[1], lineno),
                (_ident(f[2], lineno), _ident(f[3], lineno)),
                _flag(f[4], lineno),
                _flag(f[5], lineno),
            )
        )
    tiles = []
    for lineno, f in rows["one_tiles"]:
        if len(f) < 3:
            raise RuleError(f"line {lineno}: syntax error: [one_tiles] record needs a boundary")
        color = f[1]
        if color not in COLORS:
            raise RuleError(f"line {lineno}: syntax error: color must be white or black")
        bnd = []
        for tok in f[2:]:
            _ident(tok.lstrip("-"), lineno)
            if tok.startswith("--"):
                raise RuleError(f"line {lineno}: syntax error: bad oriented edge {tok!r}")
            bnd.append(tok)
        tiles.append(OneTile(_ident(f[0], lineno), color, tuple(bnd)))
    cycle = []
    for lineno, f in rows["curve_cycle"]:
        expect("curve_cycle", lineno, f, 1)
        cycle.append(_ident(f[0], lineno))

    rule = SubdivisionRule(tuple(post), tuple(zero_edges), tuple(verts), tuple(edges), tuple(tiles), tuple(cycle), name)
    _check_references(rule)
    return rule


def _check_references(rule: SubdivisionRule) -> None:
    seen: set[str] = set()
    groups = [
        ("0-vertex", rule.post),
        ("0-edge", [e.id for e in rule.zero_edges]),
        ("1-edge", [e.id for e in rule.one_edges]),
        ("1-tile", [t.id for t in rule.one_tiles]),
    ]
    for kind, ids in groups:
        for ident in ids:
            if ident in seen or ident in COLORS:
                raise RuleError(f"duplicate id {ident!r} ({kind})")
            seen.add(ident)
    vertex_ids: set[str] = set()
    for v in rule.one_vertices:
        if v.id in vertex_ids or (v.id in seen and v.id not in rule.post):
            raise RuleError(f"duplicate id {v.id!r} (1-vertex)")
        vertex_ids.add(v.id)
    post, zero_ids = set(rule.post), {e.id for e in rule.zero_edges}
    edge_ids = {e.id for e in rule.one_edges}

    def need(ident, pool, what):
        if ident not in pool:
            raise RuleError(f"dangling identifier {ident!r} (expected a {what})")

    for e in rule.zero_edges:
        need(e.start, post, "0-vertex")
        need(e.end, post, "0-vertex")
    for v in rule.one_vertices:
        need(v.image, post, "0-vertex")
    for e in rule.one_edges:
        need(e.image, zero_ids, "0-edge")
        for a in e.endpoints:
            need(a, vertex_ids, "1-vertex")
    for t in rule.one_tiles:
        for tok in t.boundary:
            need(tok.lstrip("-"), edge_ids, "1-edge")
    for ident in rule.curve_edge_cycle:
        need(ident, edge_ids, "1-edge")


def serialize_rule(rule: SubdivisionRule) -> str:
    """Byte-stable text form; ``parse_rule(serialize_rule(r)) == r``."""
    out = ["[post]"]
    out += list(rule.post)
    out.append("[zero_edges]")
    out += [f"{e.id}, {e.start}, {e.end}" for e in rule.zero_edges]
    out.append("[one_vertices]")
    for v in rule.one_vertices:
        count = "-" if v.incident_tile_count is None else str(v.incident_tile_count)
        out.append(f"{v.id}, {v.image}, {int(v.on_curve)}, {count}")
    out.append("[one_edges]")
    for e in rule.one_edges:
        a, b = e.endpoints
        out.append(f"{e.id}, {e.image}, {a}, {b}, {int(e.on_curve)}, {int(e.orientation_preserving)}")
    out.append("[one_tiles]")
    out += [", ".join((t.id, t.color) + t.boundary) for t in rule.one_tiles]
    out.append("[curve_cycle]")
    out += list(rule.curve_edge_cycle)
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    witness: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def first_failure(self) -> str:
        bad = self.failed()
        return f"{bad[0].name}: {bad[0].witness}" if bad else ""

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _orient(token: str) -> tuple[str, bool]:
    return (token[1:], False) if token.startswith("-") else (token, True)


class _Checker:
    def __init__(self):
        self.checks: list[Check] = []

    def add(self, name, passed, witness=""):
        self.checks.append(Check(name, bool(passed), "" if passed else witness))
        return passed


def validate_rule(rule: SubdivisionRule) -> ValidationReport:
    """Run every combinatorial consistency check and report each one."""
    ck = _Checker()
    m = rule.post_count
    post = list(rule.post)
    pidx = {p: i for i, p in enumerate(post)}
    verts = {v.id: v for v in rule.one_vertices}
    edges = {e.id: e for e in rule.one_edges}
    tiles = {t.id: t for t in rule.one_tiles}

    ck.add("at least three post points", m >= 3, f"m = {m}")
    zero_ok = len(rule.zero_edges) == m and all(
        e.start == post[i] and e.end == post[(i + 1) % m] for i, e in enumerate(rule.zero_edges)
    )
    ck.add("zero edges follow the post cycle", zero_ok, "0-edge i must run from post[i] to post[i+1]")
    zero_of = {e.id: i for i, e in enumerate(rule.zero_edges)}

    whites = sum(t.color == WHITE for t in rule.one_tiles)
    blacks = len(rule.one_tiles) - whites
    deg = whites
    ck.add("white and black tile counts agree", whites == blacks, f"{whites} white vs {blacks} black")
    ck.add("degree at least two", deg >= 2, f"deg = {deg}")
    ck.add("tile count is 2 deg", len(rule.one_tiles) == 2 * deg, f"{len(rule.one_tiles)} tiles")
    ck.add("edge count is m deg", len(rule.one_edges) == m * deg, f"{len(rule.one_edges)} edges, m deg = {m * deg}")
    missing_post = [p for p in post if p not in verts]
    ck.add("post points are 1-vertices", not missing_post, f"missing {missing_post}")

    # tile boundaries: closed m-gons
    walks: dict[str, list[str]] = {}
    bad = []
    for t in rule.one_tiles:
        seq = []
        for tok in t.boundary:
            eid, fwd = _orient(tok)
            a, b = edges[eid].endpoints
            seq.append((a, b) if fwd else (b, a))
        closed = all(seq[i][1] == seq[(i + 1) % len(seq)][0] for i in range(len(seq)))
        vs = [s[0] for s in seq]
        ok = closed and len(seq) == m and len(set(vs)) == m and len({_orient(x)[0] for x in t.boundary}) == m
        if ok:
            walks[t.id] = vs
        else:
            bad.append(t.id)
    ck.add("tile is an m-gon", not bad, f"tiles {bad[:5]}")

    # each edge: one black, one white tile, opposite orientations
    uses: dict[str, list[tuple[str, bool]]] = defaultdict(list)
    for t in rule.one_tiles:
        for tok in t.boundary:
            eid, fwd = _orient(tok)
            uses[eid].append((t.id, fwd))
    bad = []
    for e in rule.one_edges:
        u = uses.get(e.id, [])
        if len(u) != 2 or u[0][1] == u[1][1] or {tiles[u[0][0]].color, tiles[u[1][0]].color} != set(COLORS):
            bad.append(e.id)
    ck.add("edge bounds one black and one white", not bad, f"edges {bad[:5]}")

    # the curve
    cyc = list(rule.curve_edge_cycle)
    on_edges = [e.id for e in rule.one_edges if e.on_curve]
    curve_ok, witness = True, ""
    segment_of: dict[str, int] = {}
    vertex_segment: dict[str, int] = {}
    if sorted(cyc) != sorted(on_edges) or len(set(cyc)) != len(cyc):
        curve_ok, witness = False, "curve cycle must list every on-curve edge exactly once"
    elif not cyc or not post or edges[cyc[0]].endpoints[0] != post[0]:
        curve_ok, witness = False, "curve cycle must start at the first post point"
    else:
        seq_v = [edges[e].endpoints[0] for e in cyc]
        chained = all(edges[cyc[i]].endpoints[1] == edges[cyc[(i + 1) % len(cyc)]].endpoints[0] for i in range(len(cyc)))
        if not chained or len(set(seq_v)) != len(seq_v):
            curve_ok, witness = False, "on-curve edges do not form a simple closed curve (edges run along C)"
        else:
            hits = [v for v in seq_v if v in pidx]
            if hits != post:
                curve_ok, witness = False, f"post points met in order {hits}"
            else:
                seg = -1
                for e in cyc:
                    a = edges[e].endpoints[0]
                    if a in pidx:
                        seg = pidx[a]
                    else:
                        vertex_segment[a] = seg
                    segment_of[e] = seg
    ck.add("curve is a simple closed curve through the post points", curve_ok, witness)
    curve_vertices = {edges[e].endpoints[0] for e in cyc} if curve_ok else set()
    flag_bad = [v.id for v in rule.one_vertices if v.on_curve != (v.id in curve_vertices)]
    ck.add("vertex on-curve flags match the curve", curve_ok and not flag_bad, f"vertices {flag_bad[:5]}")

    # faces by flood fill across off-curve edges
    face: dict[str, str] = {}
    face_ok, witness = True, ""
    if curve_ok and uses:
        seeds = {}
        for t in rule.one_tiles:
            for tok in t.boundary:
                eid, fwd = _orient(tok)
                if edges[eid].on_curve:
                    want = WHITE if fwd else BLACK
                    if seeds.setdefault(t.id, want) != want:
                        face_ok, witness = False, f"tile {t.id} lies on both sides of C"
        adj = defaultdict(list)
        for e in rule.one_edges:
            if not e.on_curve and len(uses[e.id]) == 2:
                a, b = uses[e.id][0][0], uses[e.id][1][0]
                adj[a].append(b)
                adj[b].append(a)
        for start, col in seeds.items():
            if start in face:
                continue
            face[start] = col
            queue = deque([start])
            while queue:
                t = queue.popleft()
                for s in adj[t]:
                    if s not in face:
                        face[s] = col
                        queue.append(s)
        conflicts = [t for t, col in seeds.items() if face.get(t) != col]
        if conflicts:
            face_ok, witness = False, f"tiles {conflicts[:5]} reach both faces without crossing C"
        unreached = [t.id for t in rule.one_tiles if t.id not in face]
        if unreached:
            face_ok, witness = False, f"tiles {unreached[:5]} not connected to C"
    else:
        face_ok, witness = False, "curve invalid"
    ck.add("faces are consistent", face_ok, witness)

    # cellular labels: boundary of each tile maps onto the boundary of its color
    bad = []
    if zero_ok:
        for t in rule.one_tiles:
            if t.id not in walks:
                bad.append(t.id)
                continue
            imgs = [pidx[verts[v].image] for v in walks[t.id]]
            step = 1 if t.color == WHITE else -1
            ok = all((imgs[(i + 1) % m] - imgs[i]) % m == step % m for i in range(m))
            for i, tok in enumerate(t.boundary):
                eid, fwd = _orient(tok)
                a, b = imgs[i], imgs[(i + 1) % m]
                lo = a if step == 1 else b
                if zero_of.get(edges[eid].image) != lo:
                    ok = False
            if not ok:
                bad.append(t.id)
    ck.add("cellular images", zero_ok and not bad, f"tiles {bad[:5]}")

    bad = []
    for e in rule.one_edges:
        a, b = (verts[x].image for x in e.endpoints)
        z = rule.zero_edges[zero_of[e.image]] if e.image in zero_of else None
        if z is None or {a, b} != {z.start, z.end}:
            bad.append(e.id)
        elif e.on_curve and e.orientation_preserving != (a == z.start):
            bad.append(e.id)
    ck.add("edge images and orientation flags", not bad, f"edges {bad[:5]}")

    # incident tile counts and local degrees
    counts = Counter()
    for t in rule.one_tiles:
        for v in walks.get(t.id, []):
            counts[v] += 1
    bad = [v.id for v in rule.one_vertices if counts[v.id] % 2 or counts[v.id] == 0]
    ck.add("incident tile count is even", not bad, f"vertices {bad[:5]}")
    bad = [
        v.id
        for v in rule.one_vertices
        if v.incident_tile_count is not None and v.incident_tile_count != counts[v.id]
    ]
    ck.add("incident tile count matches boundary data", not bad, f"vertices {bad[:5]}")
    local = {v: counts[v] // 2 for v in verts}
    fiber = defaultdict(int)
    for v in rule.one_vertices:
        fiber[v.image] += local[v.id]
    bad = [p for p in post if fiber[p] != deg]
    ck.add("local degrees sum to deg over each post point", not bad, f"post points {bad}")
    edge_fiber = Counter(e.image for e in rule.one_edges)
    bad = [z.id for z in rule.zero_edges if edge_fiber[z.id] != deg]
    ck.add("each 0-edge has deg preimages", not bad, f"0-edges {bad}")
    rh = sum(d - 1 for d in local.values())
    ck.add("Riemann-Hurwitz", rh == 2 * deg - 2, f"sum (deg_f - 1) = {rh}, 2 deg - 2 = {2 * deg - 2}")

    # Euler characteristics
    chi = len(rule.one_vertices) - len(rule.one_edges) + len(rule.one_tiles)
    ck.add("sphere Euler characteristic", chi == 2, f"V - E + T = {chi}")
    disk_ok, witness = face_ok, "faces invalid"
    if face_ok:
        for col in COLORS:
            ts = [t for t in rule.one_tiles if face[t.id] == col]
            es = {_orient(tok)[0] for t in ts for tok in t.boundary}
            vs = {v for t in ts for v in walks.get(t.id, [])}
            if len(vs) - len(es) + len(ts) != 1:
                disk_ok, witness = False, f"{col} face: V - E + T = {len(vs) - len(es) + len(ts)}"
    ck.add("each 0-tile is subdivided into a disk", disk_ok, witness)
    orient_bad = []
    if curve_ok:
        for e in cyc:
            a = edges[e].endpoints[0]
            img_start = verts[a].image
            z = rule.zero_edges[zero_of[edges[e].image]]
            if (img_start == z.start) != edges[e].orientation_preserving:
                orient_bad.append(e)
    ck.add("curve orientation flags", curve_ok and not orient_bad, f"edges {orient_bad[:5]}")
    return ValidationReport(tuple(ck.checks))


def degree(rule: SubdivisionRule) -> int:
    """Topological degree: the number of white 1-tiles."""
    whites = sum(t.color == WHITE for t in rule.one_tiles)
    blacks = len(rule.one_tiles) - whites
    if whites != blacks:
        raise RuleError(f"inconsistent tile colors: {whites} white vs {blacks} black")
    return whites


# ---------------------------------------------------------------------------
# compiled cell data


class RuleCells:
    """Indexed view of a validated rule.

    0-cells: post points ``0..m-1``, 0-edges ``m..2m-1`` (edge ``m+i`` runs
    from post point ``i`` to ``i+1``), white face ``2m``, black face ``2m+1``.
    1-cells: vertices, then edges, then tiles, each in file order.
    """

    def __init__(self, rule: SubdivisionRule):
        m = rule.post_count
        self.m = m
        self.deg = degree(rule)
        self.zero_names = list(rule.post) + [e.id for e in rule.zero_edges] + [WHITE, BLACK]
        self.zero_dim = [0] * m + [1] * m + [2, 2]
        self.white, self.black = 2 * m, 2 * m + 1
        zidx = {n: i for i, n in enumerate(self.zero_names)}

        verts, edges, tiles = rule.one_vertices, rule.one_edges, rule.one_tiles
        self.names = [v.id for v in verts] + [e.id for e in edges] + [t.id for t in tiles]
        self.index = {n: i for i, n in enumerate(self.names)}
        nv, ne = len(verts), len(edges)
        self.vertex_cells = list(range(nv))
        self.edge_cells = list(range(nv, nv + ne))
        self.tile_cells = list(range(nv + ne, len(self.names)))
        self.dim = [0] * nv + [1] * ne + [2] * len(tiles)
        self.img = [zidx[v.image] for v in verts] + [zidx[e.image] for e in edges] + [zidx[t.color] for t in tiles]
        self.on_curve = [v.on_curve for v in verts] + [e.on_curve for e in edges] + [False] * len(tiles)

        faces: list[set[int]] = [{i} for i in range(len(self.names))]
        for e in edges:
            i = self.index[e.id]
            faces[i] |= {self.index[a] for a in e.endpoints}
        boundary_walk = {}
        for t in tiles:
            i = self.index[t.id]
            walk = []
            for tok in t.boundary:
                eid, fwd = _orient(tok)
                j = self.index[eid]
                faces[i] |= faces[j]
                a, b = edges[j - nv].endpoints
                walk.append(self.index[a if fwd else b])
            boundary_walk[i] = walk
        self.faces = [frozenset(s) for s in faces]
        self.boundary_walk = boundary_walk

        # carriers: the open 0-cell containing each open 1-cell
        carrier = [None] * len(self.names)
        seg = -1
        for eid in rule.curve_edge_cycle:
            e = edges[self.index[eid] - nv]
            a = e.endpoints[0]
            if a in rule.post:
                seg = rule.post.index(a)
                carrier[self.index[a]] = seg
            else:
                carrier[self.index[a]] = m + seg
            carrier[self.index[eid]] = m + seg
        face_of = _tile_faces(rule)
        for t in tiles:
            i = self.index[t.id]
            carrier[i] = zidx[face_of[t.id]]
            for c in self.faces[i]:
                if carrier[c] is None:
                    carrier[c] = carrier[i]
        self.carrier = carrier
        self.tile_face = {self.index[t]: zidx[c] for t, c in face_of.items()}

        # 0-cell closures
        zfaces = [{i} for i in range(2 * m + 2)]
        for i in range(m):
            zfaces[m + i] |= {i, (i + 1) % m}
        for c in (self.white, self.black):
            zfaces[c] = set(range(2 * m)) | {c}
        self.zero_faces = [frozenset(s) for s in zfaces]

        # charts: 0-cell of the image -> face of the 1-cell
        self.chart: list[dict[int, int]] = []
        for i in range(len(self.names)):
            ch = {}
            for c in self.faces[i]:
                if self.img[c] in ch:
                    raise RuleError(f"cell {self.names[i]} is not mapped injectively")
                ch[self.img[c]] = c
            if set(ch) != set(self.zero_faces[self.img[i]]):
                raise RuleError(f"cell {self.names[i]} does not map onto its image cell")
            self.chart.append(ch)

        by_carrier = defaultdict(list)
        for i, c in enumerate(carrier):
            by_carrier[c].append(i)
        self.cells_in = {c: tuple(v) for c, v in by_carrier.items()}
        self.succ = [self.cells_in.get(self.img[i], ()) for i in range(len(self.names))]
        self.post_cell = [self.index[p] for p in rule.post]
        self.curve_cycle = [self.index[e] for e in rule.curve_edge_cycle]
        self.curve_edges = sorted(self.curve_cycle)
        self.orientation = {self.index[e.id]: (1 if e.orientation_preserving else -1) for e in edges}
        self.endpoints = {self.index[e.id]: tuple(self.index[a] for a in e.endpoints) for e in edges}

        counts = Counter()
        for t in self.tile_cells:
            for v in boundary_walk[t]:
                counts[v] += 1
        self.local_degree = {v: counts[v] // 2 for v in self.vertex_cells}
        self.tiles_containing = [tuple(t for t in self.tile_cells if c in self.faces[t]) for c in range(len(self.names))]
        self.curve_edges_containing = [
            tuple(e for e in self.curve_edges if c in self.faces[e]) for c in range(len(self.names))
        ]
        # X^1(e, c): the tile inside face c having curve edge e on its boundary
        self.tile_at = {}
        for e in self.curve_edges:
            for t in self.tiles_containing[e]:
                key = (e, self.tile_face[t])
                if key in self.tile_at:
                    raise RuleError(f"no unique 1-tile on side {key[1]} of edge {self.names[e]}")
                self.tile_at[key] = t
        for e in self.curve_edges:
            for col in (self.white, self.black):
                if (e, col) not in self.tile_at:
                    raise RuleError(f"edge {self.names[e]} has no 1-tile in face {col}")
        # f restricted to post f
        self.post_map = [self.img[p] for p in self.post_cell]
        # position of each curve edge within its 0-edge, in the positive direction
        self.curve_rank = {}
        count_in = Counter()
        for e in self.curve_cycle:
            self.curve_rank[e] = count_in[carrier[e]]
            count_in[carrier[e]] += 1
        self.curve_count = dict(count_in)

    def is_admissible(self, word) -> bool:
        return all(self.carrier[b] == self.img[a] for a, b in zip(word, word[1:]))

    def point_degree(self, cell: int) -> int:
        """Local degree of f at any point of the open 1-cell."""
        return self.local_degree.get(cell, 1) if self.dim[cell] == 0 else 1


def _tile_faces(rule: SubdivisionRule) -> dict[str, str]:
    edges = {e.id: e for e in rule.one_edges}
    uses = defaultdict(list)
    face = {}
    for t in rule.one_tiles:
        for tok in t.boundary:
            eid, fwd = _orient(tok)
            uses[eid].append(t.id)
            if edges[eid].on_curve:
                face[t.id] = WHITE if fwd else BLACK
    adj = defaultdict(list)
    for e in rule.one_edges:
        if not e.on_curve:
            a, b = uses[e.id]
            adj[a].append(b)
            adj[b].append(a)
    queue = deque(face)
    while queue:
        t = queue.popleft()
        for s in adj[t]:
            if s not in face:
                face[s] = face[t]
                queue.append(s)
    return face


# ---------------------------------------------------------------------------
# the Lattes pillow rule


def lattes_rule(k: int) -> SubdivisionRule:
    """Pillow rule of the Lattes map induced by ``z -> k z``.

    Each face of the pillow ``[0,1]^2`` is cut into a ``k x k`` grid.  Front
    grid square ``(a, b)`` is white iff ``a + b`` is even, back square iff
    ``a + b`` is odd.  A grid point ``(i, j)`` maps to the corner
    ``(i mod 2, j mod 2)``.
    """
    if not isinstance(k, int) or k < 2:
        raise RuleError("lattes rule needs an integer k >= 2")
    corner = {(0, 0): "P0", (1, 0): "P1", (1, 1): "P2", (0, 1): "P3"}
    post = ("P0", "P1", "P2", "P3")
    zero = (ZeroEdge("E0", "P0", "P1"), ZeroEdge("E1", "P1", "P2"), ZeroEdge("E2", "P2", "P3"), ZeroEdge("E3", "P3", "P0"))

    def on_boundary(i, j):
        return i in (0, k) or j in (0, k)

    def vname(i, j, side):
        if (i, j) in ((0, 0), (k, 0), (k, k), (0, k)):
            return corner[(i // k, j // k)]
        if on_boundary(i, j):
            return f"p_{i}_{j}"
        return f"p{side}_{i}_{j}"

    def image_corner(i, j):
        return corner[(i % 2, j % 2)]

    vertices = {}
    for side in "fb":
        for i in range(k + 1):
            for j in range(k + 1):
                name = vname(i, j, side)
                if name in vertices:
                    continue
                boundary = on_boundary(i, j)
                if (i, j) in ((0, 0), (k, 0), (k, k), (0, k)):
                    count = 2
                else:
                    count = 4
                vertices[name] = OneVertex(name, image_corner(i, j), boundary, count)

    # curve order: bottom (j=0, left to right), right (i=k, upward),
    # top (j=k, right to left), left (i=0, downward)
    curve: list[tuple[str, tuple[int, int], tuple[int, int]]] = []
    for i in range(k):
        curve.append((f"eh_{i}_0", (i, 0), (i + 1, 0)))
    for j in range(k):
        curve.append((f"ev_{k}_{j}", (k, j), (k, j + 1)))
    for i in reversed(range(k)):
        curve.append((f"eh_{i}_{k}", (i + 1, k), (i, k)))
    for j in reversed(range(k)):
        curve.append((f"ev_0_{j}", (0, j + 1), (0, j)))

    def edge_image(a, b):
        (i0, j0), (i1, j1) = a, b
        if j0 == j1:
            return "E0" if j0 % 2 == 0 else "E2"
        return "E3" if i0 % 2 == 0 else "E1"

    zero_start = {z.id: z.start for z in zero}
    edges = {}
    curve_dir = {}
    for name, a, b in curve:
        img = edge_image(a, b)
        edges[name] = OneEdge(name, img, (vname(*a, "f"), vname(*b, "f")), True, image_corner(*a) == zero_start[img])
        curve_dir[name] = (a, b)
    for side in "fb":
        for i in range(k):
            for j in range(1, k):
                a, b = (i, j), (i + 1, j)
                name = f"e{side}h_{i}_{j}"
                img = edge_image(a, b)
                edges[name] = OneEdge(name, img, (vname(*a, side), vname(*b, side)), False, image_corner(*a) == zero_start[img])
                curve_dir[name] = (a, b)
        for i in range(1, k):
            for j in range(k):
                a, b = (i, j), (i, j + 1)
                name = f"e{side}v_{i}_{j}"
                img = edge_image(a, b)
                edges[name] = OneEdge(name, img, (vname(*a, side), vname(*b, side)), False, image_corner(*a) == zero_start[img])
                curve_dir[name] = (a, b)

    def hname(i, j, side):
        return f"eh_{i}_{j}" if j in (0, k) else f"e{side}h_{i}_{j}"

    def vname_e(i, j, side):
        return f"ev_{i}_{j}" if i in (0, k) else f"e{side}v_{i}_{j}"

    def oriented(name, a, b):
        return name if curve_dir[name] == (a, b) else "-" + name

    tiles = []
    for side in "fb":
        for b in range(k):
            for a in range(k):
                ll, lr, ur, ul = (a, b), (a + 1, b), (a + 1, b + 1), (a, b + 1)
                if side == "f":
                    loop = [ll, lr, ur, ul]
                else:
                    loop = [ll, ul, ur, lr]
                bnd = []
                for p, q in zip(loop, loop[1:] + loop[:1]):
                    name = hname(min(p[0], q[0]), p[1], side) if p[1] == q[1] else vname_e(p[0], min(p[1], q[1]), side)
                    bnd.append(oriented(name, p, q))
                white = (a + b) % 2 == (0 if side == "f" else 1)
                tiles.append(OneTile(f"t{side}_{a}_{b}", WHITE if white else BLACK, tuple(bnd)))

    # vertex order: corners first (so post points get the smallest ids)
    vlist = [vertices[p] for p in post] + [v for n, v in sorted(vertices.items()) if n not in post]
    elist = [edges[n] for n, _, _ in curve] + [e for n, e in sorted(edges.items()) if not e.on_curve]
    return SubdivisionRule(post, zero, tuple(vlist), tuple(elist), tuple(tiles), tuple(n for n, _, _ in curve), f"lattes:{k}")


def rule_from_source(source: str) -> SubdivisionRule:
    """``lattes:k`` or a path to a rule file."""
    if source.startswith("lattes:"):
        try:
            k = int(source.split(":", 1)[1])
        except ValueError as exc:
            raise RuleError(f"bad rule source {source!r}") from exc
        return lattes_rule(k)
    with open(source, encoding="ascii") as fh:
        return parse_rule(fh.read(), name=source)


# ---------------------------------------------------------------------------
# level-n complexes


def admissible_words(succ_of, starts, n):
    """All words of length n following ``succ_of`` from the given start letters."""
    words = [(s,) for s in starts] if n > 0 else [()]
    for _ in range(n - 1):
        words = [w + (t,) for w in words for t in succ_of(w[-1])]
    return words


@dataclass
class CellLevel:
    """Level-n cell complex; every cell is a carrier word of length n.

    For ``level == 0`` the words have length one and hold 0-cell indices.
    """

    rule: SubdivisionRule
    level: int
    tiles: list[tuple[int, ...]]
    edges: list[tuple[int, ...]]
    vertices: list[tuple[int, ...]]
    tile_faces: dict[tuple[int, ...], tuple[tuple[int, ...], ...]]
    color: dict[tuple[int, ...], int]
    vertex_tiles: dict[tuple[int, ...], list[tuple[int, ...]]]
    edge_tiles: dict[tuple[int, ...], list[tuple[int, ...]]]
    curve_subdivision: list[tuple[int, ...]]
    on_curve: dict[tuple[int, ...], bool]

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges) + len(self.tiles)

    def degree_at(self, v) -> int:
        return local_degree(self, v)

    def tile_index(self) -> dict[tuple[int, ...], int]:
        return {t: i for i, t in enumerate(self.tiles)}


def _faces_table(cells: RuleCells, n: int, tiles_n):
    """Map every n-tile word to the carrier words of the cells in its closure."""
    # faces of suffix words, built from the right
    table: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
    suffixes = {t[n - 1 :] for t in tiles_n}
    for t in suffixes:
        table[t] = [(c,) for c in sorted(cells.faces[t[0]])]
    for length in range(2, n + 1):
        suffixes = {t[n - length :] for t in tiles_n}
        new = {}
        for t in suffixes:
            rest = table[t[1:]]
            out = []
            for c in sorted(cells.faces[t[0]]):
                image = cells.img[c]
                out.extend((c,) + r for r in rest if cells.carrier[r[0]] == image)
            new[t] = out
        table = new
    return table


def build_level(rule: SubdivisionRule, n: int, cap: int = DEFAULT_CELL_CAP) -> CellLevel:
    """Construct the level-n complex D^n from tile words and closure incidence."""
    if n < 0:
        raise ValueError("level must be non-negative")
    cells = rule.cells
    if 2 * cells.deg**n * (1 + cells.m) > cap:
        raise RuleError(f"resource cap exceeded: level {n} needs more than {cap} cells")
    if n == 0:
        m = cells.m
        tiles = [(cells.white,), (cells.black,)]
        edges = [(m + i,) for i in range(m)]
        verts = [(i,) for i in range(m)]
        tf = {t: tuple(verts + edges) for t in tiles}
        return CellLevel(
            rule, 0, tiles, edges, verts, tf, {t: t[0] for t in tiles},
            {v: list(tiles) for v in verts}, {e: list(tiles) for e in edges},
            list(edges), {**{e: True for e in edges}, **{v: True for v in verts}},
        )
    tiles = admissible_words(lambda c: [s for s in cells.succ[c] if cells.dim[s] == 2], cells.tile_cells, n)
    table = _faces_table(cells, n, tiles)
    tile_faces, vertex_tiles, edge_tiles = {}, defaultdict(list), defaultdict(list)
    edge_set, vert_set = set(), set()
    for t in tiles:
        bnd = tuple(c for c in table[t] if cells.dim[c[-1]] < 2)
        tile_faces[t] = bnd
        for c in bnd:
            if cells.dim[c[-1]] == 1:
                edge_tiles[c].append(t)
                edge_set.add(c)
            else:
                vertex_tiles[c].append(t)
                vert_set.add(c)
        interior = [c for c in table[t] if cells.dim[c[-1]] == 2]
        if interior != [t]:
            raise RuleError(f"gluing inconsistency at tile {t}")
    edges, verts = sorted(edge_set), sorted(vert_set)
    on_curve = {c: all(cells.on_curve[s] for s in c) for c in itertools.chain(edges, verts)}
    curve = sorted((e for e in edges if on_curve[e]), key=lambda e: curve_position(cells, e))
    color = {t: cells.img[t[-1]] for t in tiles}
    return CellLevel(rule, n, tiles, edges, verts, tile_faces, color, dict(vertex_tiles), dict(edge_tiles), curve, on_curve)


def curve_position(cells: RuleCells, word) -> tuple[int, ...]:
    """Sort key placing on-curve cells of one level in order along C."""
    key = []
    sign = 1
    first = word[0]
    if cells.dim[first] == 1:
        key.append(cells.curve_cycle.index(first))
    else:
        key.append(-1)
    for a, b in zip(word, word[1:]):
        sign *= cells.orientation.get(a, 1)
        if cells.dim[b] == 1:
            r = cells.curve_rank[b]
            key.append(r if sign > 0 else cells.curve_count[cells.carrier[b]] - 1 - r)
        else:
            key.append(-1)
    return tuple(key)


def local_degree(level: CellLevel, v) -> int:
    """deg_{f^n}(v): half the number of incident n-tiles."""
    count = len(level.vertex_tiles[tuple(v)])
    if count % 2:
        raise RuleError(f"odd incident tile count at vertex {v}")
    return count // 2


def tile_zero_edges(cells: RuleCells, tile) -> set[int]:
    """Indices ``i`` of the 0-edges met by the closed n-tile ``tile``."""
    n = len(tile)
    # cells of the closure whose first letter lies on C
    reach = [set() for _ in range(n)]
    reach[n - 1] = set(cells.faces[tile[n - 1]])
    for i in range(n - 2, -1, -1):
        reach[i] = {c for c in cells.faces[tile[i]] if any(cells.carrier[s] == cells.img[c] for s in reach[i + 1])}
    met = set()
    for c in reach[0]:
        carrier = cells.carrier[c]
        if carrier < cells.m:
            met |= {carrier, (carrier - 1) % cells.m}
        elif carrier < 2 * cells.m:
            met.add(carrier - cells.m)
    return met


def _opposite(m: int, met: set[int]) -> bool:
    if m == 3:
        return len(met) == 3
    return any((b - a) % m not in (0, 1, m - 1) for a in met for b in met)


def joins_opposite_sides(rule: SubdivisionRule, n: int) -> bool:
    """True iff some n-tile meets two disjoint 0-edges (all three when m = 3)."""
    cells = rule.cells
    if n == 0:
        return True
    level = build_level(rule, n)
    return any(_opposite(cells.m, tile_zero_edges(cells, t)) for t in level.tiles)


def tile_adjacency(level: CellLevel) -> dict[tuple[int, ...], set[tuple[int, ...]]]:
    adj = defaultdict(set)
    for ts in level.vertex_tiles.values():
        for a in ts:
            adj[a].update(ts)
    for a in adj:
        adj[a].discard(a)
    return adj


def chain_length(rule: SubdivisionRule, n: int) -> int:
    """D_n: fewest n-tiles in a connected union joining opposite sides of C."""
    cells = rule.cells
    m = cells.m
    if n == 0:
        return 1
    level = build_level(rule, n)
    adj = tile_adjacency(level)
    met = {t: tile_zero_edges(cells, t) for t in level.tiles}
    if any(_opposite(m, s) for s in met.values()):
        return 1

    def distances(i):
        # tiles-in-chain count from the tiles meeting 0-edge i
        dist = {t: 1 for t in level.tiles if i in met[t]}
        queue = deque(sorted(dist))
        while queue:
            t = queue.popleft()
            for s in sorted(adj[t]):
                if s not in dist:
                    dist[s] = dist[t] + 1
                    queue.append(s)
        return dist

    dist = [distances(i) for i in range(m)]
    if m == 3:
        return min(dist[0][t] + dist[1][t] + dist[2][t] - 2 for t in level.tiles)
    best = math.inf
    for i in range(m):
        for j in range(m):
            if (j - i) % m in (0, 1, m - 1):
                continue
            best = min(best, min(dist[j][t] for t in level.tiles if i in met[t]))
    return int(best)


def Dn_and_lambda0(rule: SubdivisionRule, n_max: int) -> tuple[list[tuple[int, int]], float]:
    """Table of (n, D_n) for 1 <= n <= n_max and the estimate D_{n_max}^{1/n_max}."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    table = []
    for n in range(1, n_max + 1):
        d = chain_length(rule, n)
        if table and d < table[-1][1]:
            raise RuleError(f"D_n decreased at n = {n}")
        table.append((n, d))
    return table, table[-1][1] ** (1.0 / n_max)
