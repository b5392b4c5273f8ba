"""Graph-matrix shapes: separators, norm exponents, edge orderings and schemas."""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

import networkx as nx
import numpy as np

from . import _kernels
from .flattening import FlatteningClass, enumerate_assignments, exponent_matrix, index_split
from .schema import EDGE_RADEMACHER, AllDistinct, ChaosSchema, DistributionSpec, Greater, Less

MAX_ORIENTED_EDGES = 16
DEFAULT_SIDE_CAP = 1 << 22


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Shape:
    vertices: tuple[str, ...]
    left: tuple[str, ...]
    right: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(str(v) for v in self.vertices))
        object.__setattr__(self, "left", tuple(str(v) for v in self.left))
        object.__setattr__(self, "right", tuple(str(v) for v in self.right))
        object.__setattr__(self, "edges", tuple((str(a), str(b)) for a, b in self.edges))
        self._check()

    def _check(self) -> None:
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise ShapeError("duplicate vertex names")
        for side, name in ((self.left, "left"), (self.right, "right")):
            if len(set(side)) != len(side):
                raise ShapeError(f"duplicate vertex in {name} tuple")
            if not set(side) <= vs:
                raise ShapeError(f"{name} tuple uses unknown vertices {sorted(set(side) - vs)}")
        seen = set()
        for a, b in self.edges:
            if a == b:
                raise ShapeError(f"self-loop at {a}")
            if a not in vs or b not in vs:
                raise ShapeError(f"edge ({a}, {b}) uses an unknown vertex")
            key = frozenset((a, b))
            if key in seen:
                raise ShapeError(f"duplicate edge ({a}, {b})")
            seen.add(key)

    # -- derived sets ---------------------------------------------------
    @property
    def middle(self) -> tuple[str, ...]:
        sides = set(self.left) | set(self.right)
        return tuple(v for v in self.vertices if v not in sides)

    def degree(self, v: str) -> int:
        return sum(v in e for e in self.edges)

    @property
    def isolated_middle(self) -> tuple[str, ...]:
        return tuple(v for v in self.middle if self.degree(v) == 0)

    @property
    def both_sides(self) -> tuple[str, ...]:
        right = set(self.right)
        return tuple(v for v in self.left if v in right)

    def index(self, v: str) -> int:
        return self.vertices.index(v)

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from(self.edges)
        return g

    def to_json(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "left": list(self.left),
            "right": list(self.right),
            "edges": [list(e) for e in self.edges],
        }


_SHAPE_FIELDS = {"vertices", "left", "right", "edges"}


def shape_from_json(doc: Any, name: str = "") -> Shape:
    if not isinstance(doc, dict):
        raise ShapeError("shape document must be a JSON object")
    extra = set(doc) - _SHAPE_FIELDS
    missing = _SHAPE_FIELDS - set(doc)
    if extra:
        raise ShapeError(f"unknown fields {sorted(extra)}")
    if missing:
        raise ShapeError(f"missing fields {sorted(missing)}")
    edges = doc["edges"]
    if not isinstance(edges, list) or any(not isinstance(e, list) or len(e) != 2 for e in edges):
        raise ShapeError("edges must be a list of [a, b] pairs")
    return Shape(tuple(doc["vertices"]), tuple(doc["left"]), tuple(doc["right"]), tuple(map(tuple, edges)), name)


def load_shape(path: str) -> Shape:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ShapeError(f"malformed JSON: {exc}") from None
    return shape_from_json(doc, name=path)


# named examples
def wigner_shape() -> Shape:
    return Shape(("i", "j"), ("i",), ("j",), (("i", "j"),), "beta")


def zshape() -> Shape:
    return Shape(("i", "j", "k", "l"), ("i", "j"), ("k", "l"), (("i", "k"), ("j", "k"), ("j", "l")), "gamma")


def star_shape() -> Shape:
    return Shape(
        ("i", "j", "k", "l", "m", "o"),
        ("i", "j"),
        ("k", "l"),
        (("i", "m"), ("j", "m"), ("k", "m"), ("l", "m")),
        "delta",
    )


# --------------------------------------------------------------------------
# Menger: vertex-split max flow


@dataclass(frozen=True)
class SeparatorResult:
    separator: frozenset[str]
    paths: tuple[tuple[str, ...], ...]

    @property
    def size(self) -> int:
        return len(self.separator)


def separates(shape: Shape, cut: Iterable[str]) -> bool:
    """True when every U-V path (including length-0 ones) meets ``cut``."""
    cut = set(cut)
    start = [u for u in shape.left if u not in cut]
    targets = set(shape.right) - cut
    adj = {v: [] for v in shape.vertices}
    for a, b in shape.edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = set(start)
    queue = deque(start)
    while queue:
        x = queue.popleft()
        if x in targets:
            return False
        for y in adj[x]:
            if y not in seen and y not in cut:
                seen.add(y)
                queue.append(y)
    return True


class _FlowNetwork:
    """Unit-capacity digraph with Edmonds-Karp augmentation."""

    def __init__(self, n: int):
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.head: list[int] = []
        self.cap: list[int] = []

    def add(self, a: int, b: int, cap: int) -> None:
        self.adj[a].append(len(self.head))
        self.head.append(b)
        self.cap.append(cap)
        self.adj[b].append(len(self.head))
        self.head.append(a)
        self.cap.append(0)

    def _bfs(self, s: int, t: int) -> list[int] | None:
        parent_edge = [-1] * len(self.adj)
        seen = [False] * len(self.adj)
        seen[s] = True
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for e in self.adj[x]:
                y = self.head[e]
                if self.cap[e] > 0 and not seen[y]:
                    seen[y] = True
                    parent_edge[y] = e
                    if y == t:
                        return parent_edge
                    queue.append(y)
        return None

    def max_flow(self, s: int, t: int) -> int:
        flow = 0
        while True:
            parent = self._bfs(s, t)
            if parent is None:
                return flow
            y = t
            while y != s:
                e = parent[y]
                self.cap[e] -= 1
                self.cap[e ^ 1] += 1
                y = self.head[e ^ 1]
            flow += 1

    def reachable(self, s: int) -> list[bool]:
        seen = [False] * len(self.adj)
        seen[s] = True
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for e in self.adj[x]:
                y = self.head[e]
                if self.cap[e] > 0 and not seen[y]:
                    seen[y] = True
                    queue.append(y)
        return seen


def min_vertex_separator(shape: Shape) -> SeparatorResult:
    """Minimum U-V vertex separator with a Menger path certificate.

    Vertices in U ∩ V are forced into the separator (each is a path of
    length zero).  On the rest, vertex v becomes v_in -> v_out with
    capacity 1; the returned cut is the one closest to U.
    """
    forced = [v for v in shape.both_sides]
    forced_set = set(forced)
    rest = [v for v in shape.vertices if v not in forced_set]
    sources = [v for v in shape.left if v not in forced_set]
    sinks = [v for v in shape.right if v not in forced_set]
    paths: list[tuple[str, ...]] = [(v,) for v in forced]
    if not sources or not sinks:
        return SeparatorResult(frozenset(forced), tuple(paths))

    idx = {v: i for i, v in enumerate(rest)}
    n = len(rest)
    s, t = 2 * n, 2 * n + 1
    big = n + 1
    net = _FlowNetwork(2 * n + 2)
    for v, i in idx.items():
        net.add(2 * i, 2 * i + 1, 1)
    for a, b in shape.edges:
        if a in idx and b in idx:
            net.add(2 * idx[a] + 1, 2 * idx[b], big)
            net.add(2 * idx[b] + 1, 2 * idx[a], big)
    for u in sources:
        net.add(s, 2 * idx[u], big)
    for v in sinks:
        net.add(2 * idx[v] + 1, t, big)
    net.max_flow(s, t)

    seen = net.reachable(s)
    cut = {v for v, i in idx.items() if seen[2 * i] and not seen[2 * i + 1]}

    # decompose the flow into vertex paths
    used = [0] * len(net.head)
    for e in range(0, len(net.head), 2):
        used[e] = net.cap[e ^ 1]  # flow on forward arc = residual on reverse arc
    src_set, sink_set = set(sources), set(sinks)
    while True:
        start = next((e for e in net.adj[s] if e % 2 == 0 and used[e] > 0), None)
        if start is None:
            break
        used[start] -= 1
        node = net.head[start]
        walk: list[str] = []
        while node != t:
            if node < 2 * n and node % 2 == 0:
                walk.append(rest[node // 2])
            e = next(e for e in net.adj[node] if e % 2 == 0 and used[e] > 0)
            used[e] -= 1
            node = net.head[e]
        first_sink = next(i for i, v in enumerate(walk) if v in sink_set)
        last_src = max(i for i, v in enumerate(walk[: first_sink + 1]) if v in src_set)
        paths.append(tuple(walk[last_src : first_sink + 1]))
    return SeparatorResult(frozenset(cut | forced_set), tuple(paths))


def min_separator_size_bruteforce(shape: Shape) -> int:
    """Smallest separator by exhaustive search; reference for tests and small shapes."""
    for k in range(len(shape.vertices) + 1):
        for cut in itertools.combinations(shape.vertices, k):
            if separates(shape, cut):
                return k
    return len(shape.vertices)


# --------------------------------------------------------------------------
# exponents and edge ordering


@dataclass(frozen=True)
class EdgeOrdering:
    edges: tuple[tuple[str, str], ...]
    k1: int
    k2: int

    @property
    def k(self) -> int:
        return self.k1 + self.k2


def _f_value(shape: Shape, sep_size: int) -> int:
    return sep_size - len(shape.both_sides) + len(shape.middle) - len(shape.isolated_middle)


def edge_ordering(shape: Shape, separator: SeparatorResult | None = None) -> EdgeOrdering:
    """Order edges as: remaining edges, then a minimum cover of uncovered middle vertices, then path edges."""
    sep = separator or min_vertex_separator(shape)
    key = lambda e: frozenset(e)
    path_edges = []
    on_path = set()
    for path in sep.paths:
        on_path.update(path)
        path_edges.extend(frozenset(pair) for pair in zip(path, path[1:]))
    path_set = set(path_edges)
    by_key = {key(e): e for e in shape.edges}

    iso = set(shape.isolated_middle)
    todo = [v for v in shape.middle if v not in iso and v not in on_path]
    todo_set = set(todo)
    g = nx.Graph()
    g.add_nodes_from(todo)
    g.add_edges_from(e for e in shape.edges if e[0] in todo_set and e[1] in todo_set)
    matching = nx.max_weight_matching(g, maxcardinality=True)
    cover = [frozenset(e) for e in sorted(tuple(sorted(m)) for m in matching)]
    covered = set().union(*cover) if cover else set()
    for v in todo:
        if v not in covered:
            e = next(e for e in shape.edges if v in e)
            cover.append(frozenset(e))
            covered.update(e)
    cover_set = set(cover)

    first = [e for e in shape.edges if key(e) not in path_set and key(e) not in cover_set]
    middle = [by_key[c] for c in cover]
    last = [by_key[p] for p in path_edges]
    ordering = EdgeOrdering(tuple(first + middle + last), len(path_edges), len(cover))
    f = _f_value(shape, sep.size)
    assert ordering.k <= f, f"edge ordering uses k={ordering.k} > f={f}"
    return ordering


@dataclass(frozen=True)
class GraphBoundReport:
    shape: Shape
    separator: SeparatorResult
    isolated: tuple[str, ...]
    poly_exponent: Fraction
    f: int
    ordering: EdgeOrdering

    @property
    def log_exponent(self) -> Fraction:
        return Fraction(self.f, 2)

    @property
    def k(self) -> int:
        return self.ordering.k

    @property
    def row_dim(self) -> str:
        return _side(len(self.shape.left))

    @property
    def col_dim(self) -> str:
        return _side(len(self.shape.right))


def _side(k: int) -> str:
    return "1" if k == 0 else "n" if k == 1 else f"n^{k}"


def norm_exponents(shape: Shape) -> GraphBoundReport:
    sep = min_vertex_separator(shape)
    iso = shape.isolated_middle
    poly = Fraction(len(shape.vertices) - sep.size + len(iso), 2)
    return GraphBoundReport(shape, sep, iso, poly, _f_value(shape, sep.size), edge_ordering(shape, sep))


# --------------------------------------------------------------------------
# schemas


def _orientation_weight(shape: Shape, flipped: Sequence[bool]) -> tuple:
    idx = shape.index
    out = []
    for (a, b), flip in zip(shape.edges, flipped):
        out.append(Greater(idx(a), idx(b)) if flip else Less(idx(a), idx(b)))
    return tuple(out)


def graph_schema(shape: Shape, n: int | str = "n", oriented: Sequence[bool] | None = None) -> ChaosSchema:
    """Schema of the graph matrix, or of one orientation summand when ``oriented`` is given."""
    idx = shape.index
    weight = [] if oriented is None else list(_orientation_weight(shape, oriented))
    if len(shape.vertices) > 1:
        weight.append(AllDistinct(tuple(range(len(shape.vertices)))))
    return ChaosSchema(
        dims=tuple(n for _ in shape.vertices),
        chaos_coords=tuple((idx(a), idx(b)) for a, b in shape.edges),
        row_coord=tuple(idx(v) for v in shape.left),
        col_coord=tuple(idx(v) for v in shape.right),
        weight=tuple(weight),
        distribution=DistributionSpec(EDGE_RADEMACHER),
        labels=shape.vertices,
    )


def shape_to_schemas(shape: Shape, n: int | str = "n") -> list[ChaosSchema]:
    """One nearly-combinatorial schema per orientation pattern (subset of flipped edges)."""
    q = len(shape.edges)
    if q > MAX_ORIENTED_EDGES:
        raise ShapeError(f"{q} edges would produce 2^{q} schemas (limit {MAX_ORIENTED_EDGES} edges)")
    return [graph_schema(shape, n, flips) for flips in itertools.product((False, True), repeat=q)]


@dataclass
class SigmaCheck:
    poly_exponent: Fraction
    sigma_exponent: Fraction | None
    per_orientation: list[Fraction] = field(default_factory=list)
    maximizer: tuple[str, ...] = ()
    both_vertices: frozenset[str] = frozenset()
    deterministic: bool = False
    separator_realized: bool = False

    @property
    def ok(self) -> bool:
        return self.deterministic or self.sigma_exponent == self.poly_exponent


def sigma_bound_check(shape: Shape, max_orientations: int = 64) -> SigmaCheck:
    """σ of every orientation schema from the flattening enumeration, compared with n^{poly}.

    The closed-form norm ignores the orientation weight, so beyond
    ``max_orientations`` summands only the first is enumerated.
    """
    rep = norm_exponents(shape)
    if not shape.edges:
        return SigmaCheck(rep.poly_exponent, None, deterministic=True)
    schemas = shape_to_schemas(shape)
    if len(schemas) > max_orientations:
        schemas = schemas[:1]
    per = []
    best = None
    for schema in schemas:
        assignments = enumerate_assignments(schema, FlatteningClass.SIGMA)
        exps = exponent_matrix(schema, assignments).sum(axis=1)
        i = int(np.argmax(exps))
        per.append(Fraction(int(exps[i]), 2))
        if best is None:
            best = (assignments[i], schema)
    a, schema = best
    split = index_split(schema, a)
    both = frozenset(v for v, tag in zip(shape.vertices, split) if tag == "RC")
    realized = len(both) == rep.separator.size and separates(shape, both)
    return SigmaCheck(rep.poly_exponent, max(per), per, a.placement, both, separator_realized=realized)


# --------------------------------------------------------------------------
# fast batched σ exponents for shape corpora


def encode_shapes(shapes: Sequence[Shape]):
    """Bitmask encoding (edge masks, U mask, V mask, vertex count) for the batch kernel."""
    qmax = max((len(s.edges) for s in shapes), default=0)
    edges = np.zeros((len(shapes), max(qmax, 1)), dtype=np.int64)
    nedges = np.zeros(len(shapes), dtype=np.int64)
    umask = np.zeros(len(shapes), dtype=np.int64)
    vmask = np.zeros(len(shapes), dtype=np.int64)
    nverts = np.zeros(len(shapes), dtype=np.int64)
    for i, s in enumerate(shapes):
        pos = {v: j for j, v in enumerate(s.vertices)}
        for t, (a, b) in enumerate(s.edges):
            edges[i, t] = (1 << pos[a]) | (1 << pos[b])
        nedges[i] = len(s.edges)
        umask[i] = sum(1 << pos[v] for v in s.left)
        vmask[i] = sum(1 << pos[v] for v in s.right)
        nverts[i] = len(s.vertices)
    return edges, nedges, umask, vmask, nverts


def sigma_exponents(shapes: Sequence[Shape], backend: str | None = None) -> list[Fraction]:
    """σ-exponent (power of n in σ) of each shape, maximizing the closed form over σ-flattenings."""
    if not shapes:
        return []
    twice = _kernels.sigma_exponent_batch(*encode_shapes(shapes), backend=backend)
    return [Fraction(int(x), 2) for x in twice]


# --------------------------------------------------------------------------
# materialization


def materialize_graph_matrix(shape: Shape, n: int, seed: int = 0, trial: int = 0, side_cap: int = DEFAULT_SIDE_CAP, **kw):
    """Sum over injective maps of the edge-sign products; sparse or dense per density."""
    from .sampler import CapExceeded, Mode, materialize

    if n < len(shape.vertices):
        raise ValueError(f"n={n} is smaller than the number of shape vertices {len(shape.vertices)}")
    rows, cols = n ** len(shape.left), n ** len(shape.right)
    if rows > side_cap or cols > side_cap:
        raise CapExceeded(f"graph matrix {rows} x {cols} exceeds the per-side cap {side_cap}")
    return materialize(graph_schema(shape, n), Mode.COUPLED, seed, trial, **kw)


# --------------------------------------------------------------------------
# shape corpora

_ROLE_LEFT = (False, True, False, True)
_ROLE_RIGHT = (False, False, True, True)


def _role_orbit_representatives(g: nx.Graph) -> np.ndarray:
    """One role vector (0 middle, 1 left, 2 right, 3 both) per orbit of Aut(g)."""
    v = g.number_of_nodes()
    nodes = sorted(g.nodes())
    pos = {x: i for i, x in enumerate(nodes)}
    roles = np.indices((4,) * v).reshape(v, -1).T if v else np.zeros((1, 0), dtype=np.int64)
    weights = 4 ** np.arange(v)[::-1]
    best = roles @ weights
    matcher = nx.algorithms.isomorphism.GraphMatcher(g, g)
    for auto in matcher.isomorphisms_iter():
        perm = [pos[auto[x]] for x in nodes]
        best = np.minimum(best, roles[:, np.argsort(perm)] @ weights)
    keep = np.unique(best)
    return np.array([[int(c) // 4 ** (v - 1 - i) % 4 for i in range(v)] for c in keep], dtype=np.int64).reshape(-1, v)


def enumerate_shapes(max_vertices: int = 6, max_edges: int = 5, up_to_isomorphism: bool = True) -> list[Shape]:
    """Every shape with at most the given size, optionally one per isomorphism class.

    Graphs come from the networkx atlas (all graphs on up to 7 nodes);
    each vertex is given one of four roles: middle, left, right or both.
    """
    if max_vertices > 7:
        raise ValueError("the graph atlas covers at most 7 vertices")
    out = []
    for g in nx.graph_atlas_g():
        v = g.number_of_nodes()
        if v == 0 or v > max_vertices or g.number_of_edges() > max_edges:
            continue
        names = tuple(f"v{i}" for i in range(v))
        edges = tuple((names[a], names[b]) for a, b in sorted(g.edges()))
        if up_to_isomorphism:
            reps = _role_orbit_representatives(g)
        else:
            reps = np.indices((4,) * v).reshape(v, -1).T
        for roles in reps:
            left = tuple(names[i] for i in range(v) if _ROLE_LEFT[roles[i]])
            right = tuple(names[i] for i in range(v) if _ROLE_RIGHT[roles[i]])
            out.append(Shape(names, left, right, edges))
    return out
