"""Reference implementations used only by the tests.

Nothing here imports the package's flattening or graph internals; each
helper recomputes its answer from definitions by brute force.
"""

from __future__ import annotations

import itertools
from collections import defaultdict

import numpy as np

from chaosbound.schema import AllDistinct, ChaosSchema, Greater, Less, NotEqualTuple


def _holds(c, s) -> bool:
    if isinstance(c, AllDistinct):
        vals = [s[u] for u in c.indices]
        return len(set(vals)) == len(vals)
    if isinstance(c, Less):
        return s[c.u] < s[c.v]
    if isinstance(c, Greater):
        return s[c.u] > s[c.v]
    if isinstance(c, NotEqualTuple):
        return tuple(s[u] for u in c.left) != tuple(s[u] for u in c.right)
    raise TypeError(c)


def coefficient_tensor(schema: ChaosSchema) -> dict[tuple, float]:
    """Sparse coefficients keyed by the q + 2 coordinate value tuples."""
    coords = schema.chaos_coords + (schema.row_coord, schema.col_coord)
    out: dict[tuple, float] = defaultdict(float)
    for s in itertools.product(*(range(d) for d in schema.numeric_dims)):
        if all(_holds(c, s) for c in schema.weight):
            key = tuple(tuple(s[u] for u in coord) for coord in coords)
            out[key] += 1.0
    return out


def flattening_matrix(schema: ChaosSchema, placement: tuple[str, ...]) -> np.ndarray:
    """Flattening with rows over coordinates tagged R/RC and columns over C/RC.

    A coordinate tagged RC appears on both axes with the same value, so
    the block it indexes is diagonal.
    """
    tensor = coefficient_tensor(schema)
    rows_t = [t for t, tag in enumerate(placement) if "R" in tag]
    cols_t = [t for t, tag in enumerate(placement) if "C" in tag]
    row_ix: dict[tuple, int] = {}
    col_ix: dict[tuple, int] = {}
    entries: dict[tuple[int, int], float] = defaultdict(float)
    for key, val in tensor.items():
        r = row_ix.setdefault(tuple(key[t] for t in rows_t), len(row_ix))
        c = col_ix.setdefault(tuple(key[t] for t in cols_t), len(col_ix))
        entries[r, c] += val
    M = np.zeros((max(1, len(row_ix)), max(1, len(col_ix))))
    for (r, c), v in entries.items():
        M[r, c] = v
    return M


def flattening_norm_sq(schema: ChaosSchema, placement: tuple[str, ...]) -> float:
    M = flattening_matrix(schema, placement)
    return float(np.linalg.norm(M, 2)) ** 2 if M.any() else 0.0


def dense_chaos_matrix(schema: ChaosSchema, tables: list[np.ndarray], key_of) -> np.ndarray:
    """Direct sum over the lattice: entry (row, col) += prod_t tables[t][key_of(t, s)]."""
    dims = schema.numeric_dims
    out = np.zeros((schema.d1, schema.d2))
    rix = lambda s, coord: int(np.ravel_multi_index([s[u] for u in coord], [dims[u] for u in coord])) if coord else 0
    for s in itertools.product(*(range(d) for d in dims)):
        if all(_holds(c, s) for c in schema.weight):
            val = 1.0
            for t in range(schema.q):
                val *= tables[t][key_of(t, s)]
            out[rix(s, schema.row_coord), rix(s, schema.col_coord)] += val
    return out


# --------------------------------------------------------------------------
# shapes


def _components_reach(vertices, edges, removed, sources, targets) -> bool:
    alive = set(vertices) - set(removed)
    adj = defaultdict(set)
    for a, b in edges:
        if a in alive and b in alive:
            adj[a].add(b)
            adj[b].add(a)
    frontier = [v for v in sources if v in alive]
    seen = set(frontier)
    while frontier:
        v = frontier.pop()
        if v in targets:
            return True
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                frontier.append(w)
    return False


def min_separator_size(vertices, left, right, edges) -> int:
    """Smallest vertex set meeting every left-right path (vertices in both count as paths)."""
    for k in range(len(vertices) + 1):
        for cut in itertools.combinations(vertices, k):
            if not _components_reach(vertices, edges, cut, set(left), set(right)):
                return k
    raise AssertionError("unreachable")


def random_shape(rng: np.random.Generator, max_vertices: int = 8):
    nv = int(rng.integers(1, max_vertices + 1))
    names = [f"v{i}" for i in range(nv)]
    left = [v for v in names if rng.random() < 0.35]
    right = [v for v in names if rng.random() < 0.35]
    pairs = list(itertools.combinations(names, 2))
    edges = [list(e) for e in pairs if rng.random() < 0.3]
    return {"vertices": names, "left": left, "right": right, "edges": edges}


def poly_exponent(vertices, left, right, edges):
    """(|V| - |S_min| + |W_iso|) / 2 from the brute-force separator."""
    from fractions import Fraction

    touched = {v for e in edges for v in e}
    w_iso = [v for v in vertices if v not in left and v not in right and v not in touched]
    s = min_separator_size(vertices, left, right, edges)
    return Fraction(len(vertices) - s + len(w_iso), 2)
