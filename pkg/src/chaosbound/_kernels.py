"""Lattice accumulation kernels.

A chaos of combinatorial type is materialized by walking the summation
lattice ``prod(dims)`` once and adding ``f(s) * prod_t h_t[key_t(s)]`` to
entry ``(row(s), col(s))``.  Row, column and key indices are linear in
``s`` except for symmetric edge keys, which use the unordered pair.

Two interchangeable backends exist: a numba ``@njit`` loop and a chunked
numpy version.  Set ``CHAOSBOUND_DISABLE_JIT=1`` to force numpy; numpy is
also used when numba cannot be imported.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _HAVE_NUMBA = False

JIT_ENV = "CHAOSBOUND_DISABLE_JIT"
CHUNK = 1 << 18


def default_backend() -> str:
    if os.environ.get(JIT_ENV, "").strip() not in ("", "0") or not _HAVE_NUMBA:
        return "numpy"
    return "numba"


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if _HAVE_NUMBA else ("numpy",)


@dataclass(frozen=True)
class LatticePlan:
    """Integer encoding of a schema for the kernels."""

    dims: np.ndarray  # (p,)
    row_coef: np.ndarray  # (p,)
    col_coef: np.ndarray  # (p,)
    key_coef: np.ndarray  # (q, p)
    sym: np.ndarray  # (q, 2); -1 when the key is linear
    sym_n: np.ndarray  # (q,) side of the symmetric pair table
    ne_pairs: np.ndarray  # (k, 2): s_a != s_b
    lt_pairs: np.ndarray  # (k, 2): s_a < s_b
    tup_left: np.ndarray  # (k, L) padded with -1
    tup_right: np.ndarray  # (k, L)
    distinct_keys: bool

    @property
    def lattice_size(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))


# --------------------------------------------------------------------------
# numpy backend


def _keys_np(plan: LatticePlan, S: np.ndarray) -> np.ndarray:
    keys = plan.key_coef @ S
    for t in range(plan.key_coef.shape[0]):
        a, b = plan.sym[t]
        if a >= 0:
            x, y = S[a], S[b]
            keys[t] = np.minimum(x, y) * plan.sym_n[t] + np.maximum(x, y)
    return keys


def _mask_np(plan: LatticePlan, S: np.ndarray, keys: np.ndarray) -> np.ndarray:
    ok = np.ones(S.shape[1], dtype=bool)
    for a, b in plan.ne_pairs:
        ok &= S[a] != S[b]
    for a, b in plan.lt_pairs:
        ok &= S[a] < S[b]
    for left, right in zip(plan.tup_left, plan.tup_right):
        differs = np.zeros(S.shape[1], dtype=bool)
        for a, b in zip(left, right):
            if a < 0:
                break
            differs |= S[a] != S[b]
        ok &= differs
    if plan.distinct_keys:
        q = keys.shape[0]
        for t in range(q):
            for u in range(t + 1, q):
                ok &= keys[t] != keys[u]
    return ok


def _chunks_np(plan: LatticePlan, tables: np.ndarray):
    n = plan.lattice_size
    dims = tuple(int(x) for x in plan.dims)
    for lo in range(0, n, CHUNK):
        lin = np.arange(lo, min(n, lo + CHUNK), dtype=np.int64)
        S = np.stack(np.unravel_index(lin, dims)) if dims else np.zeros((0, len(lin)), np.int64)
        keys = _keys_np(plan, S)
        ok = _mask_np(plan, S, keys)
        if not ok.any():
            continue
        S, keys = S[:, ok], keys[:, ok]
        val = np.ones(S.shape[1])
        for t in range(keys.shape[0]):
            val = val * tables[t, keys[t]]
        yield plan.row_coef @ S, plan.col_coef @ S, val


def _dense_np(plan, tables, d1, d2):
    out = np.zeros((d1, d2))
    for r, c, v in _chunks_np(plan, tables):
        np.add.at(out, (r, c), v)
    return out


def _coo_np(plan, tables):
    parts = list(_chunks_np(plan, tables))
    if not parts:
        z = np.zeros(0, dtype=np.int64)
        return z, z.copy(), np.zeros(0)
    return tuple(np.concatenate(x) for x in zip(*parts))


# --------------------------------------------------------------------------
# numba backend

if _HAVE_NUMBA:

    @njit(cache=True)
    def _walk_nb(n, dims, row_coef, col_coef, key_coef, sym, sym_n, ne, lt, tl, tr, distinct, tables, dense, out, rows, cols, vals):
        """Visit the lattice in row-major order with an odometer; returns the COO fill count."""
        p = dims.shape[0]
        q = key_coef.shape[0]
        s = np.zeros(p, dtype=np.int64)
        keys = np.zeros(q, dtype=np.int64)
        k = 0
        for _ in range(n):
            ok = True
            for i in range(ne.shape[0]):
                if s[ne[i, 0]] == s[ne[i, 1]]:
                    ok = False
                    break
            if ok:
                for i in range(lt.shape[0]):
                    if s[lt[i, 0]] >= s[lt[i, 1]]:
                        ok = False
                        break
            if ok:
                for i in range(tl.shape[0]):
                    differs = False
                    for j in range(tl.shape[1]):
                        if tl[i, j] < 0:
                            break
                        if s[tl[i, j]] != s[tr[i, j]]:
                            differs = True
                            break
                    if not differs:
                        ok = False
                        break
            if ok:
                for t in range(q):
                    if sym[t, 0] >= 0:
                        x = s[sym[t, 0]]
                        y = s[sym[t, 1]]
                        if x > y:
                            x, y = y, x
                        keys[t] = x * sym_n[t] + y
                    else:
                        kk = 0
                        for u in range(p):
                            kk += key_coef[t, u] * s[u]
                        keys[t] = kk
                if distinct:
                    for t in range(q):
                        for v in range(t + 1, q):
                            if keys[t] == keys[v]:
                                ok = False
            if ok:
                val = 1.0
                for t in range(q):
                    val *= tables[t, keys[t]]
                r = 0
                c = 0
                for u in range(p):
                    r += row_coef[u] * s[u]
                    c += col_coef[u] * s[u]
                if dense:
                    out[r, c] += val
                else:
                    rows[k] = r
                    cols[k] = c
                    vals[k] = val
                    k += 1
            u = p - 1
            while u >= 0:
                s[u] += 1
                if s[u] < dims[u]:
                    break
                s[u] = 0
                u -= 1
        return k


def _nb_args(plan: LatticePlan, tables: np.ndarray):
    return (
        plan.lattice_size,
        plan.dims,
        plan.row_coef,
        plan.col_coef,
        plan.key_coef,
        plan.sym,
        plan.sym_n,
        plan.ne_pairs,
        plan.lt_pairs,
        plan.tup_left,
        plan.tup_right,
        plan.distinct_keys,
        np.ascontiguousarray(tables, dtype=np.float64),
    )


def _resolve(backend: str | None) -> str:
    backend = backend or default_backend()
    if backend not in available_backends():
        raise ValueError(f"backend {backend!r} unavailable; choose from {available_backends()}")
    return backend


def accumulate_dense(plan: LatticePlan, tables: np.ndarray, d1: int, d2: int, backend: str | None = None) -> np.ndarray:
    if _resolve(backend) == "numba":
        out = np.zeros((d1, d2))
        empty_i, empty_f = np.zeros(0, dtype=np.int64), np.zeros(0)
        _walk_nb(*_nb_args(plan, tables), True, out, empty_i, empty_i, empty_f)
        return out
    return _dense_np(plan, tables, d1, d2)


def accumulate_coo(plan: LatticePlan, tables: np.ndarray, backend: str | None = None):
    """Unsummed (rows, cols, vals) triples in lattice order."""
    if _resolve(backend) == "numba":
        n = plan.lattice_size
        rows, cols = np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int64)
        vals = np.empty(n)
        k = _walk_nb(*_nb_args(plan, tables), False, np.zeros((0, 0)), rows, cols, vals)
        return rows[:k], cols[:k], vals[:k]
    return _coo_np(plan, tables)


# --------------------------------------------------------------------------
# σ-flattening exponents of graph shapes (bitmask encoding)


def _popcount_np(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64)
    return np.unpackbits(x.view(np.uint8).reshape(-1, 8), axis=1).sum(axis=1).reshape(x.shape)


def _sigma_batch_np(edges, nedges, umask, vmask, nverts):
    out = np.zeros(len(nedges), dtype=np.int64)
    for i in range(len(nedges)):
        q = int(nedges[i])
        subsets = np.arange(1 << q, dtype=np.int64)
        rmask = np.full(subsets.shape, umask[i])
        cmask = np.full(subsets.shape, vmask[i])
        for t in range(q):
            in_r = (subsets >> t) & 1
            rmask = np.where(in_r == 1, rmask | edges[i, t], rmask)
            cmask = np.where(in_r == 0, cmask | edges[i, t], cmask)
        e = 2 * nverts[i] - _popcount_np(rmask) - _popcount_np(cmask)
        out[i] = e.max()
    return out


if _HAVE_NUMBA:

    @njit(cache=True)
    def _popcount_nb(x):
        c = 0
        while x:
            x &= x - 1
            c += 1
        return c

    @njit(cache=True)
    def _sigma_batch_nb(edges, nedges, umask, vmask, nverts):
        out = np.zeros(nedges.shape[0], dtype=np.int64)
        for i in range(nedges.shape[0]):
            q = nedges[i]
            best = -1
            for sub in range(1 << q):
                r = umask[i]
                c = vmask[i]
                for t in range(q):
                    if (sub >> t) & 1:
                        r |= edges[i, t]
                    else:
                        c |= edges[i, t]
                e = 2 * nverts[i] - _popcount_nb(r) - _popcount_nb(c)
                if e > best:
                    best = e
            out[i] = best
        return out


def sigma_exponent_batch(edges, nedges, umask, vmask, nverts, backend: str | None = None) -> np.ndarray:
    """Largest closed-form σ-flattening exponent (of n, in the squared norm) per shape.

    A σ-flattening sends each edge coordinate to rows or columns; the
    squared norm is n^(|V| - |rows reached|) * n^(|V| - |cols reached|).
    """
    if _resolve(backend) == "numba":
        return _sigma_batch_nb(edges, nedges, umask, vmask, nverts)
    return _sigma_batch_np(edges, nedges, umask, vmask, nverts)
