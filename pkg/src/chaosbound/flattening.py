"""Flattenings of the coefficient tensor and their closed-form norms.

Coordinates are numbered ``0..q+1``: ``0..q-1`` are chaos coordinates,
``q`` is the row coordinate and ``q+1`` the column coordinate.  A
flattening places every coordinate in the row set, the column set, or
both ("RC", diagonalized).

For a chaos of combinatorial type the squared norm of a flattening is

    prod_{u not in rows} S_u * prod_{u not in cols} S_u

where "rows"/"cols" are the summation indices reached by the coordinates
placed there.  With a nontrivial 0/1 weight the same product is an upper
bound.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .monomial import Monomial, maximal, render_max
from .schema import ChaosSchema, weight_mask

ROW, COL, BOTH, NEITHER = "R", "C", "RC", "-"
_CHAOS_ORDER = (ROW, COL, BOTH)

DEFAULT_ORACLE_CAP = 4096
LATTICE_CAP = 2_000_000


class OracleTooLarge(RuntimeError):
    pass


class FlatteningClass(str, enum.Enum):
    SIGMA = "sigma"
    V = "v"
    R = "r"
    OTHER = "other"

    @property
    def symbol(self) -> str:
        return {"sigma": "σ", "v": "v", "r": "r", "other": "other"}[self.value]


PARAMETER_CLASSES = (FlatteningClass.SIGMA, FlatteningClass.V, FlatteningClass.R)


def classify(q: int, rows: frozenset[int], cols: frozenset[int]) -> FlatteningClass:
    everything = frozenset(range(q + 2))
    row_t, col_t = q, q + 1
    if rows | cols == everything:
        both = rows & cols
        if not both:
            if row_t in rows and col_t in cols:
                return FlatteningClass.SIGMA
            if row_t in cols and col_t in cols and rows:
                return FlatteningClass.V
        elif row_t in rows and col_t in cols and both <= frozenset(range(q)):
            return FlatteningClass.R
    return FlatteningClass.OTHER


@dataclass(frozen=True)
class FlatteningAssignment:
    placement: tuple[str, ...]
    cls: FlatteningClass

    @property
    def q(self) -> int:
        return len(self.placement) - 2

    @property
    def rows(self) -> frozenset[int]:
        return frozenset(t for t, pl in enumerate(self.placement) if ROW in pl)

    @property
    def cols(self) -> frozenset[int]:
        return frozenset(t for t, pl in enumerate(self.placement) if COL in pl)

    @classmethod
    def from_sets(cls, q: int, rows, cols) -> "FlatteningAssignment":
        rows, cols = frozenset(rows), frozenset(cols)
        placement = []
        for t in range(q + 2):
            tag = (ROW if t in rows else "") + (COL if t in cols else "")
            placement.append(tag or NEITHER)
        return cls(tuple(placement), classify(q, rows, cols))

    def label(self) -> str:
        return " ".join(self.placement)


def enumerate_assignments(schema: ChaosSchema | int, cls: FlatteningClass) -> list[FlatteningAssignment]:
    """All assignments of one class, lexicographic in the chaos placements (R < C < RC)."""
    q = schema if isinstance(schema, int) else schema.q
    cls = FlatteningClass(cls)
    out = []
    if cls == FlatteningClass.OTHER:
        tags = (NEITHER, ROW, COL, BOTH)
        for placement in itertools.product(tags, repeat=q + 2):
            a = FlatteningAssignment.from_sets(
                q,
                (t for t, pl in enumerate(placement) if ROW in pl),
                (t for t, pl in enumerate(placement) if COL in pl),
            )
            if a.cls == FlatteningClass.OTHER:
                out.append(a)
        return out
    matrix = (COL, COL) if cls == FlatteningClass.V else (ROW, COL)
    for chaos in itertools.product(_CHAOS_ORDER, repeat=q):
        if cls == FlatteningClass.SIGMA and BOTH in chaos:
            continue
        if cls == FlatteningClass.V and (BOTH in chaos or ROW not in chaos):
            continue
        if cls == FlatteningClass.R and BOTH not in chaos:
            continue
        out.append(FlatteningAssignment(chaos + matrix, cls))
    return out


# --------------------------------------------------------------------------
# closed-form norms


def _incidence(schema: ChaosSchema) -> np.ndarray:
    """Boolean (q+2, p) matrix: coordinate t uses summation index u."""
    inc = np.zeros((schema.q + 2, schema.p), dtype=bool)
    for t, coord in enumerate(schema.coords):
        inc[t, list(coord)] = True
    return inc


def exponent_matrix(schema: ChaosSchema, assignments: Sequence[FlatteningAssignment]) -> np.ndarray:
    """Exponents e_u = [u not in rows] + [u not in cols] for a batch of assignments."""
    inc = _incidence(schema).astype(np.int64)
    n = len(assignments)
    in_rows = np.zeros((n, schema.q + 2), dtype=np.int64)
    in_cols = np.zeros((n, schema.q + 2), dtype=np.int64)
    for i, a in enumerate(assignments):
        for t, pl in enumerate(a.placement):
            in_rows[i, t] = ROW in pl
            in_cols[i, t] = COL in pl
    row_hit = (in_rows @ inc) > 0
    col_hit = (in_cols @ inc) > 0
    return (~row_hit).astype(np.int64) + (~col_hit).astype(np.int64)


def index_split(schema: ChaosSchema, a: FlatteningAssignment) -> tuple[str, ...]:
    reached_r = set().union(*(schema.coords[t] for t in a.rows)) if a.rows else set()
    reached_c = set().union(*(schema.coords[t] for t in a.cols)) if a.cols else set()
    out = []
    for u in range(schema.p):
        tag = (ROW if u in reached_r else "") + (COL if u in reached_c else "")
        out.append(tag or NEITHER)
    return tuple(out)


@dataclass(frozen=True)
class FlatteningRow:
    assignment: FlatteningAssignment
    split: tuple[str, ...]
    exponents: tuple[int, ...]
    norm_sq_symbolic: Monomial
    norm_sq_numeric: float | None
    is_upper_bound: bool

    @property
    def cls(self) -> FlatteningClass:
        return self.assignment.cls


def _numeric_values(schema: ChaosSchema, values: Mapping[str, float] | None) -> dict[str, float] | None:
    syms = schema.symbols()
    if not syms:
        return {}
    if values is not None and all(s in values for s in syms):
        return dict(values)
    return None


def _make_row(schema, a, exps, values) -> FlatteningRow:
    mono = Monomial.one()
    for u, e in enumerate(exps):
        if e:
            mono = mono * schema.dim_monomial(u) ** int(e)
    vals = _numeric_values(schema, values)
    numeric = mono.evaluate(vals) if vals is not None else None
    return FlatteningRow(
        assignment=a,
        split=index_split(schema, a),
        exponents=tuple(int(e) for e in exps),
        norm_sq_symbolic=mono,
        norm_sq_numeric=numeric,
        is_upper_bound=bool(schema.weight),
    )


def flattening_norm_sq(
    schema: ChaosSchema, a: FlatteningAssignment, values: Mapping[str, float] | None = None
) -> FlatteningRow:
    exps = exponent_matrix(schema, [a])[0]
    return _make_row(schema, a, exps, values)


# --------------------------------------------------------------------------
# tables and parameters


@dataclass
class FlatteningTable:
    schema: ChaosSchema
    rows: list[FlatteningRow]
    highlights: list[int]

    def by_class(self, cls: FlatteningClass) -> list[FlatteningRow]:
        return [r for r in self.rows if r.cls == cls]

    def norms_sq(self, cls: FlatteningClass) -> list[Monomial]:
        return [r.norm_sq_symbolic for r in self.by_class(cls)]


def build_table(schema: ChaosSchema, values: Mapping[str, float] | None = None) -> FlatteningTable:
    rows: list[FlatteningRow] = []
    highlights: list[int] = []
    for cls in PARAMETER_CLASSES:
        assignments = enumerate_assignments(schema, cls)
        if not assignments:
            continue
        exps = exponent_matrix(schema, assignments)
        start = len(rows)
        block = [_make_row(schema, a, e, values) for a, e in zip(assignments, exps)]
        rows.extend(block)
        if all(r.norm_sq_numeric is not None for r in block):
            best = max(r.norm_sq_numeric for r in block)
            hits = [i for i, r in enumerate(block) if math.isclose(r.norm_sq_numeric, best, rel_tol=1e-12)]
        else:
            top = maximal(r.norm_sq_symbolic for r in block)
            hits = [i for i, r in enumerate(block) if any(r.norm_sq_symbolic == t for t in top)]
        highlights.extend(start + i for i in hits)
    return FlatteningTable(schema, rows, highlights)


@dataclass(frozen=True)
class ParameterValue:
    """One chaos parameter: the maximal squared-norm monomials and the numeric norm."""

    norm_sq_terms: tuple[Monomial, ...]
    numeric: float | None

    def symbolic(self) -> tuple[Monomial, ...]:
        return tuple(m.sqrt() for m in self.norm_sq_terms)

    def render(self, order: Sequence[str] | None = None) -> str:
        return render_max(self.symbolic(), order)

    def exponent_in(self, symbol: str) -> Fraction:
        """Largest exponent of ``symbol`` among the terms (for single-symbol schemas)."""
        return max((m.sqrt().exponent(symbol) for m in self.norm_sq_terms), default=Fraction(0))


@dataclass(frozen=True)
class ChaosParameters:
    sigma: ParameterValue
    v: ParameterValue
    r: ParameterValue

    def __getitem__(self, name: str) -> ParameterValue:
        return getattr(self, name)

    def numeric(self) -> dict[str, float | None]:
        return {"sigma": self.sigma.numeric, "v": self.v.numeric, "r": self.r.numeric}


def parameters_from_table(table: FlatteningTable) -> ChaosParameters:
    out = {}
    for cls, name in zip(PARAMETER_CLASSES, ("sigma", "v", "r")):
        block = table.by_class(cls)
        terms = tuple(maximal(r.norm_sq_symbolic for r in block))
        if block and all(r.norm_sq_numeric is not None for r in block):
            numeric = math.sqrt(max(r.norm_sq_numeric for r in block))
        elif not block:
            numeric = 0.0
        else:
            numeric = None
        out[name] = ParameterValue(terms, numeric)
    return ChaosParameters(**out)


def chaos_parameters(schema: ChaosSchema, values: Mapping[str, float] | None = None) -> ChaosParameters:
    return parameters_from_table(build_table(schema, values))


# --------------------------------------------------------------------------
# explicit matrices (oracle)


def _lattice(dims: Sequence[int]) -> np.ndarray:
    size = math.prod(dims)
    if size > LATTICE_CAP:
        raise OracleTooLarge(f"summation lattice has {size} points (cap {LATTICE_CAP})")
    return np.indices(dims, dtype=np.int64).reshape(len(dims), -1)


def _linearize(S: np.ndarray, dims: Sequence[int], positions: Sequence[int]) -> tuple[np.ndarray, int]:
    """Mixed-radix index over the listed summation-index positions, last fastest."""
    idx = np.zeros(S.shape[1], dtype=np.int64)
    size = 1
    for u in positions:
        idx = idx * dims[u] + S[u]
        size *= dims[u]
    return idx, size


def explicit_flattening(
    schema: ChaosSchema,
    a: FlatteningAssignment,
    cap: int = DEFAULT_ORACLE_CAP,
    compact: bool = False,
) -> np.ndarray:
    """The literal flattening matrix, summed over the whole lattice.

    With ``compact=True`` all-zero rows and columns are dropped, which
    leaves the nonzero singular values unchanged.
    """
    dims = schema.numeric_dims
    row_pos = [u for t in sorted(a.rows) for u in schema.coords[t]]
    col_pos = [u for t in sorted(a.cols) for u in schema.coords[t]]
    if not compact:
        n_rows = math.prod(dims[u] for u in row_pos)
        n_cols = math.prod(dims[u] for u in col_pos)
        if n_rows > cap or n_cols > cap:
            raise OracleTooLarge(f"flattening is {n_rows} x {n_cols} (cap {cap} per side)")
    S = _lattice(dims)
    f = weight_mask(schema.weight, S)
    S = S[:, f]
    ridx, n_rows = _linearize(S, dims, row_pos)
    cidx, n_cols = _linearize(S, dims, col_pos)
    if compact:
        runiq, ridx = np.unique(ridx, return_inverse=True)
        cuniq, cidx = np.unique(cidx, return_inverse=True)
        n_rows, n_cols = max(len(runiq), 1), max(len(cuniq), 1)
        if n_rows > cap or n_cols > cap:
            raise OracleTooLarge(f"compact flattening is {n_rows} x {n_cols} (cap {cap} per side)")
    out = np.zeros((n_rows, n_cols))
    np.add.at(out, (ridx.ravel(), cidx.ravel()), 1.0)
    return out


@dataclass(frozen=True)
class OracleRow:
    assignment: FlatteningAssignment
    formula_sq: float
    explicit_sq: float
    mode: str  # "equal" or "upper"
    passed: bool


@dataclass
class OracleReport:
    rows: list[OracleRow] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list[OracleRow]:
        return [r for r in self.rows if not r.passed]


def oracle_check(
    schema: ChaosSchema, cap: int = DEFAULT_ORACLE_CAP, tol: float = 1e-9, formula=None
) -> OracleReport:
    """Compare the closed-form norm of every sigma/v/r flattening with a dense SVD."""
    formula = formula or flattening_norm_sq
    report = OracleReport()
    weighted = bool(schema.weight)
    for cls in PARAMETER_CLASSES:
        for a in enumerate_assignments(schema, cls):
            predicted = formula(schema, a).norm_sq_numeric
            mat = explicit_flattening(schema, a, cap=cap, compact=True)
            actual = float(np.linalg.norm(mat, 2)) ** 2 if mat.any() else 0.0
            if weighted:
                passed = predicted >= actual - tol * max(1.0, actual)
            else:
                passed = abs(predicted - actual) <= tol * max(1.0, abs(actual))
            report.rows.append(OracleRow(a, predicted, actual, "upper" if weighted else "equal", passed))
    return report
