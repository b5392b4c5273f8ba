"""Declarative model of matrix chaoses of (nearly) combinatorial type.

A schema names ``p`` summation indices with dimensions ``S_1..S_p`` and
lists ``q`` chaos coordinates plus a row and a column coordinate, each an
ordered tuple of summation indices.  The chaos is

    Y = sum_s f(s) h1[I_1(s)] ... hq[I_q(s)] e_{I_row(s)} e_{I_col(s)}^T

where ``f`` is a product of indicator constraints.  Dimensions may be
integers or symbol names; symbolic schemas are bound to numbers with
:meth:`ChaosSchema.bind`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence, Union

import numpy as np

from .monomial import Monomial

Dim = Union[int, str]
IndexSet = tuple[int, ...]

GAUSSIAN = "gaussian"
RADEMACHER = "rademacher"
BERNOULLI = "bernoulli"
EDGE_RADEMACHER = "edge_rademacher"
CENTERED_CHISQ1 = "centered_chisq1"
DISTRIBUTION_KINDS = (GAUSSIAN, RADEMACHER, BERNOULLI, EDGE_RADEMACHER, CENTERED_CHISQ1)


class SchemaFormatError(ValueError):
    """Raised when a schema document cannot be parsed."""


# --------------------------------------------------------------------------
# weight constraints


@dataclass(frozen=True)
class AllDistinct:
    indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(u) for u in self.indices))

    def referenced(self) -> tuple[int, ...]:
        return self.indices

    def holds(self, s: Sequence[int]) -> bool:
        vals = [s[u] for u in self.indices]
        return len(set(vals)) == len(vals)

    def mask(self, S: np.ndarray) -> np.ndarray:
        out = np.ones(S.shape[1], dtype=bool)
        for a in range(len(self.indices)):
            for b in range(a + 1, len(self.indices)):
                out &= S[self.indices[a]] != S[self.indices[b]]
        return out

    def to_json(self) -> dict:
        return {"type": "AllDistinct", "indices": list(self.indices)}


@dataclass(frozen=True)
class Less:
    u: int
    v: int

    def referenced(self) -> tuple[int, ...]:
        return (self.u, self.v)

    def holds(self, s: Sequence[int]) -> bool:
        return s[self.u] < s[self.v]

    def mask(self, S: np.ndarray) -> np.ndarray:
        return S[self.u] < S[self.v]

    def to_json(self) -> dict:
        return {"type": "Less", "u": self.u, "v": self.v}


@dataclass(frozen=True)
class Greater:
    u: int
    v: int

    def referenced(self) -> tuple[int, ...]:
        return (self.u, self.v)

    def holds(self, s: Sequence[int]) -> bool:
        return s[self.u] > s[self.v]

    def mask(self, S: np.ndarray) -> np.ndarray:
        return S[self.u] > S[self.v]

    def to_json(self) -> dict:
        return {"type": "Greater", "u": self.u, "v": self.v}


@dataclass(frozen=True)
class NotEqualTuple:
    left: tuple[int, ...]
    right: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(int(u) for u in self.left))
        object.__setattr__(self, "right", tuple(int(u) for u in self.right))
        if len(self.left) != len(self.right):
            raise ValueError("NotEqualTuple needs tuples of equal length")

    def referenced(self) -> tuple[int, ...]:
        return self.left + self.right

    def holds(self, s: Sequence[int]) -> bool:
        return tuple(s[u] for u in self.left) != tuple(s[u] for u in self.right)

    def mask(self, S: np.ndarray) -> np.ndarray:
        out = np.zeros(S.shape[1], dtype=bool)
        for a, b in zip(self.left, self.right):
            out |= S[a] != S[b]
        return out

    def to_json(self) -> dict:
        return {"type": "NotEqualTuple", "left": list(self.left), "right": list(self.right)}


Constraint = Union[AllDistinct, Less, Greater, NotEqualTuple]


def weight_mask(constraints: Sequence[Constraint], S: np.ndarray) -> np.ndarray:
    """Evaluate the 0/1 weight on a batch of index tuples ``S`` of shape (p, N)."""
    out = np.ones(S.shape[1], dtype=bool)
    for c in constraints:
        out &= c.mask(S)
    return out


# --------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class DistributionSpec:
    """Entry distribution ``h``; every kind has mean zero.

    ``centered_chisq1`` is ``g**2 - 1`` for standard gaussian ``g`` and is
    kept unnormalized (variance 2).
    """

    kind: str = GAUSSIAN
    param: float | None = None

    def __post_init__(self):
        if self.kind not in DISTRIBUTION_KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == BERNOULLI:
            if self.param is None or not 0.0 < float(self.param) < 1.0:
                raise ValueError("standardized Bernoulli needs a probability in (0, 1)")

    @property
    def variance(self) -> float:
        return 2.0 if self.kind == CENTERED_CHISQ1 else 1.0

    def to_json(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        if self.param is not None:
            out["param"] = self.param
        return out


# --------------------------------------------------------------------------
# the schema


@dataclass(frozen=True)
class ChaosSchema:
    dims: tuple[Dim, ...]
    chaos_coords: tuple[IndexSet, ...]
    row_coord: IndexSet
    col_coord: IndexSet
    weight: tuple[Constraint, ...] = ()
    distribution: DistributionSpec = field(default_factory=DistributionSpec)
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(d if isinstance(d, str) else int(d) for d in self.dims))
        object.__setattr__(self, "chaos_coords", tuple(tuple(int(u) for u in c) for c in self.chaos_coords))
        object.__setattr__(self, "row_coord", tuple(int(u) for u in self.row_coord))
        object.__setattr__(self, "col_coord", tuple(int(u) for u in self.col_coord))
        object.__setattr__(self, "weight", tuple(self.weight))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    # -- shape ----------------------------------------------------------
    @property
    def p(self) -> int:
        return len(self.dims)

    @property
    def q(self) -> int:
        return len(self.chaos_coords)

    @property
    def coords(self) -> tuple[IndexSet, ...]:
        """All ``q + 2`` coordinates; position ``q`` is the row, ``q + 1`` the column."""
        return self.chaos_coords + (self.row_coord, self.col_coord)

    @property
    def index_labels(self) -> tuple[str, ...]:
        if self.labels is not None:
            return self.labels
        return tuple(f"s{u + 1}" for u in range(self.p))

    def coord_label(self, t: int) -> str:
        coord = self.coords[t]
        if not coord:
            return "∅"
        return "".join(self.index_labels[u] for u in coord)

    @property
    def is_symbolic(self) -> bool:
        return any(isinstance(d, str) for d in self.dims)

    def symbols(self) -> list[str]:
        """Dimension symbols in order of first appearance."""
        out: list[str] = []
        for d in self.dims:
            if isinstance(d, str) and d not in out:
                out.append(d)
        return out

    def dim_monomial(self, u: int) -> Monomial:
        return Monomial.from_mapping({str(self.dims[u]): 1})

    def bind(self, values: Mapping[str, int] | None = None, **kw: int) -> "ChaosSchema":
        """Replace symbolic dimensions by integers."""
        values = {**(values or {}), **kw}
        dims = []
        for d in self.dims:
            if isinstance(d, str):
                if d not in values:
                    raise KeyError(f"no value given for dimension symbol {d!r}")
                dims.append(int(values[d]))
            else:
                dims.append(d)
        return replace(self, dims=tuple(dims))

    @property
    def numeric_dims(self) -> tuple[int, ...]:
        if self.is_symbolic:
            raise ValueError("schema has symbolic dimensions; bind() them first")
        return self.dims  # type: ignore[return-value]

    def coord_size(self, coord: Sequence[int]) -> int:
        dims = self.numeric_dims
        return math.prod(dims[u] for u in coord)

    @property
    def d1(self) -> int:
        return self.coord_size(self.row_coord)

    @property
    def d2(self) -> int:
        return self.coord_size(self.col_coord)

    @property
    def d(self) -> int:
        return max(self.d1, self.d2)

    @property
    def alphabet_sizes(self) -> tuple[int, ...]:
        return tuple(self.coord_size(c) for c in self.chaos_coords)

    @property
    def m(self) -> int:
        return max(self.alphabet_sizes, default=1)

    @property
    def lattice_size(self) -> int:
        return math.prod(self.numeric_dims)

    def weight_holds(self, s: Sequence[int]) -> bool:
        return all(c.holds(s) for c in self.weight)

    # -- serialization --------------------------------------------------
    def to_json(self) -> dict:
        out: dict[str, Any] = {
            "p": self.p,
            "dims": list(self.dims),
            "q": self.q,
            "chaos_coords": [list(c) for c in self.chaos_coords],
            "row_coord": list(self.row_coord),
            "col_coord": list(self.col_coord),
            "weight": {"constraints": [c.to_json() for c in self.weight]},
            "distribution": self.distribution.to_json(),
        }
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False)


_SCHEMA_FIELDS = {"p", "dims", "q", "chaos_coords", "row_coord", "col_coord", "weight", "distribution", "labels"}
_REQUIRED_FIELDS = _SCHEMA_FIELDS - {"labels", "weight", "distribution"}


def _constraint_from_json(doc: Any) -> Constraint:
    if not isinstance(doc, dict) or "type" not in doc:
        raise SchemaFormatError(f"constraint must be an object with a 'type': {doc!r}")
    kind = doc["type"]
    allowed = {
        "AllDistinct": {"type", "indices"},
        "Less": {"type", "u", "v"},
        "Greater": {"type", "u", "v"},
        "NotEqualTuple": {"type", "left", "right"},
    }
    if kind not in allowed:
        raise SchemaFormatError(f"unknown constraint type {kind!r}")
    if set(doc) != allowed[kind]:
        raise SchemaFormatError(f"constraint {kind} expects fields {sorted(allowed[kind])}")
    try:
        if kind == "AllDistinct":
            return AllDistinct(tuple(doc["indices"]))
        if kind == "Less":
            return Less(int(doc["u"]), int(doc["v"]))
        if kind == "Greater":
            return Greater(int(doc["u"]), int(doc["v"]))
        return NotEqualTuple(tuple(doc["left"]), tuple(doc["right"]))
    except (TypeError, ValueError) as exc:
        raise SchemaFormatError(str(exc)) from exc


def schema_from_json(doc: Any) -> ChaosSchema:
    if not isinstance(doc, dict):
        raise SchemaFormatError("schema document must be a JSON object")
    extra = set(doc) - _SCHEMA_FIELDS
    if extra:
        raise SchemaFormatError(f"unexpected fields: {sorted(extra)}")
    missing = _REQUIRED_FIELDS - set(doc)
    if missing:
        raise SchemaFormatError(f"missing fields: {sorted(missing)}")
    dims = doc["dims"]
    if not isinstance(dims, list) or not all(isinstance(d, (int, str)) and not isinstance(d, bool) for d in dims):
        raise SchemaFormatError("dims must be a list of integers or symbol names")
    if doc["p"] != len(dims):
        raise SchemaFormatError(f"p = {doc['p']} but {len(dims)} dims given")
    chaos = doc["chaos_coords"]
    if not isinstance(chaos, list) or doc["q"] != len(chaos):
        raise SchemaFormatError(f"q = {doc['q']} does not match the number of chaos coordinates")
    for key in ("row_coord", "col_coord"):
        if not isinstance(doc[key], list):
            raise SchemaFormatError(f"{key} must be a list")
    weight = doc.get("weight", {"constraints": []})
    if not isinstance(weight, dict) or set(weight) != {"constraints"}:
        raise SchemaFormatError("weight must be an object with a single 'constraints' list")
    constraints = tuple(_constraint_from_json(c) for c in weight["constraints"])
    dist_doc = doc.get("distribution", {"kind": GAUSSIAN})
    if not isinstance(dist_doc, dict) or not set(dist_doc) <= {"kind", "param"} or "kind" not in dist_doc:
        raise SchemaFormatError("distribution must be an object {kind, param?}")
    try:
        dist = DistributionSpec(dist_doc["kind"], dist_doc.get("param"))
        return ChaosSchema(
            dims=tuple(dims),
            chaos_coords=tuple(tuple(c) for c in chaos),
            row_coord=tuple(doc["row_coord"]),
            col_coord=tuple(doc["col_coord"]),
            weight=constraints,
            distribution=dist,
            labels=tuple(doc["labels"]) if "labels" in doc else None,
        )
    except (TypeError, ValueError) as exc:
        raise SchemaFormatError(str(exc)) from exc


def load_schema(path: str) -> ChaosSchema:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaFormatError(f"malformed JSON: {exc}") from exc
    return schema_from_json(doc)


# --------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def find_satisfying(schema: ChaosSchema, dims: Sequence[int] | None = None) -> tuple[int, ...] | None:
    """Return some index tuple with f(s) = 1, or None.

    Constraints only compare values, so a witness can always be compressed
    to values below ``p``; the search therefore ranges over
    ``min(S_u, p)`` values per index.
    """
    if dims is None:
        dims = schema.numeric_dims
    p = len(dims)
    ranges = [min(int(d), p) for d in dims]
    if any(r <= 0 for r in ranges):
        return None
    # constraints become checkable once their highest referenced index is assigned
    by_last: list[list[Constraint]] = [[] for _ in range(p)]
    for c in schema.weight:
        by_last[max(c.referenced())].append(c)
    s = [0] * p

    def extend(u: int) -> bool:
        if u == p:
            return True
        for value in range(ranges[u]):
            s[u] = value
            if all(c.holds(s) for c in by_last[u]) and extend(u + 1):
                return True
        return False

    return tuple(s) if extend(0) else None


def validate(schema: ChaosSchema) -> ValidationReport:
    report = ValidationReport()
    p = schema.p
    if schema.q == 0:
        report.violations.append("q = 0: a chaos needs at least one chaos coordinate")
    for d in schema.dims:
        if isinstance(d, int) and d < 1:
            report.violations.append(f"dimension {d} must be a positive integer")
    named = [("chaos coordinate %d" % (t + 1), c) for t, c in enumerate(schema.chaos_coords)]
    named += [("row coordinate", schema.row_coord), ("column coordinate", schema.col_coord)]
    for name, coord in named:
        for u in coord:
            if not 0 <= u < p:
                report.violations.append(f"index out of range: {name} references index {u} (p = {p})")
        if len(set(coord)) != len(coord):
            report.violations.append(f"duplicate index within {name}: {list(coord)}")
    for c in schema.weight:
        for u in c.referenced():
            if not 0 <= u < p:
                report.violations.append(f"index out of range: weight constraint {c} references index {u}")
    if schema.labels is not None and len(schema.labels) != p:
        report.violations.append(f"labels has {len(schema.labels)} entries, expected {p}")
    if report.violations:
        return report
    # symbolic dimensions are checked as if large
    dims = [d if isinstance(d, int) else p for d in schema.dims]
    if schema.weight and find_satisfying(schema, dims) is None:
        report.violations.append("unsatisfiable weight: no index tuple satisfies all constraints")
    return report


# --------------------------------------------------------------------------
# named families


def khatri_rao_schema(q: int, d: Dim = "d", n: Dim = "n", distribution: DistributionSpec | None = None) -> ChaosSchema:
    """Column-wise Kronecker product of ``q`` independent ``d x n`` matrices."""
    if q < 1:
        raise ValueError("Khatri-Rao order q must be >= 1")
    if isinstance(d, int) and d < 1 or isinstance(n, int) and n < 1:
        raise ValueError("dimensions must be positive")
    k = q
    subscripts = "₁₂₃₄₅₆₇₈₉"
    labels = tuple(f"j{subscripts[t]}" if t < 9 else f"j{t + 1}" for t in range(q)) + ("k",)
    return ChaosSchema(
        dims=(d,) * q + (n,),
        chaos_coords=tuple((t, k) for t in range(q)),
        row_coord=tuple(range(q)),
        col_coord=(k,),
        distribution=distribution or DistributionSpec(GAUSSIAN),
        labels=labels,
    )


def tensor_pca_schemas(n: Dim = "n", d: Dim = "d") -> tuple[ChaosSchema, ChaosSchema]:
    """The diagonal part Y1' (entries g^2 - 1) and off-diagonal part Y2 of sum_i W_i (x) W_i - E."""
    y1 = ChaosSchema(
        dims=(n, d, d),
        chaos_coords=((0, 1, 2),),
        row_coord=(1,),
        col_coord=(2,),
        distribution=DistributionSpec(CENTERED_CHISQ1),
        labels=("i", "j", "k"),
    )
    # indices: i, j1, j2, k1, k2
    y2 = ChaosSchema(
        dims=(n, d, d, d, d),
        chaos_coords=((0, 1, 3), (0, 2, 4)),
        row_coord=(1, 2),
        col_coord=(3, 4),
        weight=(NotEqualTuple((1, 3), (2, 4)),),
        distribution=DistributionSpec(GAUSSIAN),
        labels=("i", "j₁", "j₂", "k₁", "k₂"),
    )
    return y1, y2


def ellipsoid_schemas(m: Dim = "m", d: Dim = "d") -> tuple[ChaosSchema, ChaosSchema]:
    """Decoupled forms of the ellipsoid-fitting matrices M_phi (order 4) and M_psi (order 2)."""
    # indices: i, j, a, b
    phi = ChaosSchema(
        dims=(m, m, d, d),
        chaos_coords=((0, 2), (0, 3), (1, 2), (1, 3)),
        row_coord=(0,),
        col_coord=(1,),
        weight=(AllDistinct((0, 1)), AllDistinct((2, 3))),
        distribution=DistributionSpec(GAUSSIAN),
        labels=("i", "j", "a", "b"),
    )
    psi = ChaosSchema(
        dims=(m, m, d),
        chaos_coords=((0, 2), (1, 2)),
        row_coord=(0,),
        col_coord=(1,),
        weight=(AllDistinct((0, 1)),),
        distribution=DistributionSpec(CENTERED_CHISQ1),
        labels=("i", "j", "a"),
    )
    return phi, psi
