"""Monte Carlo materialization of matrix chaoses and spectral-norm estimation."""

from __future__ import annotations

import enum
import itertools
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy import stats

from . import _kernels
from .schema import (
    BERNOULLI,
    CENTERED_CHISQ1,
    EDGE_RADEMACHER,
    GAUSSIAN,
    RADEMACHER,
    AllDistinct,
    ChaosSchema,
    Greater,
    Less,
    NotEqualTuple,
)

MAX_ENTRIES = 64_000_000
MAX_LATTICE = 200_000_000
MAX_COO = 20_000_000
SPARSE_DENSITY = 0.05
DENSE_SVD_DIM = 64


class CapExceeded(RuntimeError):
    pass


class CoupledUnsupported(ValueError):
    pass


class NotSymmetrizable(ValueError):
    pass


class NonConvergenceWarning(RuntimeWarning):
    pass


class Mode(str, enum.Enum):
    COUPLED = "coupled"
    DECOUPLED = "decoupled"


# --------------------------------------------------------------------------
# planning and random tables


def _coef(dims: Sequence[int], coord: Sequence[int]) -> np.ndarray:
    """Mixed-radix coefficients of ``coord`` (last index fastest)."""
    coef = np.zeros(len(dims), dtype=np.int64)
    stride = 1
    for u in reversed(coord):
        coef[u] += stride
        stride *= dims[u]
    return coef


def _check_coupled(schema: ChaosSchema) -> None:
    dims = schema.numeric_dims
    shapes = {tuple(dims[u] for u in c) for c in schema.chaos_coords}
    if len(shapes) > 1:
        raise CoupledUnsupported(
            "coupled sampling needs every chaos coordinate to range over the same alphabet; "
            f"got coordinate shapes {sorted(shapes)}"
        )


def make_plan(schema: ChaosSchema, mode: Mode | str, distinct_keys: bool | None = None) -> _kernels.LatticePlan:
    mode = Mode(mode)
    dims = schema.numeric_dims
    p, q = schema.p, schema.q
    if mode == Mode.COUPLED:
        _check_coupled(schema)
    edge = schema.distribution.kind == EDGE_RADEMACHER
    key_coef = np.zeros((q, p), dtype=np.int64)
    sym = -np.ones((q, 2), dtype=np.int64)
    sym_n = np.zeros(q, dtype=np.int64)
    for t, coord in enumerate(schema.chaos_coords):
        if edge:
            if len(coord) != 2 or dims[coord[0]] != dims[coord[1]]:
                raise ValueError("edge-indexed entries need chaos coordinates (s_u, s_v) of equal dimension")
            sym[t] = coord
            sym_n[t] = dims[coord[0]]
        else:
            key_coef[t] = _coef(dims, coord)
    ne, lt, tl, tr = [], [], [], []
    for c in schema.weight:
        if isinstance(c, AllDistinct):
            ne.extend(itertools.combinations(c.indices, 2))
        elif isinstance(c, Less):
            lt.append((c.u, c.v))
        elif isinstance(c, Greater):
            lt.append((c.v, c.u))
        elif isinstance(c, NotEqualTuple):
            tl.append(tuple(c.left))
            tr.append(tuple(c.right))
    width = max((len(x) for x in tl), default=1)
    pad = lambda rows: np.array([list(r) + [-1] * (width - len(r)) for r in rows], dtype=np.int64).reshape(-1, width)
    if distinct_keys is None:
        distinct_keys = mode == Mode.COUPLED
    return _kernels.LatticePlan(
        dims=np.array(dims, dtype=np.int64),
        row_coef=_coef(dims, schema.row_coord),
        col_coef=_coef(dims, schema.col_coord),
        key_coef=key_coef,
        sym=sym,
        sym_n=sym_n,
        ne_pairs=np.array(ne, dtype=np.int64).reshape(-1, 2),
        lt_pairs=np.array(lt, dtype=np.int64).reshape(-1, 2),
        tup_left=pad(tl),
        tup_right=pad(tr),
        distinct_keys=bool(distinct_keys),
    )


def layer_rng(seed: int, trial: int, layer: int) -> np.random.Generator:
    """Generator for one (seed, trial, layer) cell; coupled mode uses layer 0 throughout."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(trial), int(layer)]))


def draw(dist, size: int, rng: np.random.Generator, unit_variance: bool = False) -> np.ndarray:
    kind = dist.kind
    if kind == GAUSSIAN:
        return rng.standard_normal(size)
    if kind in (RADEMACHER, EDGE_RADEMACHER):
        return rng.integers(0, 2, size=size).astype(np.float64) * 2.0 - 1.0
    if kind == BERNOULLI:
        prob = dist.param
        x = (rng.random(size) < prob).astype(np.float64)
        return (x - prob) / math.sqrt(prob * (1.0 - prob))
    if kind == CENTERED_CHISQ1:
        g = rng.standard_normal(size)
        h = g * g - 1.0
        return h / math.sqrt(2.0) if unit_variance else h
    raise ValueError(f"unknown distribution kind {kind!r}")


def _table_size(schema: ChaosSchema, t: int) -> int:
    coord = schema.chaos_coords[t]
    if schema.distribution.kind == EDGE_RADEMACHER:
        n = schema.numeric_dims[coord[0]]
        return n * n
    return schema.coord_size(coord)


def draw_tables(
    schema: ChaosSchema, mode: Mode | str, seed: int, trial: int = 0, unit_variance: bool = False
) -> np.ndarray:
    """Random tables of shape (q, M): row t feeds chaos coordinate t."""
    mode = Mode(mode)
    q = schema.q
    width = max((_table_size(schema, t) for t in range(q)), default=1)
    tables = np.zeros((q, width))
    if mode == Mode.COUPLED:
        shared = draw(schema.distribution, width, layer_rng(seed, trial, 0), unit_variance)
        if schema.distribution.kind == EDGE_RADEMACHER:
            n = int(math.isqrt(width))
            half = shared.reshape(n, n)
            shared = np.triu(half, 1) + np.triu(half, 1).T  # symmetric; the kernel reads min*n+max
            shared = shared.ravel()
        tables[:] = shared
    else:
        for t in range(q):
            tables[t, : _table_size(schema, t)] = draw(
                schema.distribution, _table_size(schema, t), layer_rng(seed, trial, t), unit_variance
            )
    return tables


# --------------------------------------------------------------------------
# materialization


def _check_caps(schema: ChaosSchema, dense: bool, max_entries: int, max_lattice: int) -> None:
    if schema.lattice_size > max_lattice:
        raise CapExceeded(f"summation lattice has {schema.lattice_size} points (cap {max_lattice})")
    if not dense and schema.lattice_size > MAX_COO:
        raise CapExceeded(f"sparse assembly of {schema.lattice_size} lattice points exceeds cap {MAX_COO}")
    if dense and schema.d1 * schema.d2 > max_entries:
        raise CapExceeded(f"dense matrix {schema.d1} x {schema.d2} exceeds cap {max_entries}")


def prefers_sparse(schema: ChaosSchema) -> bool:
    return schema.lattice_size < SPARSE_DENSITY * schema.d1 * schema.d2


def accumulate(
    schema: ChaosSchema,
    plan: _kernels.LatticePlan,
    tables: np.ndarray,
    sparse: bool | None = None,
    backend: str | None = None,
    max_entries: int = MAX_ENTRIES,
    max_lattice: int = MAX_LATTICE,
):
    if sparse is None:
        sparse = prefers_sparse(schema)
    _check_caps(schema, not sparse, max_entries, max_lattice)
    d1, d2 = schema.d1, schema.d2
    if sparse:
        r, c, v = _kernels.accumulate_coo(plan, tables, backend)
        return sp.coo_matrix((v, (r, c)), shape=(d1, d2)).tocsr()
    return _kernels.accumulate_dense(plan, tables, d1, d2, backend)


def materialize(
    schema: ChaosSchema,
    mode: Mode | str = Mode.DECOUPLED,
    seed: int = 0,
    trial: int = 0,
    *,
    sparse: bool | None = None,
    backend: str | None = None,
    unit_variance: bool = False,
    max_entries: int = MAX_ENTRIES,
    max_lattice: int = MAX_LATTICE,
):
    """One realization of the chaos; dense ndarray or CSR matrix."""
    plan = make_plan(schema, mode)
    tables = draw_tables(schema, mode, seed, trial, unit_variance)
    return accumulate(schema, plan, tables, sparse, backend, max_entries, max_lattice)


# --------------------------------------------------------------------------
# spectral norm


@dataclass(frozen=True)
class NormEstimate:
    value: float
    converged: bool
    iterations: int

    def __float__(self) -> float:
        return self.value


def default_max_iters(M) -> int:
    return int(10 * math.log(max(2, max(M.shape))) + 200)


def estimate_spectral_norm(M, tol: float = 1e-6, max_iters: int | None = None, seed: int = 0) -> NormEstimate:
    if tol <= 0:
        raise ValueError("tol must be positive")
    if min(M.shape) == 0:
        return NormEstimate(0.0, True, 0)
    if min(M.shape) <= DENSE_SVD_DIM:
        dense = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
        return NormEstimate(float(np.linalg.norm(dense, 2)), True, 0)
    max_iters = max_iters or default_max_iters(M)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M.shape[1])
    x /= np.linalg.norm(x)
    MT = M.T
    est = 0.0
    confirm = 0
    for it in range(1, max_iters + 1):
        y = M @ x
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return NormEstimate(0.0, True, it)
        z = MT @ y
        nz = np.linalg.norm(z)
        x = z / nz
        if abs(new - est) <= tol * new:
            confirm += 1
            if confirm > 2:
                return NormEstimate(max(new, est), True, it)
        else:
            confirm = 0
        est = new
    return NormEstimate(est, False, max_iters)


def spectral_norm(M, tol: float = 1e-6, max_iters: int | None = None, seed: int = 0) -> float:
    """Largest singular value; warns with NonConvergenceWarning and returns the best estimate."""
    res = estimate_spectral_norm(M, tol, max_iters, seed)
    if not res.converged:
        warnings.warn(f"power iteration stopped after {res.iterations} steps", NonConvergenceWarning, stacklevel=2)
    return res.value


# --------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class SampleConfig:
    schema: ChaosSchema
    mode: Mode = Mode.DECOUPLED
    trials: int = 10
    seed: int = 0
    norm_tol: float = 1e-6
    max_iters: int | None = None
    unit_variance: bool = False
    backend: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.norm_tol <= 0:
            raise ValueError("norm_tol must be positive")
        object.__setattr__(self, "mode", Mode(self.mode))

    def echo(self) -> dict:
        return {
            "dims": list(self.schema.numeric_dims),
            "q": self.schema.q,
            "distribution": self.schema.distribution.kind,
            "mode": self.mode.value,
            "trials": self.trials,
            "seed": self.seed,
            "norm_tol": self.norm_tol,
            "max_iters": self.max_iters,
            "unit_variance": self.unit_variance,
        }


@dataclass
class SampleReport:
    mean_norm: float
    stderr: float
    trials: int
    norms: tuple[float, ...]
    converged: tuple[bool, ...]
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["trial,norm"]
        lines += [f"{i},{x!r}" for i, x in enumerate(self.norms)]
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "mean_norm": self.mean_norm,
            "stderr": self.stderr,
            "trials": self.trials,
            "all_converged": all(self.converged),
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def _summarize(norms: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(norms, dtype=float)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return mean, stderr


def run_trial(config: SampleConfig, trial: int) -> NormEstimate:
    M = materialize(
        config.schema, config.mode, config.seed, trial, backend=config.backend, unit_variance=config.unit_variance
    )
    return estimate_spectral_norm(M, config.norm_tol, config.max_iters, seed=trial)


def monte_carlo(config: SampleConfig, trial_ids: Sequence[int] | None = None) -> SampleReport:
    ids = list(range(config.trials)) if trial_ids is None else list(trial_ids)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(lambda i: run_trial(config, i), ids))
    else:
        results = [run_trial(config, i) for i in ids]
    norms = tuple(r.value for r in results)
    mean, stderr = _summarize(norms)
    return SampleReport(mean, stderr, len(ids), norms, tuple(r.converged for r in results), config.echo())


@dataclass
class ScalingReport:
    points: list[tuple[float, float]]
    stderrs: list[float]
    slope: float
    intercept: float
    slope_stderr: float

    @property
    def slope_ci(self) -> tuple[float, float]:
        return (self.slope - 2 * self.slope_stderr, self.slope + 2 * self.slope_stderr)

    def to_csv(self) -> str:
        lines = ["dim,mean,stderr"]
        lines += [f"{d!r},{m!r},{s!r}" for (d, m), s in zip(self.points, self.stderrs)]
        lines.append(f"# slope={self.slope!r} intercept={self.intercept!r} slope_stderr={self.slope_stderr!r}")
        return "\n".join(lines) + "\n"


def scaling_fit(series: Sequence[tuple[float, "SampleReport | float"]]) -> ScalingReport:
    """Least-squares slope of log(mean) against log(dim)."""
    if len(series) < 3:
        raise ValueError("scaling fit needs at least 3 sizes")
    dims = [float(d) for d, _ in series]
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise ValueError("sizes must be strictly increasing")
    means = [float(r.mean_norm if isinstance(r, SampleReport) else r) for _, r in series]
    errs = [float(r.stderr if isinstance(r, SampleReport) else 0.0) for _, r in series]
    if any(m <= 0 or d <= 0 for d, m in zip(dims, means)):
        raise ValueError("scaling fit needs positive sizes and means")
    fit = stats.linregress(np.log(dims), np.log(means))
    return ScalingReport(list(zip(dims, means)), errs, float(fit.slope), float(fit.intercept), float(fit.stderr))


# --------------------------------------------------------------------------
# decoupling


@dataclass(frozen=True)
class DenseChaos:
    """Explicit coefficients A[i_1, ..., i_q, :, :] over an alphabet of size m."""

    coeffs: np.ndarray
    q: int
    distribution: str = GAUSSIAN

    @property
    def m(self) -> int:
        return self.coeffs.shape[0]

    def distinct_mask(self) -> np.ndarray:
        grids = np.indices((self.m,) * self.q)
        mask = np.ones((self.m,) * self.q, dtype=bool)
        for a, b in itertools.combinations(range(self.q), 2):
            mask &= grids[a] != grids[b]
        return mask

    def symmetrized(self) -> "DenseChaos":
        perms = list(itertools.permutations(range(self.q)))
        axes_tail = (self.q, self.q + 1)
        acc = sum(np.transpose(self.coeffs, perm + axes_tail) for perm in perms) / len(perms)
        return DenseChaos(acc, self.q, self.distribution)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        restricted = self.coeffs * self.distinct_mask()[(...,) + (None, None)]
        sym = self.symmetrized().coeffs * self.distinct_mask()[(...,) + (None, None)]
        return bool(np.allclose(restricted, sym, atol=tol))

    def realize(self, layers: Sequence[np.ndarray]) -> np.ndarray:
        """Sum over distinct index tuples of prod_t layers[t][i_t] * A_i."""
        weights = self.distinct_mask().astype(float)
        for t, h in enumerate(layers):
            shape = [1] * self.q
            shape[t] = self.m
            weights = weights * h.reshape(shape)
        return np.tensordot(weights, self.coeffs, axes=self.q)


def _dense_tables(chaos: DenseChaos, seed: int, trial: int, coupled: bool) -> list[np.ndarray]:
    from .schema import DistributionSpec

    dist = DistributionSpec(chaos.distribution)
    if coupled:
        h = draw(dist, chaos.m, layer_rng(seed, trial, 0))
        return [h] * chaos.q
    return [draw(dist, chaos.m, layer_rng(seed, trial, t)) for t in range(chaos.q)]


def _decoupling_dense(chaos: DenseChaos, trials: int, seed: int, symmetrize: bool) -> float:
    if not chaos.is_symmetric():
        if not symmetrize:
            raise NotSymmetrizable("coefficients are not symmetric in the chaos slots")
        chaos = chaos.symmetrized()
    if not np.any(chaos.coeffs * chaos.distinct_mask()[(...,) + (None, None)]):
        raise NotSymmetrizable("symmetrized coefficients vanish, so the coupled chaos is identically zero")
    xs, ys = [], []
    for trial in range(trials):
        xs.append(spectral_norm(chaos.realize(_dense_tables(chaos, seed, trial, True))))
        ys.append(spectral_norm(chaos.realize(_dense_tables(chaos, seed, trial, False))))
    return float(np.mean(xs) / np.mean(ys))


def _symmetrized_decoupled(schema: ChaosSchema, seed: int, trial: int):
    plan = make_plan(schema, Mode.DECOUPLED, distinct_keys=True)
    tables = draw_tables(schema, Mode.DECOUPLED, seed, trial)
    perms = list(itertools.permutations(range(schema.q)))
    acc = None
    for perm in perms:
        part = accumulate(schema, plan, tables[list(perm)])
        acc = part if acc is None else acc + part
    return acc / len(perms)


def decoupling_ratio(
    target: "ChaosSchema | DenseChaos",
    dims: dict | None = None,
    trials: int = 10,
    seed: int = 0,
    symmetrize: bool = True,
) -> float:
    """mean ||X|| / mean ||Y|| for the coupled chaos X and its symmetrized decoupled version Y."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if isinstance(target, DenseChaos):
        return _decoupling_dense(target, trials, seed, symmetrize)
    schema = target.bind(dims) if dims else target
    try:
        _check_coupled(schema)
    except CoupledUnsupported as exc:
        raise NotSymmetrizable(str(exc)) from None
    if schema.q > 6:
        raise NotSymmetrizable("symmetrization over more than 6 slots is not supported")
    xs, ys = [], []
    for trial in range(trials):
        xs.append(spectral_norm(materialize(schema, Mode.COUPLED, seed, trial)))
        ys.append(spectral_norm(_symmetrized_decoupled(schema, seed, trial)))
    mx, my = float(np.mean(xs)), float(np.mean(ys))
    if mx == 0.0 and my == 0.0:
        raise NotSymmetrizable("both chaoses vanish identically")
    return mx / my
