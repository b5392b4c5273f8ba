import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from chaosbound.flattening import FlatteningClass, enumerate_assignments, exponent_matrix
from chaosbound.graph import (
    Shape,
    ShapeError,
    edge_ordering,
    enumerate_shapes,
    graph_schema,
    load_shape,
    materialize_graph_matrix,
    min_vertex_separator,
    norm_exponents,
    separates,
    shape_from_json,
    shape_to_schemas,
    sigma_bound_check,
    sigma_exponents,
    star_shape,
    wigner_shape,
    zshape,
)
from chaosbound.sampler import Mode, draw_tables
from chaosbound.schema import validate

BETA, GAMMA, DELTA = wigner_shape(), zshape(), star_shape()
EDGELESS = Shape(("u",), ("u",), ("u",), ())


def shape_of(doc):
    return shape_from_json(doc)


def test_separator_sizes():
    assert min_vertex_separator(BETA).size == 1
    assert min_vertex_separator(GAMMA).size == 2
    assert min_vertex_separator(DELTA).separator == frozenset({"m"})


def test_norm_exponents_named():
    beta, gamma, delta = map(norm_exponents, (BETA, GAMMA, DELTA))
    assert (beta.poly_exponent, beta.f) == (Fraction(1, 2), 1)
    assert (gamma.poly_exponent, gamma.f) == (1, 2)
    assert (delta.poly_exponent, delta.f, delta.isolated) == (3, 2, ("o",))
    edgeless = norm_exponents(EDGELESS)
    assert (edgeless.poly_exponent, edgeless.f) == (0, 0)


def test_edge_ordering_named():
    o = edge_ordering(DELTA)
    assert (o.k1, o.k2) == (2, 0)
    assert set(o.edges[-2:]) in ({("i", "m"), ("k", "m")}, {("j", "m"), ("l", "m")}, {("i", "m"), ("l", "m")}, {("j", "m"), ("k", "m")})
    b = edge_ordering(BETA)
    assert (b.k1, b.k2) == (1, 0)
    assert edge_ordering(EDGELESS).k == 0


def test_shape_to_schemas_counts():
    assert len(shape_to_schemas(BETA)) == 2
    schemas = shape_to_schemas(GAMMA)
    assert len(schemas) == 8 and all(s.q == 3 for s in schemas)
    (only,) = shape_to_schemas(EDGELESS)
    assert only.q == 0 and not validate(only).ok


def test_sigma_check_beta_both_flattenings_n():
    schema = graph_schema(BETA)
    exps = exponent_matrix(schema, enumerate_assignments(schema, FlatteningClass.SIGMA)).sum(axis=1)
    assert list(exps) == [1, 1]
    assert sigma_bound_check(BETA).sigma_exponent == Fraction(1, 2)


def test_sigma_check_gamma_delta():
    assert sigma_bound_check(GAMMA).sigma_exponent == 1
    check = sigma_bound_check(DELTA)
    assert check.sigma_exponent == 3 and "m" in check.both_vertices and check.ok


def test_materialize_beta():
    M = materialize_graph_matrix(BETA, 4, seed=3)
    M = M.toarray() if hasattr(M, "toarray") else M
    assert np.all(np.diag(M) == 0)
    off = M[~np.eye(4, dtype=bool)]
    assert set(np.unique(off)) <= {-1.0, 1.0}
    np.testing.assert_array_equal(M != 0, M.T != 0)


def test_materialize_edgeless_identity():
    M = materialize_graph_matrix(EDGELESS, 5)
    M = M.toarray() if hasattr(M, "toarray") else M
    np.testing.assert_array_equal(M, np.eye(5))


def test_materialize_delta_entry_by_direct_sum():
    n, seed = 7, 11
    M = materialize_graph_matrix(DELTA, n, seed=seed)
    M = M.toarray() if hasattr(M, "toarray") else M
    eps = draw_tables(graph_schema(DELTA, n), Mode.COUPLED, seed, 0)[0].reshape(n, n)
    i, j, k, l = 0, 1, 2, 3
    total = 0.0
    for m, o in itertools.permutations(range(n), 2):
        if {m, o} & {i, j, k, l}:
            continue
        total += eps[i, m] * eps[j, m] * eps[k, m] * eps[l, m]
    assert M[i * n + j, k * n + l] == total
    assert M[0, 0] == 0  # repeated vertices are excluded


def test_shape_json_errors(tmp_path):
    good = BETA.to_json()
    with pytest.raises(ShapeError, match="unknown fields"):
        shape_of({**good, "x": 1})
    with pytest.raises(ShapeError, match="missing fields"):
        shape_of({k: v for k, v in good.items() if k != "left"})
    with pytest.raises(ShapeError, match="self-loop"):
        shape_of({**good, "edges": [["i", "i"]]})
    path = tmp_path / "s.json"
    path.write_text("[")
    with pytest.raises(ShapeError, match="malformed JSON"):
        load_shape(str(path))


seeds = st.integers(0, 2**32 - 1)


@given(seeds)
def test_menger_certificate(seed):
    doc = oracles.random_shape(np.random.default_rng(seed))
    shape = shape_of(doc)
    sep = min_vertex_separator(shape)
    assert sep.size == oracles.min_separator_size(doc["vertices"], doc["left"], doc["right"], doc["edges"])
    assert sep.size == len(sep.paths)
    assert separates(shape, sep.separator)
    used = [v for p in sep.paths for v in p]
    assert len(used) == len(set(used))  # vertex-disjoint
    adj = {frozenset(e) for e in shape.edges}
    for path in sep.paths:
        assert path[0] in shape.left and path[-1] in shape.right
        assert all(frozenset(pair) in adj for pair in zip(path, path[1:]))
        assert len(sep.separator & set(path)) == 1


@given(seeds)
def test_k_at_most_f(seed):
    shape = shape_of(oracles.random_shape(np.random.default_rng(seed)))
    rep = norm_exponents(shape)
    assert rep.k <= rep.f
    assert sorted(rep.ordering.edges) == sorted(shape.edges)


def test_small_corpus_sigma_matches_poly():
    shapes = enumerate_shapes(max_vertices=4, max_edges=3)
    fast = sigma_exponents(shapes)
    for shape, s in zip(shapes, fast):
        ref = oracles.poly_exponent(shape.vertices, shape.left, shape.right, shape.edges)
        assert s == ref == norm_exponents(shape).poly_exponent
    for shape in shapes[::7]:
        if shape.edges:
            assert sigma_bound_check(shape).sigma_exponent == fast[shapes.index(shape)]
