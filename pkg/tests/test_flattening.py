import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from chaosbound.flattening import (
    PARAMETER_CLASSES,
    FlatteningAssignment,
    FlatteningClass,
    build_table,
    chaos_parameters,
    enumerate_assignments,
    explicit_flattening,
    flattening_norm_sq,
    oracle_check,
)
from chaosbound.monomial import Monomial
from chaosbound.schema import ChaosSchema, Greater, Less, ellipsoid_schemas, khatri_rao_schema, tensor_pca_schemas
from strategies import random_schema, schemas

SIGMA, V, R = FlatteningClass.SIGMA, FlatteningClass.V, FlatteningClass.R
M = Monomial.from_mapping


def rendered(table, cls):
    order = table.schema.symbols()
    return [m.render(order) for m in table.norms_sq(cls)]


@pytest.mark.parametrize("q", range(0, 7))
def test_class_counts(q):
    assert len(enumerate_assignments(q, SIGMA)) == 2**q
    assert len(enumerate_assignments(q, V)) == 2**q - 1
    assert len(enumerate_assignments(q, R)) == 3**q - 2**q


def test_khatri_rao_counts_and_q1():
    kr = khatri_rao_schema(2)
    assert len(enumerate_assignments(kr, SIGMA)) == 4
    assert len(enumerate_assignments(kr, R)) == 5
    (only,) = enumerate_assignments(1, V)
    assert only.placement[0] == "R"


def test_table_khatri_rao():
    t = build_table(khatri_rao_schema(2))
    assert rendered(t, SIGMA) == ["d²", "d", "d", "n"]
    assert rendered(t, V) == ["1", "d", "d"]
    assert rendered(t, R) == ["d", "1", "d", "1", "1"]
    sigma_rows = [i for i, r in enumerate(t.rows) if r.cls == SIGMA]
    assert [i for i in t.highlights if i in sigma_rows] == [0, 3]


def test_table_tensor_pca_2():
    cp = chaos_parameters(tensor_pca_schemas()[1])
    assert [m.render(["n", "d"]) for m in cp.sigma.norm_sq_terms] == ["nd²"]
    assert {m.render(["n", "d"]) for m in cp.v.norm_sq_terms} == {"n", "d²"}


def test_table_ellipsoid_psi():
    cp = chaos_parameters(ellipsoid_schemas()[1])
    assert {m.render(["m", "d"]) for m in cp.sigma.norm_sq_terms} == {"md", "m²"}
    assert {m.render(["m", "d"]) for m in cp.v.norm_sq_terms} == {"m", "d"}


def test_parameters_khatri_rao_q2_and_ellipsoid_phi():
    cp = chaos_parameters(khatri_rao_schema(2))
    assert cp.sigma.render(["d", "n"]) == "d ∨ √n"
    assert cp.v.render(["d", "n"]) == cp.r.render(["d", "n"]) == "√d"
    phi = chaos_parameters(ellipsoid_schemas()[0])
    assert phi.sigma.render(["d", "m"]) == "d√m ∨ m"
    assert phi.v.render(["d", "m"]) == "d ∨ √(dm)"


def test_khatri_rao_q3_parameters():
    cp = chaos_parameters(khatri_rao_schema(3))
    assert cp.sigma.render(["d", "n"]) == "d^{3/2} ∨ √n"
    assert cp.v.render() == cp.r.render() == "d"
    assert chaos_parameters(khatri_rao_schema(3), {"d": 2, "n": 100}).sigma.numeric == pytest.approx(10.0)


def test_norm_rrrc_and_all_diagonal():
    kr = khatri_rao_schema(2)
    rrrc = FlatteningAssignment(("R", "R", "R", "C"), SIGMA)
    assert flattening_norm_sq(kr, rrrc).norm_sq_symbolic == M({"d": 2})
    diag = FlatteningAssignment.from_sets(2, range(4), range(4))
    assert flattening_norm_sq(kr, diag).norm_sq_symbolic == Monomial.one()


def test_explicit_khatri_rao_small():
    kr = khatri_rao_schema(2, 2, 2)
    mat = explicit_flattening(kr, FlatteningAssignment(("R", "R", "R", "C"), SIGMA), compact=True)
    assert mat.shape == (8, 2)
    assert np.linalg.norm(mat, 2) == pytest.approx(2.0)


def test_explicit_stacked_and_block_diagonal():
    # coefficients A_i = ones(2, 2) for i in [3]
    s = ChaosSchema((3, 2, 2), ((0,),), (1,), (2,))
    stacked = explicit_flattening(s, FlatteningAssignment.from_sets(1, [0, 1], [2]))
    assert stacked.shape == (6, 2) and np.all(stacked == 1)
    block = explicit_flattening(s, FlatteningAssignment.from_sets(1, [0, 1], [0, 2]))
    assert block.shape == (6, 6)
    expected = np.kron(np.eye(3), np.ones((2, 2)))
    np.testing.assert_array_equal(block, expected)


def test_random_schema_matches_reference_svd():
    s = ChaosSchema((2, 3, 2), ((0, 1), (1, 2)), (0,), (2, 1))
    for cls in PARAMETER_CLASSES:
        for a in enumerate_assignments(s, cls):
            ref = oracles.flattening_norm_sq(s, a.placement)
            assert flattening_norm_sq(s, a).norm_sq_numeric == pytest.approx(ref, rel=1e-9)


def test_oracle_check_examples():
    assert oracle_check(khatri_rao_schema(2, 3, 4)).ok
    psi = ellipsoid_schemas(3, 2)[1]
    rep = oracle_check(psi)
    assert rep.ok and all(r.mode == "upper" and r.formula_sq >= r.explicit_sq - 1e-9 for r in rep.rows)


def test_oracle_zero_weight():
    s = ChaosSchema((3, 3), ((0, 1),), (0,), (1,), (Less(0, 1), Greater(0, 1)))
    rep = oracle_check(s)
    assert rep.ok and all(r.explicit_sq == 0.0 for r in rep.rows)


def test_oracle_catches_corrupted_formula():
    def bad(schema, a, values=None):
        row = flattening_norm_sq(schema, a, values)
        return type(row)(row.assignment, row.split, row.exponents, row.norm_sq_symbolic, row.norm_sq_numeric * 2, False)

    rep = oracle_check(khatri_rao_schema(2, 3, 4), formula=bad)
    assert not rep.ok and len(rep.failures()) == 12


# -- properties ---------------------------------------------------------


def _all_rows(schema):
    return [(a, flattening_norm_sq(schema, a).norm_sq_numeric) for cls in PARAMETER_CLASSES for a in enumerate_assignments(schema, cls)]


@settings(max_examples=40)
@given(schemas())
def test_formula_equals_reference_unweighted(schema):
    for a, formula in _all_rows(schema):
        assert formula == pytest.approx(oracles.flattening_norm_sq(schema, a.placement), rel=1e-9, abs=1e-9)


@settings(max_examples=40)
@given(schemas(weighted=True))
def test_formula_bounds_reference_weighted(schema):
    for a, formula in _all_rows(schema):
        assert formula >= oracles.flattening_norm_sq(schema, a.placement) - 1e-9


@settings(max_examples=100)
@given(schemas())
def test_r_below_sigma_and_v(schema):
    cp = chaos_parameters(schema)
    assert cp.r.numeric <= cp.sigma.numeric * (1 + 1e-12)
    if schema.q:
        assert cp.r.numeric <= cp.v.numeric * (1 + 1e-12)


@given(schemas(), st.randoms(use_true_random=False))
def test_permutation_invariance(schema, rnd):
    perm = list(range(schema.p))
    rnd.shuffle(perm)
    dims = [0] * schema.p
    for u, d in enumerate(schema.dims):
        dims[perm[u]] = d
    move = lambda coord: tuple(perm[u] for u in coord)
    relabeled = ChaosSchema(tuple(dims), tuple(map(move, schema.chaos_coords)), move(schema.row_coord), move(schema.col_coord))
    for a, value in _all_rows(schema):
        assert flattening_norm_sq(relabeled, a).norm_sq_numeric == value


@given(schemas())
def test_transpose_duality(schema):
    swapped = ChaosSchema(schema.dims, schema.chaos_coords, schema.col_coord, schema.row_coord)
    norms = lambda s: sorted(flattening_norm_sq(s, a).norm_sq_numeric for a in enumerate_assignments(s, SIGMA))
    assert norms(schema) == norms(swapped)
    flip = {"R": "C", "C": "R"}
    for a in enumerate_assignments(schema, SIGMA):
        mirrored = FlatteningAssignment(tuple(flip[t] for t in a.placement[:-2]) + ("R", "C"), SIGMA)
        assert flattening_norm_sq(swapped, mirrored).norm_sq_numeric == flattening_norm_sq(schema, a).norm_sq_numeric
