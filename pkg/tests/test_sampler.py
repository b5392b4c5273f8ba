import math
import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from chaosbound.graph import materialize_graph_matrix, wigner_shape, graph_schema
from chaosbound.sampler import (
    CapExceeded,
    CoupledUnsupported,
    DenseChaos,
    Mode,
    NonConvergenceWarning,
    NotSymmetrizable,
    SampleConfig,
    decoupling_ratio,
    draw,
    draw_tables,
    estimate_spectral_norm,
    materialize,
    monte_carlo,
    scaling_fit,
    spectral_norm,
)
from chaosbound.schema import (
    CENTERED_CHISQ1,
    RADEMACHER,
    AllDistinct,
    ChaosSchema,
    DistributionSpec,
    Greater,
    Less,
    khatri_rao_schema,
)
from strategies import schemas


def dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def test_khatri_rao_entries_unrolled():
    s = khatri_rao_schema(2, 2, 2)
    M = dense(materialize(s, Mode.DECOUPLED, seed=4))
    h = draw_tables(s, Mode.DECOUPLED, 4, 0)
    for j1 in range(2):
        for j2 in range(2):
            for k in range(2):
                assert M[j1 * 2 + j2, k] == h[0, j1 * 2 + k] * h[1, j2 * 2 + k]


def test_single_rademacher_coefficient():
    s = ChaosSchema((1,), ((0,),), (), (), distribution=DistributionSpec(RADEMACHER))
    M = dense(materialize(s, seed=9))
    assert M.shape == (1, 1) and abs(M[0, 0]) == 1 and spectral_norm(M) == 1


def test_beta_schema_matches_graph_matrix():
    a = dense(materialize(graph_schema(wigner_shape(), 4), Mode.COUPLED, seed=2))
    b = dense(materialize_graph_matrix(wigner_shape(), 4, seed=2))
    np.testing.assert_array_equal(a, b)


def test_spectral_norm_basics():
    assert spectral_norm(np.eye(5)) == pytest.approx(1.0)
    assert spectral_norm(np.diag([1.0, 2, 3, 4])) == pytest.approx(4.0)
    G = np.random.default_rng(0).standard_normal((40, 60))
    assert spectral_norm(G) == pytest.approx(np.linalg.norm(G, 2), rel=1e-6)


@pytest.mark.parametrize("shape", [(100, 150), (200, 120), (300, 300)])
def test_power_iteration_path(shape):
    G = np.random.default_rng(sum(shape)).standard_normal(shape)
    est = estimate_spectral_norm(G, tol=1e-12, max_iters=5000)
    assert est.iterations > 0
    assert est.value == pytest.approx(np.linalg.norm(G, 2), rel=1e-6)
    S = sp.csr_matrix(G * (np.abs(G) > 1.5))
    assert spectral_norm(S, tol=1e-12, max_iters=5000) == pytest.approx(np.linalg.norm(S.toarray(), 2), rel=1e-6)


def test_nonconvergence_warns():
    G = np.random.default_rng(1).standard_normal((200, 200))
    with pytest.warns(NonConvergenceWarning):
        spectral_norm(G, tol=1e-15, max_iters=3)


@settings(max_examples=200)
@given(st.integers(1, 64), st.integers(1, 64), st.integers(0, 2**31))
def test_spectral_norm_small_random(r, c, seed):
    G = np.random.default_rng(seed).standard_normal((r, c))
    assert spectral_norm(G) == pytest.approx(np.linalg.norm(G, 2), rel=1e-6)


def test_wigner_calibration_band():
    n = 512
    rep = monte_carlo(SampleConfig(graph_schema(wigner_shape(), n), Mode.COUPLED, trials=10, seed=0))
    assert 1.5 <= rep.mean_norm / math.sqrt(n) <= 2.5


def test_zero_coefficients():
    s = ChaosSchema((3, 3), ((0, 1),), (0,), (1,), (Less(0, 1), Greater(0, 1)))
    rep = monte_carlo(SampleConfig(s, trials=4))
    assert rep.mean_norm == 0 and rep.stderr == 0


def test_khatri_rao_band_large():
    s = khatri_rao_schema(2).bind(d=64, n=4096)
    rep = monte_carlo(SampleConfig(s, trials=3, seed=0))
    assert 64 / 8 <= rep.mean_norm <= 64 * 8


def test_determinism_and_workers():
    s = khatri_rao_schema(2).bind(d=6, n=20)
    a = monte_carlo(SampleConfig(s, trials=6, seed=42))
    b = monte_carlo(SampleConfig(s, trials=6, seed=42))
    c = monte_carlo(SampleConfig(s, trials=6, seed=42, workers=3))
    assert a.to_csv() == b.to_csv() == c.to_csv()
    assert a.to_json() == b.to_json()
    assert monte_carlo(SampleConfig(s, trials=6, seed=43)).to_csv() != a.to_csv()


def test_trial_reordering_permutes():
    s = khatri_rao_schema(2).bind(d=4, n=9)
    cfg = SampleConfig(s, trials=5, seed=7)
    fwd = monte_carlo(cfg)
    rev = monte_carlo(cfg, trial_ids=[4, 3, 2, 1, 0])
    assert rev.norms == fwd.norms[::-1]


def test_second_moment_counts_tuples():
    # entry (a, b) = sum_i h1[i, a] h2[i, b]: three independent products
    s = ChaosSchema((3, 2, 2), ((0, 1), (0, 2)), (1,), (2,))
    trials = 600
    sq = np.array([dense(materialize(s, Mode.DECOUPLED, seed=5, trial=t)) ** 2 for t in range(trials)])
    mean, se = sq.mean(axis=0), sq.std(axis=0, ddof=1) / math.sqrt(trials)
    assert np.all(np.abs(mean - 3.0) <= 3 * se)


def test_chisq_unit_variance():
    x = draw(DistributionSpec(CENTERED_CHISQ1), 200_000, np.random.default_rng(0), unit_variance=True)
    assert x.var() == pytest.approx(1.0, rel=0.03)
    y = draw(DistributionSpec(CENTERED_CHISQ1), 200_000, np.random.default_rng(0))
    assert y.var() == pytest.approx(2.0, rel=0.03)


def test_caps_and_coupling_guard():
    with pytest.raises(CapExceeded):
        materialize(khatri_rao_schema(2).bind(d=400, n=160_000))
    with pytest.raises(CapExceeded):
        materialize(khatri_rao_schema(2).bind(d=8, n=64), max_entries=100, sparse=False)
    uneven = ChaosSchema((3, 4), ((0,), (1,)), (0,), (1,))
    with pytest.raises(CoupledUnsupported):
        materialize(uneven, Mode.COUPLED)


def test_scaling_fit_exact_power():
    fit = scaling_fit([(n, n**0.5) for n in (4, 16, 64, 256)])
    assert fit.slope == pytest.approx(0.5) and fit.slope_stderr == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        scaling_fit([(1, 1.0), (2, 2.0)])
    with pytest.raises(ValueError):
        scaling_fit([(4, 1.0), (2, 2.0), (8, 3.0)])


def test_decoupling_symmetrized_wigner_type():
    s = ChaosSchema(("m", "m"), ((0,), (1,)), (0,), (1,), (AllDistinct((0, 1)),))
    ratio = decoupling_ratio(s, {"m": 64}, trials=10, seed=1)
    assert 1 / 16 <= ratio <= 16


def test_decoupling_order_one_exact():
    assert decoupling_ratio(khatri_rao_schema(1), {"d": 3, "n": 4}, trials=5) == 1.0


def test_decoupling_antisymmetric():
    A = np.zeros((2, 2, 1, 1))
    A[0, 1], A[1, 0] = 1.0, -1.0
    chaos = DenseChaos(A, 2)
    h = np.array([0.3, -1.2])
    assert np.all(chaos.realize([h, h]) == 0)
    with pytest.raises(NotSymmetrizable, match="not symmetric"):
        decoupling_ratio(chaos, symmetrize=False)
    with pytest.raises(NotSymmetrizable, match="vanish"):
        decoupling_ratio(chaos, symmetrize=True)


@settings(max_examples=30)
@given(schemas(max_dim=3))
def test_materialize_matches_direct_sum(schema):
    M = dense(materialize(schema, Mode.DECOUPLED, seed=3))
    tables = draw_tables(schema, Mode.DECOUPLED, 3, 0)
    dims = schema.numeric_dims

    def key(t, s):
        coord = schema.chaos_coords[t]
        return int(np.ravel_multi_index([s[u] for u in coord], [dims[u] for u in coord]))

    ref = oracles.dense_chaos_matrix(schema, list(tables), key)
    np.testing.assert_allclose(M, ref, rtol=1e-12, atol=1e-12)
