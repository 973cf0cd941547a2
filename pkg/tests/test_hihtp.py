import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fdbbd.hihtp import (HihtpConfig, NumericalDivergence, project_sk, restricted_least_squares,
                         solve, support_of)
from fdbbd.lifting import MeasurementOp, lift
from fdbbd.signals import ParameterError, complex_normal, gen_channel, gen_codebook, gen_sparse_signal


def brute_force_best_energy(W, s, k):
    """Largest energy kept by any support with <= k columns of <= s entries."""
    mu, n = W.shape
    col_best = []
    for j in range(n):
        best = 0.0
        for rows in itertools.combinations(range(mu), min(s, mu)):
            best = max(best, float(np.sum(np.abs(W[list(rows), j]) ** 2)))
        col_best.append(best)
    return max(sum(col_best[j] for j in cols)
               for cols in itertools.combinations(range(n), min(k, n)))


@given(st.integers(1, 4), st.integers(1, 5), st.integers(0, 2**32 - 1), st.data())
def test_projection_matches_brute_force(mu, n, seed, data):
    s = data.draw(st.integers(1, mu))
    k = data.draw(st.integers(1, n))
    W = complex_normal(np.random.default_rng(seed), (mu, n))
    P, mask = project_sk(W, s, k)
    assert np.sum(np.abs(P) ** 2) == pytest.approx(brute_force_best_energy(W, s, k), rel=1e-12)
    assert mask.sum(axis=0).max() <= s
    assert np.count_nonzero(mask.any(axis=0)) <= k


@given(st.integers(2, 6), st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_projection_idempotent(mu, n, seed):
    W = complex_normal(np.random.default_rng(seed), (mu, n))
    P, _ = project_sk(W, 2, 2)
    P2, _ = project_sk(P, 2, 2)
    np.testing.assert_array_equal(P, P2)


def test_projection_tie_break_lowest_index():
    W = np.ones((3, 4))
    _, mask = project_sk(W, 1, 2)
    assert support_of(mask) == {(0, 0), (0, 1)}


def test_projection_keeps_sparse_input():
    W = np.zeros((4, 5))
    W[1, 2], W[3, 2], W[0, 4] = 1, -2, 3
    P, _ = project_sk(W, 2, 2)
    np.testing.assert_array_equal(P, W)


def test_config_validation():
    with pytest.raises(ParameterError):
        HihtpConfig(0, 3)
    with pytest.raises(ParameterError):
        HihtpConfig(2, 3, tol=0)
    with pytest.raises(ParameterError):
        HihtpConfig(2, 3, max_iter=0)


def test_restricted_ls_exact_on_true_support(rng):
    op = MeasurementOp(gen_codebook(40, 60, rng))
    W = np.zeros(op.shape, dtype=complex)
    W[[1, 5], 3] = [1, 2j]
    W[[0, 7], 9] = [-1, 0.5]
    Wh, cond = restricted_least_squares(op, op.apply(W), W != 0)
    np.testing.assert_allclose(Wh, W, atol=1e-10)
    assert np.isfinite(cond)
    Wp, _ = restricted_least_squares(op, op.apply(W), support_of(W != 0))
    np.testing.assert_allclose(Wp, W, atol=1e-10)


def test_restricted_ls_rank_deficient_is_min_norm(rng):
    op = MeasurementOp(gen_codebook(4, 6, rng))
    mask = np.zeros(op.shape, dtype=bool)
    mask[:, :2] = True  # 8 unknowns, 4 equations
    y = complex_normal(rng, 4)
    W, cond = restricted_least_squares(op, y, mask)
    assert cond == np.inf
    np.testing.assert_allclose(op.apply(W), y, atol=1e-10)


def test_zero_measurement(rng):
    op = MeasurementOp(gen_codebook(10, 12, rng))
    res = solve(op, np.zeros(10), HihtpConfig(2, 2))
    assert res.converged and not np.any(res.tensor) and res.residual == 0


def test_wrong_length(rng):
    op = MeasurementOp(gen_codebook(10, 12, rng))
    with pytest.raises(ParameterError):
        solve(op, np.zeros(11), HihtpConfig(2, 2))


def test_divergence_raised(rng):
    op = MeasurementOp(gen_codebook(10, 12, rng))
    y = complex_normal(rng, 10)
    with pytest.raises(NumericalDivergence) as err:
        solve(op, y, HihtpConfig(2, 2, step_size=np.inf))
    assert err.value.iteration == 1


def test_noiseless_recovery_rate():
    hits = 0
    for t in range(30):
        r = np.random.default_rng([5, t])
        op = MeasurementOp(gen_codebook(100, 128, r))
        h = gen_channel(100, 4, r).dense()
        b = gen_sparse_signal(128, 4, rng=r).dense()
        W = lift(h, b)
        res = solve(op, op.apply(W), HihtpConfig(4, 4))
        hits += np.linalg.norm(res.tensor - W) < 1e-6 * np.linalg.norm(W)
    assert hits >= 27


def test_residual_history_recorded(rng):
    op = MeasurementOp(gen_codebook(50, 64, rng))
    W = lift(gen_channel(50, 2, rng).dense(), gen_sparse_signal(64, 2, rng=rng).dense())
    res = solve(op, op.apply(W), HihtpConfig(2, 2))
    assert res.residual_history[0] == pytest.approx(np.linalg.norm(op.apply(W)))
    assert res.residual_history[-1] == pytest.approx(res.residual)
    assert len(res.residual_history) == res.iterations + 1


def test_warm_start_at_solution(rng):
    op = MeasurementOp(gen_codebook(50, 64, rng))
    W = lift(gen_channel(50, 2, rng).dense(), gen_sparse_signal(64, 2, rng=rng).dense())
    res = solve(op, op.apply(W), HihtpConfig(2, 2), W0=W)
    assert res.iterations == 1 and res.converged
