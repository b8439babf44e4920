import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from proxkit.core import (BlockOperator, LinearOperator, adjoint_apply, apply, as_vector,
                          compose, diag, hstack, identity, operator_norm, power_iteration,
                          scaled, split, sum_operator, vstack)
from proxkit.errors import ConfigError, InputError, ZeroOperatorError

A3x2 = [[1, 2], [0, 1], [1, 0]]


def test_apply_examples():
    np.testing.assert_array_equal(apply(identity(2), [3, -1]), [3, -1])
    np.testing.assert_array_equal(apply(diag([3, 1]), [1, 1]), [3, 1])
    np.testing.assert_array_equal(apply(LinearOperator(A3x2), [1, 1]), [3, 1, 1])


def test_adjoint_examples():
    np.testing.assert_array_equal(adjoint_apply(LinearOperator(A3x2), [1, 0, 0]), [1, 2])
    np.testing.assert_array_equal(adjoint_apply(identity(3), [1, 2, 3]), [1, 2, 3])


def test_dimension_mismatch_is_input_error():
    with pytest.raises(InputError):
        apply(identity(2), [1, 2, 3])
    with pytest.raises(InputError):
        adjoint_apply(LinearOperator(A3x2), [1, 2])


def test_vectors_must_be_finite():
    with pytest.raises(InputError):
        as_vector([1.0, np.nan])
    with pytest.raises(InputError):
        as_vector([np.inf])


def test_degenerate_operator_rejected():
    with pytest.raises(InputError):
        LinearOperator(np.zeros((0, 3)))


def test_operator_norm_examples():
    assert operator_norm(diag([3, 1])) == pytest.approx(3, rel=1e-12)
    assert operator_norm(identity(5)) == pytest.approx(1, rel=1e-12)
    # sigma^2 = (3 + sqrt 5)/2 from the characteristic polynomial of L^T L
    golden = np.sqrt((3 + np.sqrt(5)) / 2)
    assert abs(golden - 1.618034) < 1e-6
    assert operator_norm(LinearOperator([[1, 1], [0, 1]])) == pytest.approx(golden, rel=1e-8)


def test_operator_norm_matches_svd_on_random_dense():
    rng = np.random.default_rng(3)
    for _ in range(20):
        M = rng.normal(size=(rng.integers(1, 6), rng.integers(1, 6)))
        assert operator_norm(LinearOperator(M)) == pytest.approx(
            np.linalg.svd(M, compute_uv=False)[0], rel=1e-8)


def test_power_iteration_on_diagonals():
    rng = np.random.default_rng(11)
    for _ in range(10):
        d = rng.uniform(-5, 5, size=6)
        sigma, converged = power_iteration(np.diag(d))
        assert converged
        assert sigma == pytest.approx(np.max(np.abs(d)), rel=1e-6)


def test_power_iteration_start_orthogonal_to_top_space():
    # the all-ones start is orthogonal to the top singular vector (1, -1)
    M = np.array([[1.0, -1.0], [0.0, 0.0]]) + np.diag([0.0, 0.1])
    sigma, _ = power_iteration(M)
    assert sigma == pytest.approx(np.linalg.svd(M, compute_uv=False)[0], rel=1e-6)


def test_zero_operator_norm_error():
    with pytest.raises(ZeroOperatorError):
        operator_norm(LinearOperator(np.zeros((2, 2))))


def test_norm_is_cached():
    L = LinearOperator([[1, 1], [0, 1]])
    assert L.cached_norm is None
    first = operator_norm(L)
    assert L.cached_norm == first
    assert operator_norm(L) == first


def test_unconverged_norm_is_inflated_and_flagged():
    M = np.random.default_rng(0).normal(size=(8, 8))
    L = LinearOperator(M)
    est = operator_norm(L, tol=1e-15, max_iter=2)
    assert not L.norm_converged
    assert est >= np.linalg.svd(M, compute_uv=False)[0]


def test_concurrent_norm_estimates_agree():
    L = LinearOperator(np.random.default_rng(5).normal(size=(30, 20)))
    out = []
    threads = [threading.Thread(target=lambda: out.append(operator_norm(L))) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(out)) == 1


def test_sum_operator():
    S = sum_operator(2, 1)
    np.testing.assert_array_equal(S.apply([3, 4]), [7])
    assert sum_operator(3, 1).cached_norm == pytest.approx(np.sqrt(3))
    np.testing.assert_array_equal(sum_operator(1, 3).matrix, np.eye(3))
    np.testing.assert_array_equal(sum_operator(3, 2).adjoint([1, 2]), [1, 2, 1, 2, 1, 2])
    M = sum_operator(4, 3).matrix
    assert np.linalg.svd(M, compute_uv=False)[0] == pytest.approx(2.0)


def test_builders():
    A = LinearOperator(A3x2)
    B = LinearOperator([[1, 0], [0, 1]])
    np.testing.assert_array_equal(compose(A, B).matrix, A.matrix)
    np.testing.assert_array_equal(scaled(B, 3).matrix, 3 * np.eye(2))
    assert hstack([B, B]).shape == (2, 4)
    assert vstack([A, B]).shape == (5, 2)
    with pytest.raises(InputError):
        compose(B, A)


def test_block_operator():
    L = BlockOperator([[np.eye(2), None], [np.ones((1, 2)), 2 * np.ones((1, 3))]])
    assert (L.p, L.m) == (2, 2)
    assert L.row_dims == (2, 1) and L.col_dims == (2, 3)
    xs = [np.array([1.0, 2.0]), np.array([1.0, 0.0, -1.0])]
    out = L.apply(xs)
    np.testing.assert_allclose(out[0], [1, 2])
    np.testing.assert_allclose(out[1], [3])
    dense = L.to_dense()
    np.testing.assert_allclose(dense.apply(np.concatenate(xs)), np.concatenate(out))
    us = [np.array([1.0, -1.0]), np.array([2.0])]
    np.testing.assert_allclose(np.concatenate(L.adjoint(us)), dense.adjoint(np.concatenate(us)))
    assert split(np.arange(5.0), [2, 3])[1].tolist() == [2, 3, 4]


def test_block_operator_shape_errors():
    with pytest.raises(ConfigError):
        BlockOperator([[np.eye(2), np.eye(3)]])
    with pytest.raises(ConfigError):
        BlockOperator([[None, np.eye(2)]])


def test_operators_are_read_only():
    L = LinearOperator([[1.0, 2.0]])
    with pytest.raises(ValueError):
        L.matrix[0, 0] = 5


matrices = st.integers(1, 5).flatmap(
    lambda r: st.integers(1, 5).flatmap(
        lambda c: arrays(float, (r, c), elements=st.floats(-10, 10))))


@settings(max_examples=100, deadline=None)
@given(matrices, st.integers(0, 2**32 - 1))
def test_adjoint_identity_property(M, seed):
    rng = np.random.default_rng(seed)
    L = LinearOperator(M)
    x = rng.normal(size=L.cols)
    u = rng.normal(size=L.rows)
    lhs = L.apply(x) @ u
    rhs = x @ L.adjoint(u)
    assert abs(lhs - rhs) <= 1e-10 * (1 + np.linalg.norm(x) * np.linalg.norm(u)) * (1 + np.abs(M).max())


@settings(max_examples=100, deadline=None)
@given(matrices, st.integers(0, 2**32 - 1))
def test_norm_upper_bound_property(M, seed):
    L = LinearOperator(M)
    if L.is_zero():
        return
    sigma = L.norm_bound()
    x = np.random.default_rng(seed).normal(size=L.cols)
    assert np.linalg.norm(L.apply(x)) <= sigma * np.linalg.norm(x) * (1 + 1e-8)


def test_power_iteration_extreme_scales():
    for s in (1e-150, 1e150):
        M = s * np.array([[3.0, 0.0, 1.0], [1.0, 2.0, 0.0]])
        sigma, converged = power_iteration(M)
        assert converged
        assert sigma == pytest.approx(np.linalg.svd(M, compute_uv=False)[0], rel=1e-8)
