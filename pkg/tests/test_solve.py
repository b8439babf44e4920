import math

import mpmath
import numpy as np
import pytest

from proxkit import oracle
from proxkit.core import BlockOperator, LinearOperator, diag, identity
from proxkit.errors import ConfigError, DomainError, ReferenceValueError
from proxkit.problems import build_lasso
from proxkit.prox import (Ball, Box, Halfspace, Indicator, L1, NonnegOrthant, Product,
                          Singleton, Support, WholeSpace, Zero)
from proxkit.smooth import LeastSquares, ZeroSmooth
from proxkit.solve import (InertialState, SolverConfig, StepSchedule, block_forward_backward,
                           dual_forward_backward, fista, fixed_point_residual,
                           forward_backward, projected_gradient, rate_diagnostics)

LASSO_X = np.array([0.0, 0.75])
LASSO_MU = 1.375


def lasso():
    return build_lasso(diag([1, 2]), [1, 2])


def test_lasso_oracle_values():
    x = oracle.subgradient_solve_separable_l1([1, 2], [1, 2])
    np.testing.assert_allclose(x, LASSO_X)
    f, g = lasso()
    assert f.value(x) + g.value(x) == pytest.approx(LASSO_MU)


# -- schedules ----------------------------------------------------------------

def test_auto_schedule():
    s = StepSchedule.auto(4.0)
    assert s.gamma(0) == 0.25 and s.epsilon == pytest.approx(0.025)
    assert s.interval == pytest.approx((0.025, 0.475))


def test_constant_outside_interval_cites_interval():
    with pytest.raises(ConfigError, match=r"\[epsilon, 2/beta - epsilon\]"):
        StepSchedule.constant(0.75, 4.0)
    with pytest.raises(ConfigError):
        StepSchedule(4.0, 0.3, "constant", (0.25,))  # epsilon >= 1/beta


def test_cyclic_and_harmonic_stay_in_interval():
    c = StepSchedule.cyclic([0.1, 0.4], 4.0)
    assert [c.gamma(n) for n in range(4)] == [0.1, 0.4, 0.1, 0.4]
    h = StepSchedule.harmonic(4.0)
    lo, hi = h.interval
    gammas = [h.gamma(n) for n in range(200)]
    assert all(lo <= g <= hi for g in gammas)
    assert gammas[0] == hi and gammas[-1] == pytest.approx(0.25, rel=1e-2)
    with pytest.raises(ConfigError):
        StepSchedule.cyclic([0.1, 0.6], 4.0)


def test_schedule_beta_below_lipschitz_rejected():
    f, g = lasso()
    with pytest.raises(ConfigError):
        forward_backward(f, g, [0, 0], SolverConfig(StepSchedule.constant(0.5, 2.0)))


def test_solver_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(max_iter=0)
    with pytest.raises(ConfigError):
        SolverConfig(tol=0)


# -- forward-backward ---------------------------------------------------------

def test_degenerate_gradient_descent_example():
    y = np.array([1.0, -2.0])
    r = forward_backward(Zero(2), LeastSquares(identity(2), y), [5, 5],
                         SolverConfig(StepSchedule.constant(1.0, 1.0), max_iter=1))
    np.testing.assert_array_equal(r.iterate(1), y)


def test_degenerate_proximal_point_example():
    r = forward_backward(L1(1), ZeroSmooth(1), [0.4],
                         SolverConfig(StepSchedule.constant(1.0, 1.0), max_iter=1))
    np.testing.assert_array_equal(r.iterate(1), [0.0])


def test_lasso_converges_with_invariants():
    f, g = lasso()
    r = forward_backward(f, g, [5, 5], SolverConfig(max_iter=500, tol=1e-9))
    assert r.converged
    np.testing.assert_allclose(r.final_point, LASSO_X, atol=1e-7)
    assert r.is_monotone()
    dists = [np.linalg.norm(x - LASSO_X) for _, x in r.iterates_kept]
    assert all(b <= a * (1 + 1e-10) for a, b in zip(dists, dists[1:]))
    assert fixed_point_residual(f, g, r.final_point, 1 / g.beta) <= 10 * 1e-9
    assert np.linalg.norm(g.grad(r.final_point) - g.grad(LASSO_X)) <= 1e-6


def test_summable_displacement_bound():
    f, g = lasso()
    sched = StepSchedule.constant(0.4, g.beta)
    r = forward_backward(f, g, [5, 5], SolverConfig(sched, max_iter=500, tol=1e-12))
    phi0 = r.objective_values()[0]
    total = np.sum(np.square(r.displacement))
    assert total <= 4 * (phi0 - LASSO_MU) / (sched.epsilon * g.beta ** 2) * (1 + 1e-6)


def test_variable_steps_converge():
    f, g = lasso()
    for sched in (StepSchedule.cyclic([0.05, 0.45, 0.3], g.beta), StepSchedule.harmonic(g.beta)):
        r = forward_backward(f, g, [5, 5], SolverConfig(sched, max_iter=2000, tol=1e-10))
        np.testing.assert_allclose(r.final_point, LASSO_X, atol=1e-7)
        assert r.is_monotone()


def test_infeasible_start_is_domain_error():
    with pytest.raises(DomainError):
        forward_backward(Indicator(Box([0], [1])), LeastSquares(identity(1), [0]), [2])


def test_trace_every_keeps_last():
    f, g = lasso()
    r = forward_backward(f, g, [5, 5], SolverConfig(max_iter=23, tol=1e-300, trace_every=5))
    assert [n for n, _ in r.objective_trace] == [0, 5, 10, 15, 20, 23]
    assert len(r.step_trace) == len(r.displacement) == 23


def test_max_iter_termination():
    f, g = lasso()
    r = forward_backward(f, g, [5, 5], SolverConfig(max_iter=3))
    assert r.termination == "max_iter" and r.iterations == 3


# -- projected gradient ---------------------------------------------------------

def test_projected_gradient_examples():
    y = np.array([2.0, 0.5])
    r = projected_gradient(Box([0, 0], [1, 1]), LeastSquares(identity(2), y), [0, 0],
                           SolverConfig(StepSchedule.constant(1.0, 1.0)))
    np.testing.assert_allclose(r.final_point, np.clip(y, 0, 1))
    r = projected_gradient(Ball([0, 0], 1), LeastSquares(identity(2), [3, 4]), [0, 0])
    np.testing.assert_allclose(r.final_point, [0.6, 0.8], atol=1e-8)
    with pytest.raises(DomainError):
        projected_gradient(Ball([0, 0], 1), LeastSquares(identity(2), [3, 4]), [2, 0])


def test_projected_gradient_whole_space_is_gradient_descent():
    L = LinearOperator([[1, 2], [0, 1], [1, 1]])
    g = LeastSquares(L, [1, 0, 2])
    cfg = SolverConfig(max_iter=50, tol=1e-300)
    r = projected_gradient(WholeSpace(2), g, [3, -1], cfg)
    x = np.array([3.0, -1.0])
    gamma = 1 / g.beta
    for n in range(1, 51):
        x = x - gamma * g.grad(x)
        np.testing.assert_array_equal(r.iterate(n), x)


# -- FISTA ------------------------------------------------------------------------

def test_t_sequence_against_high_precision():
    mpmath.mp.dps = 50
    t = mpmath.mpf(1)
    expected = [t]
    for _ in range(10):
        t = (1 + mpmath.sqrt(4 * t * t + 1)) / 2
        expected.append(t)
    state = InertialState(1.0, np.zeros(1), np.zeros(1))
    got = [state.t]
    for _ in range(10):
        state = state.advance(np.zeros(1))
        got.append(state.t)
    for a, b in zip(got, expected):
        assert a == pytest.approx(float(b), rel=1e-15)
    # frozen from the 50-digit run above
    assert got[1] == pytest.approx(1.618033988749895, rel=1e-15)
    assert got[2] == pytest.approx(2.193527085331054, rel=1e-15)


def test_fista_trivial_terms_keep_start():
    r = fista(Zero(2), ZeroSmooth(2), [1, 2], SolverConfig(max_iter=5, tol=1e-300))
    for _, x in r.iterates_kept:
        np.testing.assert_array_equal(x, [1, 2])
    assert len(r.extras["t"]) == r.iterations + 1


def test_fista_lasso_same_limit():
    f, g = lasso()
    r = fista(f, g, [5, 5], SolverConfig(max_iter=500, tol=1e-12))
    np.testing.assert_allclose(r.final_point, LASSO_X, atol=1e-9)


def test_fista_rate_on_random_lasso():
    rng = np.random.default_rng(21)
    L = LinearOperator(rng.normal(size=(8, 5)))
    y = rng.normal(size=8)
    f, g = build_lasso(L, y)
    ref = fista(f, g, np.zeros(5), SolverConfig(max_iter=20000, tol=1e-15))
    mu = ref.objective_values().min()
    r = fista(f, g, np.zeros(5), SolverConfig(max_iter=300, tol=1e-300))
    d = rate_diagnostics(r, mu)
    # O(1/n^2) bound 2 beta ||x0 - x*||^2 for the t_0 = 1 recursion
    bound = 2 * g.beta * np.sum(ref.final_point ** 2)
    assert np.all(d.n2_gap[1:] <= bound * (1 + 1e-9) + 1e-9)


# -- dual --------------------------------------------------------------------------

def test_dual_unconstrained_degeneration():
    z = np.array([3.0, -1.0])
    x, v, _ = dual_forward_backward(L1(2), Indicator(WholeSpace(2)), identity(2), z, [0, 0])
    np.testing.assert_array_equal(v, [0, 0])
    np.testing.assert_allclose(x, L1(2).prox(1.0, z))


def test_dual_best_approximation_instance():
    x, v, r = dual_forward_backward(Indicator(WholeSpace(2)), Indicator(Halfspace([1, 0], 0)),
                                    identity(2), [1, 1], [0, 0])
    np.testing.assert_allclose(x, [0, 1], atol=1e-8)
    np.testing.assert_allclose(x, WholeSpace(2).project(np.array([1, 1]) - v), atol=1e-12)
    assert r.is_monotone()


def test_dual_support_small_ball_fixed_point():
    L = LinearOperator([[1, -1, 0], [0, 1, -1]])
    z = np.array([1.0, 3.0, 2.0])
    x, v, r = dual_forward_backward(Indicator(NonnegOrthant(3)), Support(Ball([0, 0], 0.2)), L,
                                    z, [0, 0], cfg=SolverConfig(max_iter=5000, tol=1e-12))
    np.testing.assert_allclose(x, NonnegOrthant(3).project(z - L.adjoint(v)), atol=1e-8)
    # primal objective beats nearby points
    obj = lambda u: 0.2 * np.linalg.norm(L.apply(u)) + 0.5 * np.sum((u - z) ** 2)
    rng = np.random.default_rng(0)
    for _ in range(200):
        u = np.maximum(x + rng.normal(scale=0.05, size=3), 0)
        assert obj(x) <= obj(u) + 1e-8


def test_dual_infeasible_v0():
    with pytest.raises(DomainError):
        dual_forward_backward(Zero(1), Indicator(WholeSpace(1)), identity(1), [1], [0], v0=[1])


# -- block -----------------------------------------------------------------------

def test_block_single_block_is_forward_backward():
    f, g = lasso()
    L = BlockOperator([[identity(2)]])
    cfg = SolverConfig(StepSchedule.constant(0.2, g.beta), max_iter=40, tol=1e-300)
    rb = block_forward_backward([f], [g], L, [np.array([5.0, 5.0])], cfg)
    rs = forward_backward(f, g, [5, 5], cfg)
    for (_, a), (_, b) in zip(rb.iterates_kept, rs.iterates_kept):
        np.testing.assert_allclose(a, b, atol=1e-14)


def test_block_zero_row_rejected():
    L = BlockOperator([[None, None]], row_dims=[1], col_dims=[1, 1])
    with pytest.raises(ConfigError):
        block_forward_backward([Zero(1), Zero(1)], [LeastSquares(identity(1), [0])], L,
                               [[0], [0]])


def test_block_grid_mismatch():
    L = BlockOperator([[identity(1), identity(1)]])
    with pytest.raises(ConfigError):
        block_forward_backward([Zero(1)], [LeastSquares(identity(1), [0])], L, [[0]])


def test_block_default_beta_formula():
    L = BlockOperator([[identity(2), 2 * np.eye(2)], [None, np.eye(2)]])
    h = [LeastSquares(identity(2), [0, 0]), LeastSquares(identity(2), [0, 0])]
    r = block_forward_backward([Zero(2), Zero(2)], h, L, [[1, 1], [1, 1]],
                               SolverConfig(max_iter=2))
    # p * max_k tau_k sum_i ||L_ki||^2 = 2 * max(1 + 4, 1)
    assert r.schedule.beta == pytest.approx(10)


# -- rate diagnostics ----------------------------------------------------------------

def test_rate_diagnostics_reference_error():
    f, g = lasso()
    r = forward_backward(f, g, [5, 5], SolverConfig(max_iter=5))
    with pytest.raises(ReferenceValueError):
        rate_diagnostics(r, LASSO_MU + 1.0)


def test_rate_diagnostics_optimal_start():
    f, g = lasso()
    r = forward_backward(f, g, LASSO_X, SolverConfig(max_iter=5))
    d = rate_diagnostics(r, LASSO_MU)
    assert np.all(d.gap == 0)


def test_rate_diagnostics_converged_run():
    f, g = lasso()
    r = forward_backward(f, g, [5, 5], SolverConfig(max_iter=500, tol=1e-7))
    d = rate_diagnostics(r, LASSO_MU)
    assert d.n_gap_tail_decreasing
    assert d.n_gap_tail_max < d.n_gap_first_quartile
    assert d.gap[-1] <= 1e-7
