import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from balweights.balancing import (
    BalancingProblem,
    att_balancing_weights,
    build_balancing_problem,
    imbalance_norm,
    project_simplex,
    solve_balancing_weights,
)
from balweights.data import Dataset, Estimand, Method, WeightVector
from balweights.errors import EstimationError
from balweights.estimation import weighted_effect
from balweights.simulation import generate, rep_rng

from conftest import grid_simplex


def grid_oracle(p, resolution):
    W = grid_simplex(resolution, p.m)
    R = W @ p.control_covariates - p.target
    f = np.einsum("ij,ij->i", R, R) + p.lam * np.einsum("ij,ij->i", W, W)
    i = int(np.argmin(f))
    return W[i], f[i]


def test_symmetric_controls_get_equal_weights():
    for lam in (0.0, 1e-4, 1.0, 100.0):
        sol = solve_balancing_weights(BalancingProblem([0.0], [[-1.0], [1.0]], lam=lam))
        np.testing.assert_allclose(sol.control_weights, [0.5, 0.5], atol=1e-10)


def test_exact_balance_on_the_one_simplex_matches_grid_search():
    p = BalancingProblem([0.5], [[0.0], [1.0]], lam=0.0)
    sol = solve_balancing_weights(p)
    w_grid, f_grid = grid_oracle(p, 1e-4)
    np.testing.assert_allclose(w_grid, [0.5, 0.5])
    np.testing.assert_allclose(sol.control_weights, [0.5, 0.5], atol=1e-10)
    assert sol.imbalance_norm <= 1e-10
    assert sol.objective <= f_grid + 1e-12


def test_three_controls_match_two_simplex_grid_search():
    p = BalancingProblem([0.4, 0.4], [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], lam=0.01)
    sol = solve_balancing_weights(p)
    w_grid, f_grid = grid_oracle(p, 1e-3)
    assert np.max(np.abs(sol.control_weights - w_grid)) <= 2e-3
    assert sol.objective <= f_grid + 1e-12
    assert sol.converged and sol.kkt_residual <= 1e-10
    # closed form by symmetry: w2 = w3 = a with 4.12 a = 1.64
    a = 1.64 / 4.12
    np.testing.assert_allclose(sol.control_weights, [1 - 2 * a, a, a], atol=1e-10)


def test_solution_invariants():
    p = BalancingProblem([0.4, 0.4], [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], lam=0.01)
    sol = solve_balancing_weights(p)
    w = sol.control_weights
    assert np.all(w >= -1e-12) and abs(w.sum() - 1) <= 1e-8
    assert sol.objective == pytest.approx(sol.imbalance_norm**2 + p.lam * (w @ w), abs=1e-14)


def test_single_control_gets_all_weight():
    sol = solve_balancing_weights(BalancingProblem([3.0], [[1.0]], lam=0.1))
    np.testing.assert_array_equal(sol.control_weights, [1.0])
    assert sol.imbalance_norm == pytest.approx(2.0)


def test_problem_validation():
    with pytest.raises(EstimationError) as exc:
        BalancingProblem([0.0, 0.0], [[1.0]])
    assert exc.value.code == "DIMENSION_MISMATCH"
    with pytest.raises(EstimationError) as exc:
        BalancingProblem([0.0], [[1.0]], lam=-1.0)
    assert exc.value.code == "INVALID_LAMBDA"


def test_build_problem_one_covariate():
    d = Dataset([[2.0], [2.0], [0.0], [4.0]], [1, 1, 0, 0])
    p = build_balancing_problem(d)
    assert (p.m, p.k) == (2, 1)
    # pooled SD = sqrt((0 + 8) / 2) = 2, overall mean 2
    np.testing.assert_allclose(p.target, [0.0])
    np.testing.assert_allclose(p.control_covariates.ravel(), [-1.0, 1.0])


def test_constant_column_is_dropped_and_recorded():
    d = Dataset([[1.0, 5.0], [2.0, 5.0], [0.0, 5.0], [4.0, 5.0]], [1, 1, 0, 0])
    assert build_balancing_problem(d).k == 1
    w = att_balancing_weights(d)
    assert w.solver_report["dropped_covariates"] == ["x2"]


def test_dgp1_problem_shape():
    d = generate("1", 1000, 100.0, rep_rng(0, 0))
    p = build_balancing_problem(d)
    assert p.k == 6 and p.m == d.n_control


def test_identical_arms_give_uniform_weights_at_zero_lambda():
    rows = [[0.0, 1.0], [1.0, -1.0], [2.0, 0.5]]
    d = Dataset(rows + rows, [1, 1, 1, 0, 0, 0])
    w = att_balancing_weights(d, lam=0.0)
    np.testing.assert_allclose(w.weights[d.control], 1 / 3, atol=1e-8)
    assert w.method is Method.BALANCING and w.estimand is Estimand.ATT


def test_huge_lambda_gives_uniform_weights(dgp1_draw):
    w = att_balancing_weights(dgp1_draw, lam=1e6)
    np.testing.assert_allclose(w.weights[dgp1_draw.control], 1 / dgp1_draw.n_control, atol=1e-4)


def test_dgp1_weak_overlap_balance(dgp1_draw):
    w = att_balancing_weights(dgp1_draw)
    assert w.converged
    np.testing.assert_allclose(w.weights[dgp1_draw.treated], 1 / dgp1_draw.n_treated)
    assert abs(w.weights[dgp1_draw.control].sum() - 1) <= 1e-8
    p = build_balancing_problem(dgp1_draw)
    gap = p.control_covariates.T @ w.weights[dgp1_draw.control] - p.target
    assert np.max(np.abs(gap)) <= 0.05


def test_imbalance_norm_examples():
    rows = [[0.0], [1.0], [3.0]]
    same = Dataset(rows + rows, [1, 1, 1, 0, 0, 0])
    assert imbalance_norm(same, WeightVector([1.0, 2.0, 3.0] * 2, "ATT", "IPW")) == pytest.approx(0.0, abs=1e-15)

    d = Dataset([[1.0, 0.0], [3.0, 1.0], [0.0, 2.0], [1.0, 5.0], [2.0, 0.0]], [1, 1, 0, 0, 0])
    p = build_balancing_problem(d)
    raw = p.target - p.control_covariates.mean(axis=0)
    assert imbalance_norm(d, WeightVector(np.ones(5), "ATT", "IPW")) == pytest.approx(np.linalg.norm(raw))

    w = att_balancing_weights(d, lam=0.01)
    assert imbalance_norm(d, w) == pytest.approx(w.solver_report["imbalance_norm"], abs=1e-10)


def test_imbalance_norm_zero_weight_sum():
    d = Dataset([[0.0], [1.0], [2.0]], [1, 0, 0])
    with pytest.raises(EstimationError) as exc:
        imbalance_norm(d, WeightVector([1.0, 0.0, 0.0], "ATT", "IPW"))
    assert exc.value.code == "ZERO_WEIGHT_SUM"


def test_trace_is_monotone(dgp1_draw):
    w = att_balancing_weights(dgp1_draw, lam=1e-2, trace=True)
    objs = np.array([row[1] for row in w.solver_report["trace"]])
    assert np.all(np.diff(objs) <= 1e-15)


def test_cold_apg_trace_is_monotone():
    # lam=0 skips the dual warm start, so this exercises the accelerated phase alone
    rng = np.random.default_rng(4)
    p = BalancingProblem(rng.normal(size=3) * 0.2, rng.normal(size=(40, 3)), lam=0.0, max_iter=3000)
    sol = solve_balancing_weights(p, trace=True)
    objs = np.array([row[1] for row in sol.trace])
    assert len(objs) > 10
    assert np.all(np.diff(objs) <= 1e-15)


def test_lambda_path_is_monotone():
    d = generate("1", 300, 20.0, rep_rng(9, 0))
    sumsq, imb = [], []
    for lam in (0.0, 0.01, 0.1, 1.0, 10.0):
        w = att_balancing_weights(d, lam=lam, max_iter=50_000)
        c = w.weights[d.control]
        sumsq.append(c @ c)
        imb.append(w.solver_report["imbalance_norm"])
    assert np.all(np.diff(sumsq) <= 1e-9)
    assert np.all(np.diff(imb) >= -1e-9)


def test_constant_effect_recovered_under_exact_balance():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(200, 2))
    z = (rng.uniform(size=200) < 0.4).astype(int)
    y = X @ np.array([1.5, -2.0]) + 3.0 + 5.0 * z
    d = Dataset(X, z, y)
    w = att_balancing_weights(d, lam=0.0)
    assert w.solver_report["imbalance_norm"] <= 1e-8
    assert weighted_effect(d, w).point == pytest.approx(5.0, abs=1e-7)


def test_solver_is_deterministic(dgp1_draw):
    a = att_balancing_weights(dgp1_draw).weights
    b = att_balancing_weights(dgp1_draw).weights
    np.testing.assert_array_equal(a, b)


@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-1e3, 1e3)))
def test_projection_lands_on_simplex_and_is_idempotent(y):
    x = project_simplex(y)
    assert np.all(x >= 0) and abs(x.sum() - 1) <= 1e-9
    np.testing.assert_allclose(project_simplex(x), x, atol=1e-12)


@given(arrays(np.float64, 3, elements=st.floats(-5, 5)))
def test_projection_is_nearest_simplex_point(y):
    x = project_simplex(y)
    grid = grid_simplex(0.02, 3)
    best = np.min(np.sum((grid - y) ** 2, axis=1))
    assert np.sum((x - y) ** 2) <= best + 1e-12


@settings(max_examples=60, deadline=None)
@given(
    st.integers(2, 3),
    st.integers(1, 2),
    st.sampled_from([0.0, 0.01, 0.1, 1.0]),
    st.integers(0, 2**31 - 1),
)
def test_small_problems_beat_grid_search(m, k, lam, seed):
    rng = np.random.default_rng(seed)
    p = BalancingProblem(rng.normal(size=k), rng.normal(size=(m, k)), lam=lam)
    sol = solve_balancing_weights(p)
    _, f_grid = grid_oracle(p, 1e-3)
    assert sol.objective <= f_grid + 1e-6
    if sol.converged:
        assert sol.kkt_residual <= 1e-8
