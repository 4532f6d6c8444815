import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balweights.data import Dataset, Estimand, Method
from balweights.diagnostics import standardized_differences
from balweights.errors import BalweightsError, DataError, RankDeficientError, SeparationError
from balweights.propensity import (
    LogisticModel,
    design_matrix,
    fit_logistic,
    log_likelihood,
    model_weights,
    predict_propensity,
    propensity_weights,
    score,
)
from balweights.simulation import generate, rep_rng


def irls_oracle(X, z, iters=60):
    """Plain IRLS as repeated weighted least squares, written independently."""
    A = np.column_stack([np.ones(len(z)), X])
    beta = np.zeros(A.shape[1])
    for _ in range(iters):
        eta = A @ beta
        mu = 1.0 / (1.0 + np.exp(-eta))
        s = mu * (1.0 - mu)
        working = eta + (z - mu) / s
        sw = np.sqrt(s)
        beta = np.linalg.lstsq(A * sw[:, None], working * sw, rcond=None)[0]
    return beta


def test_separated_symmetric_design_raises_with_zero_intercept():
    X = np.repeat([-1.0, 1.0], 50)[:, None]
    z = np.repeat([0, 1], 50)
    with pytest.raises(SeparationError) as exc:
        fit_logistic(Dataset(X, z))
    assert exc.value.code == "SEPARATION_DETECTED"
    coef = exc.value.coefficients
    assert abs(coef[0]) < 1e-6
    assert coef[1] > 10


def test_coin_flip_treatment_matches_oracle_and_has_small_slopes():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(1000, 3))
    z = rng.integers(0, 2, 1000)
    m = fit_logistic(Dataset(X, z))
    assert m.converged and m.final_gradient_norm <= 1e-8
    oracle = irls_oracle(X, z)
    np.testing.assert_allclose(m.coefficients, oracle, atol=1e-9)
    # slope standard errors from the observed information
    A = design_matrix(X)
    mu = 1.0 / (1.0 + np.exp(-A @ m.coefficients))
    se = np.sqrt(np.diag(np.linalg.inv(A.T @ (A * (mu * (1 - mu))[:, None]))))
    assert np.all(np.abs(m.slopes) < 3 * se[1:])


def test_dgp2_large_sample_recovers_negated_generating_index():
    gamma = 2.0
    truth = np.array([0.1, 0.5, 0.3, 0.3, -0.2, -0.25, -0.25]) * np.r_[1.0, np.full(6, gamma)]
    # A single n=10000 fit has SE ~0.05 per coefficient, so average ten draws.
    fits = [fit_logistic(generate("2", 10_000, gamma, rep_rng(5, r))).coefficients for r in range(10)]
    # e = 1 / (1 + exp(index)) so the fitted logit coefficients are -index
    np.testing.assert_allclose(np.mean(fits, axis=0), -truth, atol=0.1)


def test_gradient_matches_finite_differences(dgp1_draw):
    m = fit_logistic(dgp1_draw)
    A = design_matrix(dgp1_draw.covariates)
    z = dgp1_draw.treatment.astype(float)
    beta = m.coefficients + 0.05  # away from the optimum so the gradient is not ~0
    h = 1e-6
    fd = np.array(
        [
            (log_likelihood(beta + h * e, A, z) - log_likelihood(beta - h * e, A, z)) / (2 * h)
            for e in np.eye(len(beta))
        ]
    )
    an = score(beta, A, z)
    assert np.linalg.norm(fd - an) <= 1e-4 * np.linalg.norm(an)


def test_line_search_tolerates_rounding_near_optimum():
    # the last Newton gain here is below rounding error in the log-likelihood
    d = generate("1", 500, 60.0, rep_rng(1019, 0))
    m = fit_logistic(d)
    assert m.converged and m.iterations < 15
    assert m.final_gradient_norm <= 1e-8


def test_rank_deficient_design_is_rejected():
    X = np.column_stack([np.arange(6.0), 2 * np.arange(6.0)])
    with pytest.raises(RankDeficientError):
        fit_logistic(Dataset(X, [0, 1, 0, 1, 1, 0]))


def test_predict_propensity_examples():
    d = Dataset([[0.5], [-1.0], [2.0]], [1, 0, 1])
    zero = LogisticModel(np.zeros(2), True, 0, 0.0)
    np.testing.assert_array_equal(predict_propensity(zero, d), 0.5)
    big = LogisticModel(np.array([50.0, 0.0]), True, 0, 0.0)
    np.testing.assert_array_equal(predict_propensity(big, d, 1e-6), 1 - 1e-6)
    unit = LogisticModel(np.array([0.0, 1.0]), True, 0, 0.0)
    assert predict_propensity(unit, d)[0] == pytest.approx(0.6224593312018546, abs=1e-15)


def test_predict_propensity_dimension_mismatch():
    d = Dataset([[0.5, 1.0], [-1.0, 0.0]], [1, 0])
    with pytest.raises(DataError) as exc:
        predict_propensity(LogisticModel(np.zeros(2), True, 0, 0.0), d)
    assert exc.value.code == "DIMENSION_MISMATCH"


def test_model_weight_examples():
    z = np.array([1, 0, 1, 0])
    e = np.full(4, 0.5)
    np.testing.assert_array_equal(model_weights(e, z, "ATT").weights, 1.0)
    ato = model_weights(e, z, Estimand.ATO)
    np.testing.assert_array_equal(ato.weights, 0.5)
    assert ato.method is Method.OVERLAP
    assert model_weights(np.array([0.8]), np.array([0]), "ATT").weights[0] == pytest.approx(4.0)
    ate = model_weights(np.array([0.25, 0.25]), np.array([1, 0]), "ATE")
    np.testing.assert_allclose(ate.weights, [4.0, 4.0 / 3.0])
    assert ate.method is Method.IPW


def test_model_weights_rejects_unknown_estimand_and_bad_range():
    with pytest.raises(BalweightsError) as exc:
        model_weights(np.array([0.5]), np.array([1]), "ATC")
    assert exc.value.code == "UNKNOWN_ESTIMAND"
    with pytest.raises(DataError):
        model_weights(np.array([0.0, 0.5]), np.array([1, 0]), "ATT")


@given(st.lists(st.floats(1e-4, 1 - 1e-4), min_size=2, max_size=30, unique=True))
def test_att_control_weights_strictly_increasing_in_e(es):
    e = np.sort(np.array(es))
    w = model_weights(e, np.zeros(len(e), dtype=int), "ATT").weights
    assert np.all(np.diff(w) > 0)


@given(st.floats(1e-4, 1 - 1e-4))
def test_overlap_weights_peak_at_one_half(e):
    w = model_weights(np.array([e, e]), np.array([1, 0]), "ATO").weights
    assert min(w) <= 0.5 + 1e-15


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["1", "2", "3a"]))
def test_overlap_weights_balance_model_covariates_exactly(seed, dgp):
    param = {"1": 60.0, "2": 3.0, "3a": 5.0}[dgp]
    d = generate(dgp, 500, param, rep_rng(seed, 0))
    w = propensity_weights(d, "ATO")
    assert w.converged
    table = standardized_differences(d, w)
    assert np.max(np.abs(table.smd_weighted)) <= 1e-6


def test_propensity_weights_report():
    d = generate("1", 400, 100.0, rep_rng(3, 0))
    w = propensity_weights(d, "ATT")
    assert w.solver_report["converged"] and w.solver_report["n_clipped"] == 0
    np.testing.assert_array_equal(w.weights[d.treated], 1.0)
