"""Logistic propensity model and the weights derived from it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .data import Dataset, Estimand, Method, WeightVector
from .errors import BalweightsError, DataError, RankDeficientError, SeparationError

DEFAULT_CLIP = 1e-6


@dataclass(frozen=True)
class FitOptions:
    tol: float = 1e-8
    max_iter: int = 100
    separation_bound: float = 30.0
    max_halvings: int = 50


@dataclass(frozen=True)
class LogisticModel:
    """Fitted logistic regression; ``coefficients[0]`` is the intercept."""

    coefficients: np.ndarray
    converged: bool
    iterations: int
    final_gradient_norm: float
    log_likelihood: float = float("nan")

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    @property
    def slopes(self) -> np.ndarray:
        return self.coefficients[1:]


def design_matrix(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.column_stack([np.ones(X.shape[0]), X])


def log_likelihood(beta: np.ndarray, A: np.ndarray, z: np.ndarray) -> float:
    """Bernoulli log-likelihood of ``z`` under ``expit(A @ beta)``."""
    eta = A @ beta
    return float(np.sum(np.where(z == 1, log_expit(eta), log_expit(-eta))))


def score(beta: np.ndarray, A: np.ndarray, z: np.ndarray) -> np.ndarray:
    return A.T @ (z - expit(A @ beta))


def fit_logistic(d: Dataset, opts: FitOptions | None = None) -> LogisticModel:
    """Maximum-likelihood logistic regression of treatment on ``[1 | X]``.

    Newton-Raphson with step halving. Non-convergence is reported through
    ``converged=False``; diverging coefficients raise ``SeparationError``.
    """
    opts = opts or FitOptions()
    A = design_matrix(d.covariates)
    z = d.treatment.astype(float)
    p = A.shape[1]
    if np.linalg.matrix_rank(A) < p:
        raise RankDeficientError("design matrix [1 | X] is rank deficient")

    beta = np.zeros(p)
    ll = log_likelihood(beta, A, z)
    grad = score(beta, A, z)
    gnorm = float(np.linalg.norm(grad))
    it = 0
    while gnorm > opts.tol and it < opts.max_iter:
        it += 1
        mu = expit(A @ beta)
        info = A.T @ (A * (mu * (1.0 - mu))[:, None])
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, grad, rcond=None)[0]
        t = 1.0
        # near the optimum the gain is below rounding error in ll; allow for it
        slack = 64 * np.finfo(float).eps * (1.0 + abs(ll))
        for _ in range(opts.max_halvings):
            cand = beta + t * step
            ll_cand = log_likelihood(cand, A, z)
            if ll_cand >= ll - slack:
                break
            t *= 0.5
        else:
            # no ascent possible at machine precision
            break
        beta, ll = cand, ll_cand
        if np.max(np.abs(beta)) > opts.separation_bound:
            raise SeparationError(
                f"coefficient magnitude exceeded {opts.separation_bound:g} "
                f"at iteration {it}",
                coefficients=beta.copy(),
            )
        grad = score(beta, A, z)
        gnorm = float(np.linalg.norm(grad))

    eta = A @ beta
    if eta[z == 1].min() > eta[z == 0].max():
        raise SeparationError(
            "fitted index separates treated from control perfectly", coefficients=beta.copy()
        )
    return LogisticModel(beta, gnorm <= opts.tol, it, gnorm, ll)


def predict_propensity(
    m: LogisticModel, d: Dataset, epsilon_clip: float = DEFAULT_CLIP
) -> np.ndarray:
    """Fitted propensities clipped into ``[epsilon_clip, 1 - epsilon_clip]``."""
    if m.coefficients.shape[0] != d.k + 1:
        raise DataError(
            f"model has {m.coefficients.shape[0] - 1} slopes but dataset has {d.k} covariates",
            code="DIMENSION_MISMATCH",
        )
    e = expit(design_matrix(d.covariates) @ m.coefficients)
    return np.clip(e, epsilon_clip, 1.0 - epsilon_clip)


def model_weights(e: np.ndarray, treatment: np.ndarray, estimand: Estimand | str) -> WeightVector:
    """Map propensities to ATE, ATT (odds) or ATO (overlap) weights."""
    try:
        estimand = Estimand(estimand)
    except ValueError:
        raise BalweightsError(f"unknown estimand {estimand!r}", code="UNKNOWN_ESTIMAND") from None
    e = np.asarray(e, dtype=float)
    treated = np.asarray(treatment) == 1
    if np.any((e <= 0) | (e >= 1)):
        raise DataError("propensities must lie strictly inside (0, 1)", code="PROPENSITY_RANGE")
    if estimand is Estimand.ATE:
        w = np.where(treated, 1.0 / e, 1.0 / (1.0 - e))
    elif estimand is Estimand.ATT:
        w = np.where(treated, 1.0, e / (1.0 - e))
    else:
        w = np.where(treated, 1.0 - e, e)
    method = Method.OVERLAP if estimand is Estimand.ATO else Method.IPW
    return WeightVector(w, estimand, method, True, {})


def propensity_weights(
    d: Dataset,
    estimand: Estimand | str,
    epsilon_clip: float = DEFAULT_CLIP,
    opts: FitOptions | None = None,
    model: LogisticModel | None = None,
) -> WeightVector:
    """Fit (or reuse) the logistic model and return model-based weights."""
    model = model or fit_logistic(d, opts)
    e = predict_propensity(model, d, epsilon_clip)
    wv = model_weights(e, d.treatment, estimand)
    report = {
        "converged": model.converged,
        "iterations": model.iterations,
        "gradient_norm": model.final_gradient_norm,
        "epsilon_clip": epsilon_clip,
        "n_clipped": int(np.sum((e <= epsilon_clip) | (e >= 1 - epsilon_clip))),
    }
    return WeightVector(wv.weights, wv.estimand, wv.method, model.converged, report)
