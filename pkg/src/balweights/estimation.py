"""Weighted difference-in-means effect estimates."""

from __future__ import annotations

import numpy as np

from .data import Dataset, EffectEstimate, WeightVector
from .errors import DataError, EstimationError


def _arms(d: Dataset, w: WeightVector) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if d.outcome is None:
        raise DataError("dataset has no outcome", code="MISSING_OUTCOME")
    if len(w) != d.n:
        raise DataError("weight vector length differs from dataset", code="LENGTH_MISMATCH")
    wt, wc = w.weights[d.treated], w.weights[d.control]
    if wt.sum() <= 0 or wc.sum() <= 0:
        raise EstimationError("an arm has zero total weight", code="ZERO_WEIGHT_SUM")
    return d.outcome[d.treated], wt, d.outcome[d.control], wc


def _hajek(y: np.ndarray, w: np.ndarray) -> float:
    return float(w @ y / w.sum())


def _arm_variance(y: np.ndarray, w: np.ndarray) -> float:
    mu = _hajek(y, w)
    s = w.sum()
    return float(np.sum(w * w * (y - mu) ** 2) / (s * s))


def weighted_effect(d: Dataset, w: WeightVector) -> EffectEstimate:
    """Hajek difference of weighted arm means, with its linearized standard error."""
    yt, wt, yc, wc = _arms(d, w)
    point = _hajek(yt, wt) - _hajek(yc, wc)
    se = float(np.sqrt(_arm_variance(yt, wt) + _arm_variance(yc, wc)))
    ess_t, ess_c = _ess(wt), _ess(wc)
    notes = []
    if ess_c <= 1.0 + 1e-12:
        notes.append("control ESS=1")
    if ess_t <= 1.0 + 1e-12:
        notes.append("treated ESS=1")
    return EffectEstimate(
        point=point,
        stderr=se,
        estimand=w.estimand,
        method=w.method,
        n_treated=d.n_treated,
        n_control=d.n_control,
        ess_treated=ess_t,
        ess_control=ess_c,
        notes=tuple(notes),
    )


def effect_stderr(d: Dataset, w: WeightVector) -> float:
    """Linearization standard error of the Hajek contrast.

    Each arm contributes ``sum(w_i^2 (y_i - mu_arm)^2) / sum(w_i)^2``;
    uncertainty in the weights themselves is ignored.
    """
    yt, wt, yc, wc = _arms(d, w)
    return float(np.sqrt(_arm_variance(yt, wt) + _arm_variance(yc, wc)))


def _ess(w: np.ndarray) -> float:
    s = w.sum()
    if s <= 0:
        raise EstimationError("zero total weight", code="ZERO_WEIGHT_SUM")
    return float(s * s / (w @ w))


def effective_sample_size(w: WeightVector, treatment: np.ndarray, arm: int | str) -> float:
    """Kish effective sample size ``(sum w)^2 / sum w^2`` within one arm.

    ``arm`` is 1 / ``"treated"`` or 0 / ``"control"``.
    """
    if isinstance(arm, str):
        arm = {"treated": 1, "control": 0}[arm.lower()]
    mask = np.asarray(treatment) == arm
    if not mask.any():
        raise EstimationError("arm has no units", code="DEGENERATE_ARM")
    return _ess(w.weights[mask])
