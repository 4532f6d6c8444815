"""Covariate balance diagnostics: standardized differences and PBR."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import BalanceTable, CovariateBalance, Dataset, WeightVector
from .errors import BalweightsError, EstimationError
from .estimation import effective_sample_size

logger = logging.getLogger(__name__)


def _weighted_mean(X: np.ndarray, w: np.ndarray) -> np.ndarray:
    s = w.sum()
    if s <= 0:
        raise EstimationError("an arm has zero total weight", code="ZERO_WEIGHT_SUM")
    return w @ X / s


def percent_bias_reduction(mean_abs_unweighted: float, mean_abs_weighted: float) -> float:
    """``100 * (1 - mean|SMD_weighted| / mean|SMD_unweighted|)``.

    Negative when weighting makes balance worse; never clamped.
    """
    if not mean_abs_unweighted > 0:
        raise BalweightsError(
            "percent bias reduction is undefined when the arms are already balanced",
            code="UNDEFINED_PBR",
        )
    return 100.0 * (1.0 - mean_abs_weighted / mean_abs_unweighted)


def standardized_differences(
    d: Dataset, w: WeightVector | None = None, label: str = ""
) -> BalanceTable:
    """Standardized mean differences before and after weighting.

    Both the unweighted and the weighted differences are divided by the
    same unweighted pooled SD, ``sqrt((V_treated + V_control) / 2)``, so
    they are directly comparable. Covariates constant in both arms get an
    SMD of 0 and ``zero_variance=True``.
    """
    X, zt, zc = d.covariates, d.treated, d.control
    Xt, Xc = X[zt], X[zc]
    vt = Xt.var(axis=0, ddof=1) if Xt.shape[0] > 1 else np.zeros(d.k)
    vc = Xc.var(axis=0, ddof=1) if Xc.shape[0] > 1 else np.zeros(d.k)
    denom = np.sqrt((vt + vc) / 2.0)
    flat = denom == 0
    if np.any(flat):
        logger.warning(
            "zero pooled variance for %s; SMD reported as 0",
            [n for n, f in zip(d.covariate_names, flat) if f],
        )
    safe = np.where(flat, 1.0, denom)

    raw = np.where(flat, 0.0, (Xt.mean(axis=0) - Xc.mean(axis=0)) / safe)
    if w is None:
        wsmd = raw.copy()
        ess_t, ess_c = float(Xt.shape[0]), float(Xc.shape[0])
    else:
        if len(w) != d.n:
            raise EstimationError("weight vector length differs from dataset", code="LENGTH_MISMATCH")
        wt, wc = w.weights[zt], w.weights[zc]
        diff = _weighted_mean(Xt, wt) - _weighted_mean(Xc, wc)
        wsmd = np.where(flat, 0.0, diff / safe)
        ess_t = effective_sample_size(w, d.treatment, 1)
        ess_c = effective_sample_size(w, d.treatment, 0)

    records = tuple(
        CovariateBalance(name, float(a), float(b), bool(f))
        for name, a, b, f in zip(d.covariate_names, raw, wsmd, flat)
    )
    mu_raw = float(np.mean(np.abs(raw)))
    mu_w = float(np.mean(np.abs(wsmd)))
    pbr = percent_bias_reduction(mu_raw, mu_w) if mu_raw > 0 else float("nan")
    return BalanceTable(records, mu_raw, mu_w, pbr, ess_t, ess_c, label or (w.label if w else "unweighted"))


@dataclass(frozen=True)
class BalanceReport:
    baseline: BalanceTable
    tables: tuple[BalanceTable, ...]

    def rows(self) -> list[dict]:
        """Long format: one row per covariate per weight set."""
        out = []
        for t in self.tables:
            for r in t.records:
                out.append(
                    {
                        "weights": t.label,
                        "covariate": r.name,
                        "smd_unweighted": r.smd_unweighted,
                        "smd_weighted": r.smd_weighted,
                    }
                )
        return out

    def summary(self) -> list[dict]:
        return [
            {
                "weights": t.label,
                "mean_abs_smd_unweighted": t.mean_abs_unweighted,
                "mean_abs_smd_weighted": t.mean_abs_weighted,
                "pbr_percent": t.pbr_percent,
                "ess_treated": t.ess_treated,
                "ess_control": t.ess_control,
            }
            for t in self.tables
        ]


def balance_report(d: Dataset, weight_sets: Sequence[WeightVector]) -> BalanceReport:
    """One balance table per weight set plus the shared unweighted baseline."""
    if not weight_sets:
        raise BalweightsError("no weight sets given", code="EMPTY_INPUT")
    baseline = standardized_differences(d)
    return BalanceReport(baseline, tuple(standardized_differences(d, w) for w in weight_sets))
