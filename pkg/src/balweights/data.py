"""Core value types shared across the package.

All containers are frozen dataclasses whose array fields are copied and
marked read-only on construction, so instances can be shared freely.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import DataError

TRUTH_TOL = 1e-12


class Estimand(str, enum.Enum):
    ATE = "ATE"
    ATT = "ATT"
    ATO = "ATO"


class Method(str, enum.Enum):
    IPW = "IPW"
    OVERLAP = "OVERLAP"
    BALANCING = "BALANCING"


def _frozen(a: Any, dtype: Any = float, ndim: int = 1) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    if out.ndim != ndim:
        if ndim == 2 and out.ndim == 1:
            out = out.reshape(-1, 1)
        else:
            raise DataError(
                f"expected a {ndim}-d array, got shape {out.shape}",
                code="LENGTH_MISMATCH",
            )
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class TruthRecord:
    """Per-unit potential outcomes and the estimands they imply."""

    y0: np.ndarray
    y1: np.ndarray
    true_att: float
    true_propensity: np.ndarray | None = None
    true_ato: float | None = None
    unit_effect: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        y0 = _frozen(self.y0)
        y1 = _frozen(self.y1)
        if y0.shape != y1.shape:
            raise DataError("y0 and y1 differ in length", code="LENGTH_MISMATCH")
        effect = y1 - y0
        effect.flags.writeable = False
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "unit_effect", effect)
        object.__setattr__(self, "true_att", float(self.true_att))
        if self.true_ato is not None:
            object.__setattr__(self, "true_ato", float(self.true_ato))
        if self.true_propensity is not None:
            e = _frozen(self.true_propensity)
            if e.shape != y0.shape:
                raise DataError(
                    "true_propensity length differs from y0", code="LENGTH_MISMATCH"
                )
            if np.any((e < 0) | (e > 1)) or not np.all(np.isfinite(e)):
                raise DataError(
                    "true_propensity must lie in [0, 1]", code="NON_FINITE_VALUE"
                )
            object.__setattr__(self, "true_propensity", e)

    def __len__(self) -> int:
        return self.y0.shape[0]


@dataclass(frozen=True)
class Dataset:
    """Covariates, a binary treatment, an optional outcome and optional truth.

    Parameters
    ----------
    covariates : array_like, shape (n, k)
    treatment : array_like of {0, 1}, shape (n,)
    outcome : array_like, shape (n,), optional
    covariate_names : sequence of str, optional
        Defaults to ``x1 .. xk``.
    truth : TruthRecord, optional
        Only available for simulated data.
    """

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray | None = None
    covariate_names: tuple[str, ...] = ()
    truth: TruthRecord | None = None

    def __post_init__(self) -> None:
        X = _frozen(self.covariates, ndim=2)
        z_raw = np.asarray(self.treatment)
        if z_raw.ndim != 1:
            raise DataError("treatment must be 1-d", code="LENGTH_MISMATCH")
        if z_raw.dtype.kind == "f" and not np.all(np.isfinite(z_raw)):
            raise DataError("treatment has non-finite entries", code="NON_FINITE_VALUE")
        if not np.all(np.isin(z_raw, (0, 1))):
            raise DataError(
                "treatment must contain only 0 and 1", code="NON_BINARY_TREATMENT"
            )
        z = _frozen(z_raw, dtype=np.int64)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "treatment", z)
        if self.outcome is not None:
            object.__setattr__(self, "outcome", _frozen(self.outcome))
        names = tuple(self.covariate_names) or tuple(
            f"x{j + 1}" for j in range(X.shape[1])
        )
        object.__setattr__(self, "covariate_names", names)
        _check(self)

    @property
    def n(self) -> int:
        return self.treatment.shape[0]

    @property
    def k(self) -> int:
        return self.covariates.shape[1]

    @property
    def treated(self) -> np.ndarray:
        """Boolean mask of treated units."""
        return self.treatment == 1

    @property
    def control(self) -> np.ndarray:
        return self.treatment == 0

    @property
    def n_treated(self) -> int:
        return int(self.treatment.sum())

    @property
    def n_control(self) -> int:
        return self.n - self.n_treated

    def with_outcome(self, outcome: Any) -> Dataset:
        return Dataset(self.covariates, self.treatment, outcome, self.covariate_names, self.truth)


def _check(d: Dataset) -> None:
    X, z = d.covariates, d.treatment
    n = z.shape[0]
    if X.shape[0] != n:
        raise DataError(
            f"covariates have {X.shape[0]} rows but treatment has {n}",
            code="LENGTH_MISMATCH",
        )
    if n < 2:
        raise DataError("need at least two units", code="LENGTH_MISMATCH")
    if len(d.covariate_names) != X.shape[1]:
        raise DataError(
            f"{len(d.covariate_names)} covariate names for {X.shape[1]} columns",
            code="LENGTH_MISMATCH",
        )
    if not np.all(np.isin(z, (0, 1))):
        raise DataError("treatment must contain only 0 and 1", code="NON_BINARY_TREATMENT")
    n1 = int(z.sum())
    if n1 == 0 or n1 == n:
        raise DataError(
            "both treated and control units are required", code="DEGENERATE_ARM"
        )
    if not np.all(np.isfinite(X)):
        raise DataError("covariates contain non-finite values", code="NON_FINITE_VALUE")
    if d.outcome is not None:
        if d.outcome.shape != (n,):
            raise DataError("outcome length differs from treatment", code="LENGTH_MISMATCH")
        if not np.all(np.isfinite(d.outcome)):
            raise DataError("outcome contains non-finite values", code="NON_FINITE_VALUE")
    t = d.truth
    if t is not None:
        if len(t) != n:
            raise DataError("truth length differs from treatment", code="LENGTH_MISMATCH")
        att = float(np.mean(t.unit_effect[z == 1]))
        if abs(att - t.true_att) > TRUTH_TOL * max(1.0, abs(att)):
            raise DataError(
                f"true_att {t.true_att!r} disagrees with treated mean effect {att!r}",
                code="INCONSISTENT_TRUTH",
            )


def validate_dataset(d: Dataset) -> Dataset:
    """Return ``d`` unchanged if every dataset invariant holds, else raise DataError."""
    _check(d)
    return d


@dataclass(frozen=True)
class WeightVector:
    """Per-unit nonnegative weights tagged with how they were produced."""

    weights: np.ndarray
    estimand: Estimand
    method: Method
    converged: bool = True
    solver_report: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        w = _frozen(self.weights)
        if not np.all(np.isfinite(w)):
            raise DataError("weights must be finite", code="NON_FINITE_VALUE")
        if np.any(w < 0):
            raise DataError("weights must be nonnegative", code="NEGATIVE_WEIGHT")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "estimand", Estimand(self.estimand))
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "solver_report", dict(self.solver_report))

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def label(self) -> str:
        return f"{self.method.value}-{self.estimand.value}"

    def rescaled(self, treated_factor: float, control_factor: float, treatment: Any) -> WeightVector:
        """Copy with each arm's weights multiplied by a positive constant."""
        z = np.asarray(treatment)
        w = np.where(z == 1, self.weights * treated_factor, self.weights * control_factor)
        return WeightVector(w, self.estimand, self.method, self.converged, self.solver_report)


def uniform_weights(d: Dataset, estimand: Estimand = Estimand.ATE) -> WeightVector:
    """Unit weights for every observation (the unweighted comparison)."""
    return WeightVector(np.ones(d.n), estimand, Method.IPW, True, {"uniform": True})


@dataclass(frozen=True)
class EffectEstimate:
    point: float
    stderr: float
    estimand: Estimand
    method: Method
    n_treated: int
    n_control: int
    ess_treated: float = float("nan")
    ess_control: float = float("nan")
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class CovariateBalance:
    name: str
    smd_unweighted: float
    smd_weighted: float
    zero_variance: bool = False


@dataclass(frozen=True)
class BalanceTable:
    """Standardized differences before and after weighting."""

    records: tuple[CovariateBalance, ...]
    mean_abs_unweighted: float
    mean_abs_weighted: float
    pbr_percent: float
    ess_treated: float
    ess_control: float
    label: str = ""

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.records]

    @property
    def smd_unweighted(self) -> np.ndarray:
        return np.array([r.smd_unweighted for r in self.records])

    @property
    def smd_weighted(self) -> np.ndarray:
        return np.array([r.smd_weighted for r in self.records])

