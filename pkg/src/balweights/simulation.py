"""Simulation designs and the Monte Carlo runner.

Three data generating processes with a tunable amount of covariate
overlap:

* ``DGP1`` -- six mixed covariates, probit-style treatment with noise
  variance ``sigma2`` (larger is better overlap), constant effect 5.
* ``DGP2`` -- correlated normals, three of them dichotomized, logistic
  treatment with index scaled by ``gamma`` (larger is worse overlap),
  constant effect 0.75.
* ``DGP3A`` / ``DGP3B`` -- five independent normals, treatment from an
  interacted index divided by ``c`` plus uniform noise (larger is better
  overlap), heterogeneous effects driven by covariates outside (A) or
  inside (B) the treatment index.

Every replication draws from its own generator seeded by
``SeedSequence(seed, spawn_key=(rep,))``, so results do not depend on the
order or process in which replications run.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .balancing import DEFAULT_LAMBDA, att_balancing_weights
from .data import Dataset, Estimand, TruthRecord
from .errors import BalweightsError
from .estimation import weighted_effect
from .propensity import DEFAULT_CLIP, fit_logistic, model_weights, predict_propensity

logger = logging.getLogger(__name__)

DGP1_COV = np.array([[2.0, 1.0, -1.0], [1.0, 1.0, -0.5], [-1.0, -0.5, 1.0]])
DGP1_EFFECT = 5.0
DGP2_EFFECT = 0.75
DGP3_EFFECT = 5.0


class DGP(str, enum.Enum):
    DGP1 = "DGP1"
    DGP2 = "DGP2"
    DGP3A = "DGP3A"
    DGP3B = "DGP3B"

    @classmethod
    def parse(cls, s: str | DGP) -> DGP:
        if isinstance(s, DGP):
            return s
        key = str(s).upper()
        if not key.startswith("DGP"):
            key = "DGP" + key
        return cls(key)


class SimMethod(str, enum.Enum):
    IPW_ATT = "IPW_ATT"
    OVERLAP = "OVERLAP"
    BALANCING_ATT = "BALANCING_ATT"


ALL_METHODS = (SimMethod.IPW_ATT, SimMethod.OVERLAP, SimMethod.BALANCING_ATT)

DESIGN_GRIDS: dict[DGP, tuple[float, ...]] = {
    DGP.DGP1: (20.0, 40.0, 60.0, 80.0, 100.0),
    DGP.DGP2: (2.0, 3.0, 4.0, 5.0, 6.0),
    DGP.DGP3A: (1.0, 2.5, 5.0, 7.5, 10.0),
    DGP.DGP3B: (1.0, 2.5, 5.0, 7.5, 10.0),
}


# ---------------------------------------------------------------------------
# data generating processes


def overlap_weighted_effect(e: np.ndarray, unit_effect: np.ndarray) -> float:
    """Effect averaged with tilting weights ``e (1 - e)``."""
    h = e * (1.0 - e)
    s = h.sum()
    return float(h @ unit_effect / s) if s > 0 else float("nan")


def _truth(y0: np.ndarray, y1: np.ndarray, z: np.ndarray, e: np.ndarray) -> TruthRecord:
    effect = y1 - y0
    return TruthRecord(
        y0=y0,
        y1=y1,
        true_att=float(np.mean(effect[z == 1])),
        true_propensity=e,
        true_ato=overlap_weighted_effect(e, effect),
    )


def _dataset(X: np.ndarray, z: np.ndarray, y0: np.ndarray, y1: np.ndarray, e: np.ndarray) -> Dataset:
    y = np.where(z == 1, y1, y0)
    return Dataset(X, z, y, tuple(f"x{j + 1}" for j in range(X.shape[1])), _truth(y0, y1, z, e))


def mvn_cholesky(rng: np.random.Generator, cov: np.ndarray, n: int) -> np.ndarray:
    """Mean-zero multivariate normal draws ``N(0, cov)`` via a Cholesky factor."""
    chol = np.linalg.cholesky(cov)
    return rng.standard_normal((n, cov.shape[0])) @ chol.T


def chi2_1(rng: np.random.Generator, n: int) -> np.ndarray:
    """Chi-square(1) draws as squared standard normals."""
    return rng.standard_normal(n) ** 2


def generate_dgp1(n: int, sigma2: float, rng: np.random.Generator) -> Dataset:
    if not sigma2 > 0:
        raise BalweightsError("sigma2 must be positive", code="INVALID_PARAMETER")
    X123 = mvn_cholesky(rng, DGP1_COV, n)
    x4 = rng.uniform(-3.0, 3.0, n)
    x5 = chi2_1(rng, n)
    x6 = rng.binomial(1, 0.5, n).astype(float)
    X = np.column_stack([X123, x4, x5, x6])
    eps = rng.normal(0.0, math.sqrt(sigma2), n)
    index = X @ np.array([1.0, 2.0, -2.0, -1.0, -0.5, 1.0])
    z = (index + eps > 0).astype(np.int64)
    eta = rng.standard_normal(n)
    y0 = X @ np.array([1.0, 1.0, 1.0, -1.0, 1.0, 1.0]) + eta
    y1 = y0 + DGP1_EFFECT
    e = ndtr(index / math.sqrt(sigma2))
    return _dataset(X, z, y0, y1, e)


def generate_dgp2(n: int, gamma: float, rng: np.random.Generator) -> Dataset:
    if not gamma > 0:
        raise BalweightsError("gamma must be positive", code="INVALID_PARAMETER")
    cov = np.full((6, 6), 0.5) + 0.5 * np.eye(6)
    X = mvn_cholesky(rng, cov, n)
    X[:, 3:] = (X[:, 3:] > 0).astype(float)
    coef = gamma * np.array([0.5, 0.3, 0.3, -0.2, -0.25, -0.25])
    # inverse logit of the *negated* index, as the design is written
    e = 1.0 / (1.0 + np.exp(0.1 + X @ coef))
    z = (rng.uniform(size=n) < e).astype(np.int64)
    mu0 = X @ np.array([-0.5, -0.5, -1.5, 0.8, 0.8, 1.0])
    y0 = mu0 + rng.normal(0.0, 2.0, n)
    y1 = y0 + DGP2_EFFECT
    return _dataset(X, z, y0, y1, e)


def dgp3_score(X: np.ndarray) -> np.ndarray:
    return 1.5 * X[:, 0] + 1.5 * X[:, 1] + 0.7 * X[:, 0] * X[:, 1]


def generate_dgp3(n: int, c: float, mode: str, rng: np.random.Generator) -> Dataset:
    if not c > 0:
        raise BalweightsError("c must be positive", code="INVALID_PARAMETER")
    mode = mode.upper()
    if mode not in ("A", "B"):
        raise BalweightsError(f"unknown DGP3 mode {mode!r}", code="INVALID_PARAMETER")
    X = rng.standard_normal((n, 5))
    s = dgp3_score(X) / c
    z = (s + rng.uniform(-0.5, 0.5, n) > 0).astype(np.int64)
    y0 = X[:, 1] + X[:, 2] + rng.standard_normal(n)
    if mode == "A":
        mu = 0.5 * X[:, 3] + 0.25 * X[:, 4]
    else:
        mu = 0.5 * X[:, 0] + 0.25 * X[:, 1]
    y1 = y0 + DGP3_EFFECT + rng.normal(mu, 2.0)
    e = np.clip(0.5 + s, 0.0, 1.0)
    return _dataset(X, z, y0, y1, e)


def generate(dgp: DGP | str, n: int, overlap_param: float, rng: np.random.Generator) -> Dataset:
    dgp = DGP.parse(dgp)
    if dgp is DGP.DGP1:
        return generate_dgp1(n, overlap_param, rng)
    if dgp is DGP.DGP2:
        return generate_dgp2(n, overlap_param, rng)
    return generate_dgp3(n, overlap_param, dgp.value[-1], rng)


def rep_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent generator for one replication, a pure function of (seed, rep)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class ScenarioConfig:
    dgp: DGP
    overlap_param: float
    n: int = 1000
    reps: int = 1000
    seed: int = 0
    methods: tuple[SimMethod, ...] = ALL_METHODS
    lam: float = DEFAULT_LAMBDA
    epsilon_clip: float = DEFAULT_CLIP
    custom_grid: bool = False

    def __post_init__(self) -> None:
        dgp = DGP.parse(self.dgp)
        object.__setattr__(self, "dgp", dgp)
        object.__setattr__(self, "overlap_param", float(self.overlap_param))
        object.__setattr__(self, "methods", tuple(SimMethod(m) for m in self.methods))
        if not self.overlap_param > 0:
            raise BalweightsError("overlap parameter must be positive", code="INVALID_PARAMETER")
        if not self.custom_grid and self.overlap_param not in DESIGN_GRIDS[dgp]:
            raise BalweightsError(
                f"{self.overlap_param:g} is not on the {dgp.value} grid "
                f"{DESIGN_GRIDS[dgp]}; pass custom_grid=True to allow it",
                code="INVALID_PARAMETER",
            )
        if self.n < 4 or self.reps < 1:
            raise BalweightsError("need n >= 4 and reps >= 1", code="INVALID_PARAMETER")
        if not self.methods:
            raise BalweightsError("no methods selected", code="INVALID_PARAMETER")


@dataclass(frozen=True)
class RepRecord:
    rep: int
    method: SimMethod
    estimate: float
    true_att: float
    true_ato: float
    converged: bool
    error: str = ""


@dataclass(frozen=True)
class MethodSummary:
    method: SimMethod
    n_ok: int
    failures: int
    mean_estimate: float
    bias_vs_att: float
    rmse_vs_att: float
    bias_vs_ato: float
    rmse_vs_ato: float
    mc_error: float


@dataclass(frozen=True)
class ScenarioResult:
    config: ScenarioConfig
    summaries: dict[SimMethod, MethodSummary]
    records: tuple[RepRecord, ...]
    mean_true_att: float
    mean_true_ato: float
    truth_gap_mean: float
    truth_gap_mc_error: float
    warnings: tuple[str, ...] = field(default=())

    def __getitem__(self, method: SimMethod | str) -> MethodSummary:
        return self.summaries[SimMethod(method)]


def _one_rep(cfg: ScenarioConfig, rep: int) -> list[RepRecord]:
    d = generate(cfg.dgp, cfg.n, cfg.overlap_param, rep_rng(cfg.seed, rep))
    t = d.truth
    att, ato = t.true_att, t.true_ato if t.true_ato is not None else float("nan")
    out = []

    model = e = None
    fit_error = ""
    if SimMethod.IPW_ATT in cfg.methods or SimMethod.OVERLAP in cfg.methods:
        try:
            model = fit_logistic(d)
            e = predict_propensity(model, d, cfg.epsilon_clip)
        except BalweightsError as exc:
            fit_error = exc.code

    for method in cfg.methods:
        try:
            if method is SimMethod.BALANCING_ATT:
                w = att_balancing_weights(d, cfg.lam)
            elif fit_error:
                out.append(RepRecord(rep, method, float("nan"), att, ato, False, fit_error))
                continue
            else:
                estimand = Estimand.ATT if method is SimMethod.IPW_ATT else Estimand.ATO
                w = model_weights(e, d.treatment, estimand)
                w = replace(w, converged=model.converged)
            est = weighted_effect(d, w)
            out.append(RepRecord(rep, method, est.point, att, ato, bool(w.converged)))
        except BalweightsError as exc:
            out.append(RepRecord(rep, method, float("nan"), att, ato, False, exc.code))
    return out


def _rep_chunk(args: tuple[ScenarioConfig, Sequence[int]]) -> list[RepRecord]:
    cfg, reps = args
    out: list[RepRecord] = []
    for r in reps:
        out.extend(_one_rep(cfg, r))
    return out


def _summarize(method: SimMethod, recs: list[RepRecord]) -> MethodSummary:
    est = np.array([r.estimate for r in recs])
    ok = np.isfinite(est)
    est = est[ok]
    att = np.array([r.true_att for r in recs])[ok]
    ato = np.array([r.true_ato for r in recs])[ok]
    k = est.shape[0]
    nan = float("nan")
    if k == 0:
        return MethodSummary(method, 0, len(recs), nan, nan, nan, nan, nan, nan)

    def bias_rmse(truth: np.ndarray) -> tuple[float, float]:
        if not np.all(np.isfinite(truth)):
            return nan, nan
        err = est - truth
        return float(err.mean()), float(np.sqrt(np.mean(err * err)))

    b_att, r_att = bias_rmse(att)
    b_ato, r_ato = bias_rmse(ato)
    mc = float(est.std(ddof=1) / math.sqrt(k)) if k > 1 else nan
    return MethodSummary(method, k, len(recs) - k, float(est.mean()), b_att, r_att, b_ato, r_ato, mc)


def run_scenario(cfg: ScenarioConfig, workers: int = 1) -> ScenarioResult:
    """Run ``cfg.reps`` replications and aggregate bias, RMSE and MC error.

    Bias and RMSE are computed against the per-replication true ATT, and
    additionally against the true ATO. The MC error is the standard
    deviation of the estimates over ``sqrt(reps)``. Replications whose
    estimator raised are excluded and counted in ``failures``.
    """
    reps = list(range(cfg.reps))
    if workers > 1 and cfg.reps > 1:
        chunks = [(cfg, reps[i::workers]) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = [r for part in ex.map(_rep_chunk, chunks) for r in part]
    else:
        records = _rep_chunk((cfg, reps))
    order = {m: i for i, m in enumerate(cfg.methods)}
    records.sort(key=lambda r: (r.rep, order[r.method]))

    summaries = {m: _summarize(m, [r for r in records if r.method is m]) for m in cfg.methods}
    warnings = []
    for m, s in summaries.items():
        if s.failures > 0.1 * cfg.reps:
            msg = f"{m.value}: {s.failures} of {cfg.reps} replications failed"
            logger.warning(msg)
            warnings.append(msg)

    first = [r for r in records if r.method is cfg.methods[0]]
    att = np.array([r.true_att for r in first])
    ato = np.array([r.true_ato for r in first])
    gap = np.abs(att - ato)
    gap_mc = float(gap.std(ddof=1) / math.sqrt(gap.size)) if gap.size > 1 else float("nan")
    return ScenarioResult(
        config=cfg,
        summaries=summaries,
        records=tuple(records),
        mean_true_att=float(att.mean()),
        mean_true_ato=float(ato.mean()),
        truth_gap_mean=float(gap.mean()),
        truth_gap_mc_error=gap_mc,
        warnings=tuple(warnings),
    )


GRID_COLUMNS = (
    "dgp",
    "overlap_param",
    "method",
    "mean_estimate",
    "bias",
    "rmse",
    "bias_vs_ato",
    "rmse_vs_ato",
    "mc_error",
    "failures",
)


def grid_rows(results: Iterable[ScenarioResult]) -> list[dict]:
    """Long-format table: one row per (scenario, method)."""
    rows = []
    for res in results:
        for m, s in res.summaries.items():
            rows.append(
                {
                    "dgp": res.config.dgp.value,
                    "overlap_param": res.config.overlap_param,
                    "method": m.value,
                    "mean_estimate": s.mean_estimate,
                    "bias": s.bias_vs_att,
                    "rmse": s.rmse_vs_att,
                    "bias_vs_ato": s.bias_vs_ato,
                    "rmse_vs_ato": s.rmse_vs_ato,
                    "mc_error": s.mc_error,
                    "failures": s.failures,
                }
            )
    return rows


def summarize_grid(
    configs: Sequence[ScenarioConfig], workers: int = 1
) -> tuple[list[dict], list[ScenarioResult]]:
    """Run every scenario and return the long-format grid table and the raw results."""
    if not configs:
        raise BalweightsError("no scenarios given", code="EMPTY_INPUT")
    results = [run_scenario(c, workers) for c in configs]
    return grid_rows(results), results


def design_grid(dgp: DGP | str, **kwargs) -> list[ScenarioConfig]:
    """One config per overlap value on the design's standard grid."""
    dgp = DGP.parse(dgp)
    return [ScenarioConfig(dgp, v, **kwargs) for v in DESIGN_GRIDS[dgp]]
