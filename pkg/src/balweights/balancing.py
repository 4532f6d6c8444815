"""ATT balancing weights.

Control weights solve

    minimize    ||target - C^T w||_2^2 + lam * ||w||_2^2
    subject to  w >= 0,  sum(w) = 1

where ``C`` holds the control covariates and ``target`` the treated means,
both on a common standardized scale. The certifying solver is accelerated
projected gradient with an exact simplex projection. For ``lam > 0`` it is
warm-started from a semismooth Newton solve of the (k + 1)-dimensional
dual, which usually leaves nothing for the gradient phase to do.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Estimand, Method, WeightVector
from .errors import EstimationError

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA = 1e-4
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``y`` onto ``{x >= 0, sum(x) = 1}`` (sort-based)."""
    y = np.asarray(y, dtype=float)
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, y.shape[0] + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


def pooled_sd(X: np.ndarray, treatment: np.ndarray) -> np.ndarray:
    """sqrt((V_treated + V_control) / 2) per column, sample variances (ddof=1)."""
    z = np.asarray(treatment) == 1
    Xt, Xc = X[z], X[~z]
    vt = Xt.var(axis=0, ddof=1) if Xt.shape[0] > 1 else np.zeros(X.shape[1])
    vc = Xc.var(axis=0, ddof=1) if Xc.shape[0] > 1 else np.zeros(X.shape[1])
    return np.sqrt((vt + vc) / 2.0)


@dataclass(frozen=True)
class Standardizer:
    """Column centering/scaling used to put covariates on a common scale."""

    keep: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    dropped: tuple[str, ...] = ()

    @classmethod
    def from_dataset(cls, d: Dataset) -> Standardizer:
        X = d.covariates
        constant = np.ptp(X, axis=0) == 0
        dropped = tuple(n for n, c in zip(d.covariate_names, constant) if c)
        for name in dropped:
            logger.warning("dropping zero-variance covariate %r", name)
        keep = ~constant
        Xk = X[:, keep]
        scale = pooled_sd(Xk, d.treatment)
        # constant within each arm but not overall: fall back to the overall SD
        flat = scale == 0
        if np.any(flat):
            scale[flat] = Xk[:, flat].std(axis=0, ddof=1)
        return cls(keep, Xk.mean(axis=0), scale, dropped)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X[:, self.keep] - self.center) / self.scale


@dataclass(frozen=True)
class BalancingProblem:
    target: np.ndarray
    control_covariates: np.ndarray
    lam: float = DEFAULT_LAMBDA
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    standardizer: Standardizer | None = None

    def __post_init__(self) -> None:
        C = np.atleast_2d(np.asarray(self.control_covariates, dtype=float))
        t = np.atleast_1d(np.asarray(self.target, dtype=float))
        if C.shape[1] != t.shape[0]:
            raise EstimationError(
                f"target has {t.shape[0]} entries but controls have {C.shape[1]} columns",
                code="DIMENSION_MISMATCH",
            )
        if self.lam < 0:
            raise EstimationError("lambda must be nonnegative", code="INVALID_LAMBDA")
        if C.shape[0] < 1:
            raise EstimationError("no control units", code="DEGENERATE_ARM")
        object.__setattr__(self, "control_covariates", C)
        object.__setattr__(self, "target", t)

    @property
    def m(self) -> int:
        return self.control_covariates.shape[0]

    @property
    def k(self) -> int:
        return self.control_covariates.shape[1]

    def imbalance(self, w: np.ndarray) -> np.ndarray:
        return self.control_covariates.T @ w - self.target

    def objective(self, w: np.ndarray) -> float:
        r = self.imbalance(w)
        return float(r @ r + self.lam * (w @ w))

    def gradient(self, w: np.ndarray) -> np.ndarray:
        return 2.0 * (self.control_covariates @ self.imbalance(w) + self.lam * w)

    def kkt_residual(self, w: np.ndarray) -> float:
        """Norm of ``w - P(w - grad f(w))``; zero exactly at the minimizer."""
        return float(np.linalg.norm(w - project_simplex(w - self.gradient(w))))

    def lipschitz(self) -> float:
        s = np.linalg.norm(self.control_covariates, 2) if self.k else 0.0
        return 2.0 * (s * s + self.lam)


@dataclass(frozen=True)
class BalancingSolution:
    control_weights: np.ndarray
    objective: float
    imbalance_norm: float
    iterations: int
    converged: bool
    kkt_residual: float
    newton_iterations: int = 0
    trace: tuple[tuple[int, float, float], ...] = field(default=(), repr=False)


def build_balancing_problem(
    d: Dataset,
    lam: float = DEFAULT_LAMBDA,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> BalancingProblem:
    """Standardize covariates and set the treated means as the balance target."""
    std = Standardizer.from_dataset(d)
    S = std.transform(d.covariates)
    return BalancingProblem(
        target=S[d.treated].mean(axis=0),
        control_covariates=S[d.control],
        lam=lam,
        tol=tol,
        max_iter=max_iter,
        standardizer=std,
    )


def _dual_newton(p: BalancingProblem, max_iter: int = 100) -> tuple[np.ndarray, int]:
    # Dual variables (a, b) parametrize w_i = max(0, a - c_i.b); the dual
    # objective h is concave and piecewise quadratic, so damped Newton
    # terminates once the active set settles.
    C, t, lam = p.control_covariates, p.target, p.lam
    m, k = C.shape

    def h(a: float, b: np.ndarray) -> tuple[float, np.ndarray]:
        w = np.maximum(a - C @ b, 0.0)
        return a - b @ t - 0.5 * lam * (b @ b) - 0.5 * (w @ w), w

    a, b = 1.0 / m, np.zeros(k)
    val, w = h(a, b)
    it = 0
    for it in range(1, max_iter + 1):
        active = w > 0
        na = int(active.sum())
        if na == 0:
            a = float(np.max(C @ b)) + 1.0 / m
            val, w = h(a, b)
            continue
        ga = 1.0 - w.sum()
        gb = C.T @ w - t - lam * b
        grad = np.concatenate(([ga], gb))
        if np.max(np.abs(grad)) < 1e-15:
            break
        Ca = C[active]
        s = Ca.sum(axis=0)
        H = np.empty((k + 1, k + 1))
        H[0, 0] = na
        H[0, 1:] = H[1:, 0] = -s
        H[1:, 1:] = Ca.T @ Ca + lam * np.eye(k)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            break
        slope = grad @ step
        if slope <= 0:
            break
        tau = 1.0
        while tau > 1e-12:
            a_new, b_new = a + tau * step[0], b + tau * step[1:]
            val_new, w_new = h(a_new, b_new)
            if val_new >= val + 1e-4 * tau * slope:
                break
            tau *= 0.5
        else:
            break
        if val_new - val <= 1e-16 * max(1.0, abs(val)) and tau < 1.0:
            a, b, val, w = a_new, b_new, val_new, w_new
            break
        a, b, val, w = a_new, b_new, val_new, w_new
    return w, it


def _support_refine(p: BalancingProblem, w: np.ndarray, max_support: int = 400) -> np.ndarray | None:
    # Re-solve the equality-constrained least squares on supp(w) in a
    # backward-stable way: eliminate the largest weight through the sum
    # constraint and hand the stacked system to lstsq. Dual-parametrized
    # weights lose relative accuracy when few controls carry large weight.
    support = np.flatnonzero(w > 0)
    s = support.size
    if s < 2 or s > max_support:
        return None
    j = support[np.argmax(w[support])]
    rest = support[support != j]
    C, t, lam = p.control_covariates, p.target, p.lam
    D = (C[rest] - C[j]).T
    rhs = [t - C[j]]
    blocks = [D]
    if lam > 0:
        r = np.sqrt(lam)
        blocks += [r * np.eye(s - 1), -r * np.ones((1, s - 1))]
        rhs += [np.zeros(s - 1), [-r]]
    y = np.linalg.lstsq(np.vstack(blocks), np.concatenate(rhs), rcond=None)[0]
    out = np.zeros_like(w)
    out[rest] = y
    out[j] = 1.0 - y.sum()
    if np.any(out[support] < 0):
        return None
    return out


def solve_balancing_weights(p: BalancingProblem, trace: bool = False) -> BalancingSolution:
    """Minimize the penalized imbalance over the probability simplex.

    The returned weights are certified by the projected-gradient KKT
    residual ``||w - P(w - grad f(w))|| <= p.tol``. When the iteration
    budget runs out the best iterate is returned with ``converged=False``.
    """
    m = p.m
    if m == 1:
        w = np.ones(1)
        r = float(np.linalg.norm(p.imbalance(w)))
        return BalancingSolution(w, p.objective(w), r, 0, True, 0.0, 0, ((0, p.objective(w), 0.0),))

    newton_its = 0
    x = np.full(m, 1.0 / m)
    if p.lam > 0:
        w0, newton_its = _dual_newton(p)
        if np.all(np.isfinite(w0)) and w0.sum() > 0:
            # rescale rather than project: keeps exact zeros off the support
            w0 = w0 / w0.sum()
            if p.kkt_residual(w0) > p.tol:
                refined = _support_refine(p, w0)
                if refined is not None and p.kkt_residual(refined) < p.kkt_residual(w0):
                    w0 = refined
            if p.objective(w0) <= p.objective(x):
                x = w0

    L = p.lipschitz()
    fx = p.objective(x)
    kkt = p.kkt_residual(x)
    rows: list[tuple[int, float, float]] = [(0, fx, kkt)] if trace else []
    y = x.copy()
    tk = 1.0
    it = 0
    while kkt > p.tol and it < p.max_iter:
        it += 1
        z = project_simplex(y - p.gradient(y) / L)
        fz = p.objective(z)
        if fz > fx:
            # momentum overshot: restart with a plain projected-gradient step
            tk = 1.0
            z = project_simplex(x - p.gradient(x) / L)
            fz = p.objective(z)
            if fz > fx:
                z, fz = x, fx
            y = z.copy()
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
            y = z + ((tk - 1.0) / t_next) * (z - x)
            tk = t_next
        stalled = np.array_equal(z, x)
        x, fx = z, fz
        kkt = p.kkt_residual(x)
        if trace:
            rows.append((it, fx, kkt))
        if stalled and tk == 1.0:
            break

    r = float(np.linalg.norm(p.imbalance(x)))
    return BalancingSolution(
        control_weights=x,
        objective=fx,
        imbalance_norm=r,
        iterations=it,
        converged=kkt <= p.tol,
        kkt_residual=kkt,
        newton_iterations=newton_its,
        trace=tuple(rows),
    )


def att_balancing_weights(
    d: Dataset,
    lam: float = DEFAULT_LAMBDA,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    trace: bool = False,
) -> WeightVector:
    """Treated units get ``1 / n_treated``; controls get the simplex solution."""
    p = build_balancing_problem(d, lam, tol, max_iter)
    sol = solve_balancing_weights(p, trace=trace)
    w = np.empty(d.n)
    w[d.treated] = 1.0 / d.n_treated
    w[d.control] = sol.control_weights
    report = {
        "lambda": lam,
        "objective": sol.objective,
        "imbalance_norm": sol.imbalance_norm,
        "kkt_residual": sol.kkt_residual,
        "iterations": sol.iterations,
        "newton_iterations": sol.newton_iterations,
        "dropped_covariates": list(p.standardizer.dropped) if p.standardizer else [],
    }
    if trace:
        report["trace"] = sol.trace
    if not sol.converged:
        logger.warning(
            "balancing solver stopped after %d iterations with KKT residual %.3g",
            sol.iterations,
            sol.kkt_residual,
        )
    return WeightVector(w, Estimand.ATT, Method.BALANCING, sol.converged, report)


def imbalance_norm(d: Dataset, w: WeightVector) -> float:
    """L2 norm of the difference in Hajek-weighted arm means, standardized scale."""
    wt = w.weights
    st, sc = wt[d.treated].sum(), wt[d.control].sum()
    if st <= 0 or sc <= 0:
        raise EstimationError("an arm has zero total weight", code="ZERO_WEIGHT_SUM")
    S = Standardizer.from_dataset(d).transform(d.covariates)
    diff = wt[d.treated] @ S[d.treated] / st - wt[d.control] @ S[d.control] / sc
    return float(np.linalg.norm(diff))
