"""
Inside the balancing solver
===========================

Balancing weights solve a small quadratic program over the probability
simplex: minimize the squared imbalance ``||t - C'w||^2`` plus
``lam * ||w||^2``. This demo checks the solver against brute force and walks
the penalty path.
"""

import numpy as np

from balweights import BalancingProblem, att_balancing_weights, solve_balancing_weights
from balweights.simulation import generate, rep_rng

# %%
# Three controls and two covariates: small enough to search the whole
# simplex on a grid of spacing 1e-3.
p = BalancingProblem(target=[0.4, 0.4], control_covariates=[[0, 0], [1, 0], [0, 1]], lam=0.01)
sol = solve_balancing_weights(p, trace=True)
print("solver weights:", np.round(sol.control_weights, 6))
print(f"objective {sol.objective:.8f}, KKT residual {sol.kkt_residual:.1e}")

steps = 1000
best = (np.inf, None)
for i in range(steps + 1):
    for j in range(steps + 1 - i):
        w = np.array([i, j, steps - i - j]) / steps
        f = p.objective(w)
        if f < best[0]:
            best = (f, w)
print(f"grid optimum {best[0]:.8f} at {best[1]}")

# %%
# The penalty trades balance for dispersion. As lam grows the weights
# flatten toward uniform and the remaining imbalance grows.
d = generate("1", 500, 20.0, rep_rng(3, 0))
print("\n   lambda   imbalance   sum w^2   ESS control")
for lam in (0.0, 1e-4, 1e-2, 1.0, 100.0):
    w = att_balancing_weights(d, lam=lam, max_iter=50_000)
    c = w.weights[d.control]
    print(f"{lam:9.0e}  {w.solver_report['imbalance_norm']:10.2e}  {c @ c:8.5f}  {1 / (c @ c):10.1f}")
