"""
When the ATT and the ATO part ways
==================================

In the third design the treatment effect varies with covariates. If it
varies with covariates that also drive treatment (mode B), the overlap
population differs from the treated population and the two estimands
diverge. If it varies only with unrelated covariates (mode A) they agree.
"""

import numpy as np

from balweights.simulation import ScenarioConfig, run_scenario

for mode in ("3a", "3b"):
    res = run_scenario(ScenarioConfig(mode, 1.0, reps=200, seed=4))
    print(f"{mode.upper()}: mean true ATT {res.mean_true_att:.3f}, mean true ATO "
          f"{res.mean_true_ato:.3f}, mean |gap| {res.truth_gap_mean:.3f} "
          f"(se {res.truth_gap_mc_error:.4f})")
    for m, s in res.summaries.items():
        print(f"   {m.value:14s} bias vs ATT {s.bias_vs_att:+.3f}   bias vs ATO {s.bias_vs_ato:+.3f}")

# %%
# Under mode B the overlap weights track the ATO, not the ATT, so a
# "bias" against the ATT here reflects a different target, not an error.
gaps = np.array([abs(r.true_att - r.true_ato) for r in res.records if r.method.value == "OVERLAP"])
print(f"\n3B: the ATT-ATO gap exceeds 0.25 in {np.mean(gaps > 0.25):.0%} of replications")
