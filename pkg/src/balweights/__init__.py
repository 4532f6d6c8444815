"""Propensity, overlap and balancing weights for ATT/ATO estimation."""

__version__ = "0.1.0"

from .balancing import (
    BalancingProblem,
    BalancingSolution,
    att_balancing_weights,
    build_balancing_problem,
    imbalance_norm,
    project_simplex,
    solve_balancing_weights,
)
from .data import (
    BalanceTable,
    Dataset,
    EffectEstimate,
    Estimand,
    Method,
    TruthRecord,
    WeightVector,
    uniform_weights,
    validate_dataset,
)
from .diagnostics import balance_report, percent_bias_reduction, standardized_differences
from .errors import BalweightsError, DataError, EstimationError, RankDeficientError, SeparationError
from .estimation import effect_stderr, effective_sample_size, weighted_effect
from .propensity import (
    FitOptions,
    LogisticModel,
    fit_logistic,
    model_weights,
    predict_propensity,
    propensity_weights,
)
from .simulation import (
    DGP,
    ScenarioConfig,
    ScenarioResult,
    SimMethod,
    generate_dgp1,
    generate_dgp2,
    generate_dgp3,
    run_scenario,
    summarize_grid,
)
