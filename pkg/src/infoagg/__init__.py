"""Information aggregation in CARA-normal asset markets with published reports."""

from .chatbot import AffineQuery, ChatbotConfig, LogisticQuery, chatbot_demo
from .equilibrium import (PrecisionCurve, aggregate_loading, fixed_point_map,
                          precision_sweep, price_precision, recover_theta, solve,
                          solve_baseline, solve_multi, solve_report, stability_probe,
                          vector_fixed_point)
from .inference import (JointGaussianObservation, SignalSet, condition_generic,
                        posterior_theta_multi, posterior_theta_report)
from .market import (ScenarioConfig, estimate_price_precision, lln_aggregate,
                     publisher_advantage_demo, run_replication, simulate)
from .params import (EquilibriumCoefficients, ModelParams, PosteriorBelief, Precision,
                     precision_of, validate)

__all__ = [
    "AffineQuery", "ChatbotConfig", "LogisticQuery", "chatbot_demo",
    "PrecisionCurve", "aggregate_loading", "fixed_point_map", "precision_sweep",
    "price_precision", "recover_theta", "solve", "solve_baseline", "solve_multi",
    "solve_report", "stability_probe", "vector_fixed_point",
    "JointGaussianObservation", "SignalSet", "condition_generic",
    "posterior_theta_multi", "posterior_theta_report",
    "ScenarioConfig", "estimate_price_precision", "lln_aggregate",
    "publisher_advantage_demo", "run_replication", "simulate",
    "EquilibriumCoefficients", "ModelParams", "PosteriorBelief", "Precision",
    "precision_of", "validate",
]

__version__ = "0.1.0"
