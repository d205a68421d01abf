"""Tail probabilities of supercritical Galton-Watson processes with
heavy-tailed offspring: exact simulators, rare-event estimators, analytic
tail approximations, distribution-class diagnostics, and sum-tail bounds.
"""

__version__ = "0.1.0"

from .offspring import (
    OffspringLaw,
    make_pareto_integer,
    make_discrete_weibull,
    make_log_corrected_index_one,
    make_lognormal_integer,
    make_finite_support,
    tune_to_mean,
    parse_law_spec,
)
from .rng import RngStreams
from .simulator import (
    TrajectoryRecord,
    EventFlags,
    simulate,
    simulate_with_events,
    simulate_forced_jump,
    simulate_batch,
)
from .classes import (
    ClassReport,
    check_dominated_varying,
    check_matuszewska,
    check_insensitive,
    check_sstar,
    check_rapid_variation,
    check_hazard_increment,
    check_hazard_slope,
)
from .asymptotics import (
    TailApproximation,
    RegimeTag,
    classify_regime,
    series_tail,
    series_tail_infinite,
    weibull_tail,
    weibull_corrected_lower,
    index_one_tail,
    var_wn,
    productive_generation_law,
    example1_regime,
    lemma32_lower,
)
from .bounds import (
    CenteredSummandLaw,
    BoundResult,
    truncated_mgf,
    chebyshev_sum_bound,
    prop22_bound,
    prop23_bound,
    exact_sum_tail,
    sstar_bound_harness,
)
from .estimators import (
    EstimatorResult,
    naive_mc,
    exact_convolution,
    big_jump_estimator,
    compare_to_asymptotics,
)

__all__ = [
    "OffspringLaw",
    "make_pareto_integer",
    "make_discrete_weibull",
    "make_log_corrected_index_one",
    "make_lognormal_integer",
    "make_finite_support",
    "tune_to_mean",
    "parse_law_spec",
    "RngStreams",
    "TrajectoryRecord",
    "EventFlags",
    "simulate",
    "simulate_with_events",
    "simulate_forced_jump",
    "simulate_batch",
    "ClassReport",
    "check_dominated_varying",
    "check_matuszewska",
    "check_insensitive",
    "check_sstar",
    "check_rapid_variation",
    "check_hazard_increment",
    "check_hazard_slope",
    "TailApproximation",
    "RegimeTag",
    "classify_regime",
    "series_tail",
    "series_tail_infinite",
    "weibull_tail",
    "weibull_corrected_lower",
    "index_one_tail",
    "var_wn",
    "productive_generation_law",
    "example1_regime",
    "lemma32_lower",
    "CenteredSummandLaw",
    "BoundResult",
    "truncated_mgf",
    "chebyshev_sum_bound",
    "prop22_bound",
    "prop23_bound",
    "exact_sum_tail",
    "sstar_bound_harness",
    "EstimatorResult",
    "naive_mc",
    "exact_convolution",
    "big_jump_estimator",
    "compare_to_asymptotics",
]
