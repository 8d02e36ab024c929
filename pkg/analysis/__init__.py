"""
Analytic error-rate maps and the adaptive distillation planner.
"""

from .maps import (
    PecPrediction,
    alternating_schedule,
    binomial_tail_bound,
    ep_log_margins,
    ep_map,
    ep_map_k,
    pec_marginals,
    pec_predict,
    steane_exact_logical_rate,
    steane_level_map,
    steane_threshold,
)
from .planner import (
    PlannerConfig,
    SchedulePlan,
    ThresholdPoint,
    choose_r,
    depolarizing_threshold,
    ep_converges,
    plan_schedule,
    plan_table,
    steane_levels_needed,
    threshold_sweep,
)

__all__ = [
    'PecPrediction',
    'PlannerConfig',
    'SchedulePlan',
    'ThresholdPoint',
    'alternating_schedule',
    'binomial_tail_bound',
    'choose_r',
    'depolarizing_threshold',
    'ep_converges',
    'ep_log_margins',
    'ep_map',
    'ep_map_k',
    'pec_marginals',
    'pec_predict',
    'plan_schedule',
    'plan_table',
    'steane_exact_logical_rate',
    'steane_level_map',
    'steane_levels_needed',
    'steane_threshold',
    'threshold_sweep',
]
