import math

import numpy as np
import pytest

from analysis.maps import ep_map, ep_map_k, pec_predict, steane_threshold
from analysis.planner import (
    PlannerConfig,
    _ep_stages,
    _fit_levels,
    _qualifying_widths,
    choose_r,
    depolarizing_threshold,
    ep_converges,
    plan_schedule,
    plan_table,
    steane_levels_needed,
    threshold_sweep,
)
from core.errors import InfeasibleError
from core.pauli import PauliRates, depolarizing

CLOSED_FORM_THRESHOLD = 0.5 - 0.1 * math.sqrt(5.0)


def test_ep_converges_examples():
    assert ep_converges(depolarizing(0.25))
    assert not ep_converges(depolarizing(0.28))
    assert not ep_converges(depolarizing(CLOSED_FORM_THRESHOLD))


def test_depolarizing_threshold_closed_form():
    point = depolarizing_threshold()
    assert math.isclose(point.bit_error, CLOSED_FORM_THRESHOLD, abs_tol=1e-9)
    assert math.isclose(point.channel_error, 0.75 - 0.15 * math.sqrt(5.0), abs_tol=1e-9)
    assert abs(20 * point.p_i_min**2 - 10 * point.p_i_min - 1) < 1e-12


def test_choose_r_noiseless(noiseless):
    assert choose_r(noiseless, 0.05) == 3


def test_choose_r_after_two_ep_rounds():
    r = choose_r(ep_map_k(depolarizing(0.10), 2), 0.05)
    assert r is not None
    assert r % 2 == 1 and 3 < r < 100


def test_choose_r_none_when_bit_error_never_shrinks():
    rates = PauliRates(p_i=0.5, p_x=0.25, p_y=0.25, p_z=0.0)
    assert choose_r(rates, 0.05, r_max=101) is None


def test_steane_levels_needed():
    assert steane_levels_needed(0.0, 1e-3, 100) == 0
    level = steane_levels_needed(0.05, 1e-9, 1000)
    assert 0 < level < 20
    with pytest.raises(InfeasibleError):
        steane_levels_needed(0.06, 1e-3, 1)


def test_plan_noiseless_is_maximal(noiseless):
    plan = plan_schedule(noiseless, PlannerConfig())
    assert plan.feasible
    assert (plan.k, plan.r, plan.L) == (0, 3, 0)
    assert math.isclose(plan.predicted_yield, 1.0 / 3.0)


def test_plan_above_threshold_is_infeasible():
    plan = plan_schedule(depolarizing(0.28), PlannerConfig())
    assert not plan.feasible
    assert plan.reason == "threshold"


def test_plan_below_threshold_is_feasible():
    plan = plan_schedule(depolarizing(0.25), PlannerConfig())
    assert plan.feasible
    assert plan.k > 0
    assert plan.predicted_final_error < PlannerConfig().error_limit


def test_finite_plan_respects_the_budget():
    config = PlannerConfig(n_sifted=10_000_000, key_fidelity_epsilon=1e-3)
    plan = plan_schedule(depolarizing(0.10), config)
    assert plan.feasible
    assert plan.predicted_key_length > 0
    assert plan.predicted_key_error <= 1e-3
    assert plan.r <= 10_000_000


def test_finite_plan_runs_out_of_bits():
    plan = plan_schedule(depolarizing(0.20), PlannerConfig(n_sifted=50))
    assert not plan.feasible
    assert plan.reason == "budget"


def test_planner_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(error_target=steane_threshold() + 0.01)
    with pytest.raises(ValueError):
        PlannerConfig(key_fidelity_epsilon=0.0)
    assert PlannerConfig(error_target=0.057).error_limit < steane_threshold()


def test_threshold_sweep_matches_closed_form():
    found = threshold_sweep(0.20, 0.35, 1e-4)
    assert abs(found - CLOSED_FORM_THRESHOLD) < 5e-4


def test_threshold_sweep_lower_bracket_infeasible():
    assert threshold_sweep(0.3, 0.4, 1e-3) == 0.3


def test_plan_table_flips_once_at_threshold():
    table = plan_table([0.05 + 0.01 * i for i in range(26)])
    assert list(table.columns) == ["bit_error", "feasible", "k", "r", "L", "yield"]
    feasible = table.set_index(table["bit_error"].round(2))["feasible"]
    assert feasible[0.27] and not feasible[0.28]
    assert int((table["feasible"].astype(int).diff().abs() > 0).sum()) == 1


def test_plan_table_is_monotone_on_a_fine_grid():
    table = plan_table(np.linspace(0.0, 0.3, 50))
    feasible = table["feasible"].tolist()
    assert feasible == sorted(feasible, reverse=True)
    flip = feasible.index(False)
    assert table["bit_error"][flip - 1] < CLOSED_FORM_THRESHOLD < table["bit_error"][flip]


def test_threshold_sweep_at_fine_tolerance():
    found = threshold_sweep(0.20, 0.35, 1e-6)
    assert abs(found - CLOSED_FORM_THRESHOLD) < 1e-6


@pytest.mark.parametrize(
    "bit_error, n_sifted",
    [(0.0, None), (0.05, None), (0.15, None), (0.10, 10_000_000)],
)
def test_stage_rates_replay_to_the_predicted_error(bit_error, n_sifted):
    rates = depolarizing(bit_error)
    plan = plan_schedule(rates, PlannerConfig(n_sifted=n_sifted, key_fidelity_epsilon=1e-3))
    assert plan.feasible and not plan.asymptotic
    assert len(plan.stage_rates) == plan.k + 1

    current = rates
    for expected in plan.stage_rates[:-1]:
        current, _ = ep_map(current)
        assert current.allclose(expected, atol=1e-12)
    prediction = pec_predict(current, plan.r)
    assert prediction.exact_rates.allclose(plan.stage_rates[-1], atol=1e-12)
    total = prediction.bit_error_exact + prediction.phase_error_exact
    assert math.isclose(total, plan.predicted_final_error, abs_tol=1e-12)


def test_finite_plan_takes_the_longest_key_at_its_depth():
    config = PlannerConfig(n_sifted=10_000_000, key_fidelity_epsilon=1e-3)
    rates = depolarizing(0.10)
    plan = plan_schedule(rates, config)
    assert plan.feasible and plan.predicted_key_length > 0

    stages, survivals = _ep_stages(rates, plan.k)
    n_bits = float(config.n_sifted)
    for survival in survivals:
        n_bits = math.floor(n_bits / 2.0) * survival
    widths, totals = _qualifying_widths(stages[plan.k], config.error_limit, min(config.r_max, int(n_bits)))
    assert plan.r in widths.tolist()
    for r, lam0 in zip(widths.tolist(), totals.tolist()):
        n_pec = int(n_bits // r)
        if n_pec <= plan.predicted_key_length:
            break
        fitted = _fit_levels(lam0, config.key_fidelity_epsilon, n_pec)
        if fitted is not None:
            assert fitted[1] <= plan.predicted_key_length
