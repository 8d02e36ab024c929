"""Adaptive distillation planning.

Chooses how many LOCC2 EP rounds (k) to run, the PEC width (r) and the
number of concatenated Steane levels (L) from estimated Pauli rates, and
locates the depolarizing error threshold of the whole procedure.
"""

import logging
import math
from typing import Iterable, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import settings
from core.errors import DomainError, InfeasibleError
from core.pauli import PauliRates, depolarizing

from .maps import (
    ep_log_margins,
    ep_map,
    ep_map_k,
    pec_marginals,
    pec_predict,
    steane_level_map,
    steane_threshold,
)

logger = logging.getLogger(__name__)

CONVERGENCE_SLACK = 1e-12
MAX_STEANE_LEVELS = 256
LOG7 = math.log(7.0)


class ThresholdPoint(NamedTuple):
    bit_error: float
    channel_error: float
    p_i_min: float


class PlannerConfig(BaseModel):
    """Targets and search limits for :func:`plan_schedule`."""

    model_config = ConfigDict(frozen=True)

    error_target: float = Field(default_factory=lambda: settings.ERROR_TARGET)
    key_fidelity_epsilon: float = Field(default_factory=lambda: settings.KEY_FIDELITY_EPSILON)
    n_sifted: Optional[int] = None
    max_k: int = Field(default_factory=lambda: settings.MAX_K, ge=0)
    r_max: int = Field(default_factory=lambda: settings.R_MAX, ge=3)
    steane_margin: float = Field(default_factory=lambda: settings.STEANE_MARGIN, ge=0.0)

    @model_validator(mode="after")
    def _check_targets(self) -> "PlannerConfig":
        if not 0.0 < self.error_target < steane_threshold():
            raise DomainError(
                f"error target must lie in (0, {steane_threshold():.4f}), got {self.error_target}"
            )
        if not 0.0 < self.key_fidelity_epsilon < 1.0:
            raise DomainError(f"key fidelity epsilon must lie in (0, 1), got {self.key_fidelity_epsilon}")
        if self.n_sifted is not None and self.n_sifted < 0:
            raise DomainError(f"n_sifted must be non-negative, got {self.n_sifted}")
        return self

    @property
    def error_limit(self) -> float:
        """Post-PEC error ceiling: min(target, Steane root - margin)."""
        return min(self.error_target, steane_threshold() - self.steane_margin)


class SchedulePlan(BaseModel):
    """A chosen (k, r, L) schedule with its predicted stage-by-stage rates."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    feasible: bool
    k: int = 0
    r: Optional[int] = None
    L: int = 0
    stage_rates: List[PauliRates] = Field(default_factory=list)
    predicted_final_error: float = 1.0
    predicted_yield: float = 0.0
    log_yield: float = -math.inf
    log_r: Optional[float] = None
    asymptotic: bool = False
    predicted_key_error: Optional[float] = None
    predicted_key_length: Optional[int] = None
    reason: Optional[str] = None


def ep_converges(rates: PauliRates) -> bool:
    """Whether repeated EP followed by one PEC round can drive the error to zero.

    True iff (p_i - p_z)^2 > (p_i + p_z)(p_x + p_y); the comparison is strict
    and ignores differences below rounding level.
    """
    lhs = (rates.p_i - rates.p_z) ** 2
    rhs = (rates.p_i + rates.p_z) * (rates.p_x + rates.p_y)
    return lhs - rhs > CONVERGENCE_SLACK


def depolarizing_threshold() -> ThresholdPoint:
    """Closed-form depolarizing threshold from the positive root of 20 p^2 - 10 p - 1 = 0."""
    p_i_min = (10.0 + math.sqrt(180.0)) / 40.0
    return ThresholdPoint(
        bit_error=2.0 * (1.0 - p_i_min) / 3.0,
        channel_error=1.0 - p_i_min,
        p_i_min=p_i_min,
    )


def _odd_widths(r_cap: int) -> np.ndarray:
    return np.arange(3, r_cap + 1, 2, dtype=np.int64)


def _no_width_can_work(rates: PauliRates, limit: float, r_cap: int) -> bool:
    """Cheap rejection: bit error only grows with r and phase error only shrinks."""
    if rates.phase_error >= 0.5:
        return True
    bit_low, _ = pec_marginals(rates, 3)
    r_top = r_cap if r_cap % 2 else r_cap - 1
    _, phase_low = pec_marginals(rates, r_top)
    return float(bit_low) + float(phase_low) >= limit


def _qualifying_widths(rates: PauliRates, limit: float, r_cap: int) -> Tuple[np.ndarray, np.ndarray]:
    """All odd r in [3, r_cap] whose exact post-PEC bit + phase error is below ``limit``."""
    if r_cap < 3 or _no_width_can_work(rates, limit, r_cap):
        return np.empty(0, dtype=np.int64), np.empty(0)
    widths = _odd_widths(r_cap)
    bit, phase = pec_marginals(rates, widths)
    total = bit + phase
    ok = total < limit
    return widths[ok], total[ok]


def choose_r(
    rates_after_k: PauliRates,
    error_target: float,
    r_max: Optional[int] = None,
    steane_margin: Optional[float] = None,
) -> Optional[int]:
    """Smallest odd PEC width meeting the post-PEC error target.

    Args:
        rates_after_k: Rates after the EP rounds
        error_target: Target for exact post-PEC bit + phase error
        r_max: Largest width searched
        steane_margin: Distance kept below the Steane fixed point

    Returns:
        The width, or None if no odd r <= r_max qualifies
    """
    r_max = settings.R_MAX if r_max is None else r_max
    margin = settings.STEANE_MARGIN if steane_margin is None else steane_margin
    limit = min(error_target, steane_threshold() - margin)
    widths, _ = _qualifying_widths(rates_after_k, limit, r_max)
    return int(widths[0]) if widths.size else None


def _level_sequence(lam0: float, levels: int) -> List[float]:
    sequence = [lam0]
    for _ in range(levels):
        sequence.append(steane_level_map(sequence[-1]))
    return sequence


def steane_levels_needed(post_pec_error: float, epsilon: float, n_blocks: int) -> int:
    """Smallest L with n_blocks * lambda_L <= epsilon.

    Raises:
        InfeasibleError: if the input error is not below the Steane fixed point
    """
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if post_pec_error >= steane_threshold():
        raise InfeasibleError(
            f"post-PEC error {post_pec_error:.4f} is not below the Steane threshold {steane_threshold():.4f}"
        )
    lam = post_pec_error
    for level in range(MAX_STEANE_LEVELS + 1):
        if n_blocks * lam <= epsilon:
            return level
        lam = steane_level_map(lam)
    raise InfeasibleError(f"no concatenation depth up to {MAX_STEANE_LEVELS} reaches epsilon={epsilon}")


def _fit_levels(lam0: float, epsilon: float, n_pec: int) -> Optional[Tuple[int, int, float]]:
    """Smallest L whose n_pec // 7^L blocks meet the key-failure budget.

    Returns:
        (L, n_blocks, lambda_L), or None when the bits run out first
    """
    if lam0 >= steane_threshold():
        return None
    lam = lam0
    level = 0
    while True:
        n_blocks = n_pec // 7 ** level
        if n_blocks == 0:
            return None
        if n_blocks * lam <= epsilon:
            return level, n_blocks, lam
        lam = steane_level_map(lam)
        level += 1


def _infeasible(reason: str) -> SchedulePlan:
    logger.info("No feasible schedule: %s", reason)
    return SchedulePlan(feasible=False, reason=reason)


def _ep_stages(rates: PauliRates, max_k: int) -> Tuple[List[PauliRates], List[float]]:
    """Rates after 0..max_k EP rounds and the survival probability of each round."""
    stages = [rates]
    survivals = []
    for k in range(1, max_k + 1):
        _, survival = ep_map(stages[-1])
        survivals.append(survival)
        stages.append(ep_map_k(rates, k))
    return stages, survivals


def _plan_exact_unbounded(stages, survivals, config: PlannerConfig) -> Optional[SchedulePlan]:
    limit = config.error_limit
    for k, current in enumerate(stages):
        widths, totals = _qualifying_widths(current, limit, config.r_max)
        if not widths.size:
            continue
        r = int(widths[0])
        lam0 = float(totals[0])
        level = steane_levels_needed(lam0, config.key_fidelity_epsilon, 1)
        lam_L = _level_sequence(lam0, level)[-1]
        log_yield = sum(math.log(s / 2.0) for s in survivals[:k]) - math.log(r) - level * LOG7
        return SchedulePlan(
            feasible=True,
            k=k,
            r=r,
            L=level,
            stage_rates=stages[1 : k + 1] + [pec_predict(current, r).exact_rates],
            predicted_final_error=lam0,
            predicted_yield=math.exp(log_yield),
            log_yield=log_yield,
            log_r=math.log(r),
            predicted_key_error=lam_L,
        )
    return None


def _plan_asymptotic(rates: PauliRates, stages, survivals, config: PlannerConfig) -> Optional[SchedulePlan]:
    """Bound-based plan with r beyond r_max, evaluated in log space.

    r is set so the Hoeffding phase bound equals limit / 2; the plan holds
    when r times the bit error rate stays below limit / 2.
    """
    limit = config.error_limit
    log_half_limit = math.log(limit / 2.0)
    log_width_factor = math.log(math.log(2.0 / limit) / 2.0)
    for k in range(config.max_k + 1):
        log_bit, log_margin = ep_log_margins(rates, k)
        if not math.isfinite(log_margin):
            continue
        log_r = max(log_width_factor - 2.0 * log_margin, math.log(3.0))
        if log_r + log_bit >= log_half_limit:
            continue
        lam0 = math.exp(log_r + log_bit) + limit / 2.0
        level = steane_levels_needed(lam0, config.key_fidelity_epsilon, 1)
        r = None
        if log_r < 700.0:
            r = math.ceil(math.exp(log_r))
            r += 1 - r % 2
        log_yield = sum(math.log(s / 2.0) for s in survivals[:k]) - log_r - level * LOG7
        return SchedulePlan(
            feasible=True,
            k=k,
            r=r,
            L=level,
            stage_rates=stages[1 : k + 1],
            predicted_final_error=lam0,
            predicted_yield=math.exp(log_yield),
            log_yield=log_yield,
            log_r=log_r,
            asymptotic=True,
            predicted_key_error=_level_sequence(lam0, level)[-1],
        )
    return None


def _plan_finite(stages, survivals, config: PlannerConfig) -> Optional[SchedulePlan]:
    """Budgeted search: the first k admitting any (r, L) wins, and within
    that k the width giving the longest expected key is chosen."""
    limit = config.error_limit
    epsilon = config.key_fidelity_epsilon
    n_bits = float(config.n_sifted)
    for k, current in enumerate(stages):
        if k > 0:
            n_bits = math.floor(n_bits / 2.0) * survivals[k - 1]
        if n_bits < 3:
            break
        widths, totals = _qualifying_widths(current, limit, min(config.r_max, int(n_bits)))
        best = None
        for r, lam0 in zip(widths.tolist(), totals.tolist()):
            n_pec = int(n_bits // r)
            if n_pec == 0 or (best is not None and n_pec <= best[3]):
                break
            fitted = _fit_levels(lam0, epsilon, n_pec)
            if fitted is None:
                continue
            if best is None or fitted[1] > best[3]:
                best = (r, lam0) + fitted
        if best is None:
            continue
        r, lam0, level, n_blocks, lam_L = best
        log_yield = sum(math.log(s / 2.0) for s in survivals[:k]) - math.log(r) - level * LOG7
        return SchedulePlan(
            feasible=True,
            k=k,
            r=r,
            L=level,
            stage_rates=stages[1 : k + 1] + [pec_predict(current, r).exact_rates],
            predicted_final_error=lam0,
            predicted_yield=math.exp(log_yield),
            log_yield=log_yield,
            log_r=math.log(r),
            predicted_key_error=n_blocks * lam_L,
            predicted_key_length=n_blocks,
        )
    return None


def plan_schedule(rates: PauliRates, config: PlannerConfig) -> SchedulePlan:
    """Search k = 0..max_k, then r, then L for the first schedule meeting the targets.

    With ``config.n_sifted`` set, r may not exceed the expected number of
    remaining bits and the Steane stage must leave at least one block whose
    failure bound fits epsilon. With unbounded n, widths beyond r_max are
    resolved with the log-space bound criterion.

    Args:
        rates: Estimated Pauli rates of the sifted, untested positions
        config: Planner targets and limits

    Returns:
        A SchedulePlan; infeasibility is reported through ``feasible=False``
    """
    if not ep_converges(rates):
        return _infeasible("threshold")

    stages, survivals = _ep_stages(rates, config.max_k)
    if config.n_sifted is not None:
        plan = _plan_finite(stages, survivals, config)
        return plan if plan is not None else _infeasible("budget")

    plan = _plan_exact_unbounded(stages, survivals, config)
    if plan is None:
        plan = _plan_asymptotic(rates, stages, survivals, config)
    if plan is None:
        return _infeasible("search_limit")
    logger.debug("Planned k=%d r=%s L=%d (asymptotic=%s)", plan.k, plan.r, plan.L, plan.asymptotic)
    return plan


def threshold_sweep(lo: float, hi: float, tol: float, config: Optional[PlannerConfig] = None) -> float:
    """Bisect the depolarizing bit error at which planning stops being feasible.

    Planning uses unbounded n. If the lower bracket is already infeasible the
    lower bracket is returned (and logged); if the upper bracket is feasible
    the upper bracket is returned.
    """
    if not lo < hi:
        raise DomainError(f"threshold sweep needs lo < hi, got [{lo}, {hi}]")
    if tol <= 0.0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    config = (config or PlannerConfig()).model_copy(update={"n_sifted": None})

    def feasible(bit_error: float) -> bool:
        return plan_schedule(depolarizing(bit_error), config).feasible

    if not feasible(lo):
        logger.warning("Lower bracket %.6f is already infeasible", lo)
        return lo
    if feasible(hi):
        logger.warning("Upper bracket %.6f is still feasible", hi)
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def plan_table(bit_errors: Iterable[float], config: Optional[PlannerConfig] = None) -> pd.DataFrame:
    """One planning row per depolarizing bit error: bit_error, feasible, k, r, L, yield."""
    config = config or PlannerConfig()
    rows = []
    for bit_error in bit_errors:
        plan = plan_schedule(depolarizing(float(bit_error)), config)
        rows.append(
            {
                "bit_error": float(bit_error),
                "feasible": plan.feasible,
                "k": plan.k if plan.feasible else None,
                "r": plan.r if plan.feasible else None,
                "L": plan.L if plan.feasible else None,
                "yield": plan.predicted_yield,
            }
        )
    return pd.DataFrame(rows, columns=["bit_error", "feasible", "k", "r", "L", "yield"])
