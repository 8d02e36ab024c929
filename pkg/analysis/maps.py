"""Closed-form error-rate dynamics of two-way key distillation.

Covers one and k rounds of LOCC2 entanglement purification (EP), one round of
[r,1,r] phase error correction (PEC) with exact and bounded predictions, the
log-space binomial tail bound, and the concatenated Steane level map.
"""

import logging
import math
from functools import lru_cache
from typing import List, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.optimize import bisect
from scipy.stats import binom

from core import hamming
from core.errors import DomainError, InvariantViolation
from core.pauli import PauliRates

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


class PecPrediction(BaseModel):
    """Bounds and exact values for one round of PEC."""

    model_config = ConfigDict(frozen=True)

    r: int
    bit_error_bound: float
    phase_error_bound: float
    phase_error_exp_bound: float
    bit_error_exact: float
    phase_error_exact: float
    exact_rates: PauliRates

    @property
    def total_error_exact(self) -> float:
        return self.bit_error_exact + self.phase_error_exact


def ep_map(rates: PauliRates) -> Tuple[PauliRates, float]:
    """One round of LOCC2 EP.

    Args:
        rates: Input Pauli rates

    Returns:
        Tuple of (rates of the kept control positions, probability that a pair survives)
    """
    p_i, p_x, p_y, p_z = rates.as_array()
    survival = (p_i + p_z) ** 2 + (p_x + p_y) ** 2
    if survival <= 0.0:
        raise InvariantViolation(f"EP survival probability vanished for {rates}")
    out = PauliRates.normalized(
        (p_i * p_i + p_z * p_z) / survival,
        (p_x * p_x + p_y * p_y) / survival,
        2.0 * p_x * p_y / survival,
        2.0 * p_i * p_z / survival,
    )
    return out, float(survival)


def _ep_log_terms(rates: PauliRates, k: int) -> Tuple[float, float, float, float]:
    """Logs of (p_i+p_z)^N, (p_x+p_y)^N, |p_i-p_z|^N, |p_x-p_y|^N scaled by max(a, b)^N, N = 2^k.

    Each ratio is written as 1 - gap with the gap formed from non-negative
    terms, so no precision is lost to cancellation before exponentiation.
    """
    p_i, p_x, p_y, p_z = rates.as_array()
    a, b = p_i + p_z, p_x + p_y
    n = float(2 ** k)
    scale = max(a, b)
    gap_c = 2.0 * min(p_i, p_z)
    gap_d = 2.0 * min(p_x, p_y)
    if a >= b:
        gaps = (0.0, (a - b) / scale, gap_c / scale, (a - b + gap_d) / scale)
    else:
        gaps = ((b - a) / scale, 0.0, (b - a + gap_c) / scale, gap_d / scale)
    with np.errstate(divide="ignore"):
        logs = n * np.log1p(-np.clip(np.array(gaps), 0.0, 1.0))
    return tuple(float(v) for v in logs)


def ep_map_k(rates: PauliRates, k: int) -> PauliRates:
    """Closed form for k rounds of LOCC2 EP.

    The normalizer is (p_i + p_z)^{2^k} + (p_x + p_y)^{2^k}, which makes the
    four numerators sum to one.
    """
    if k < 0:
        raise DomainError(f"number of EP rounds must be non-negative, got {k}")
    if k == 0:
        return rates
    log_a, log_b, log_c, log_d = _ep_log_terms(rates, k)
    t_a, t_b = math.exp(log_a), math.exp(log_b)
    t_c, t_d = math.exp(log_c), math.exp(log_d)
    norm = 2.0 * (t_a + t_b)
    # differences via expm1 to keep p_z and p_y accurate when they are tiny
    diff_ac = -t_a * math.expm1(log_c - log_a) if t_a > 0.0 else 0.0
    diff_bd = -t_b * math.expm1(log_d - log_b) if t_b > 0.0 else 0.0
    return PauliRates.normalized(
        (t_a + t_c) / norm,
        (t_b + t_d) / norm,
        diff_bd / norm,
        diff_ac / norm,
    )


def ep_log_margins(rates: PauliRates, k: int) -> Tuple[float, float]:
    """Log of the bit error rate and of the phase margin 1/2 - p_y - p_z after k EP rounds.

    Stays finite long after the rates themselves underflow, which the planner
    needs when it searches large k near the threshold.
    """
    if k == 0:
        margin = 0.5 - rates.phase_error
        with np.errstate(divide="ignore"):
            log_bit = float(np.log(rates.bit_error))
        return log_bit, (math.log(margin) if margin > 0.0 else -math.inf)
    log_a, log_b, log_c, log_d = _ep_log_terms(rates, k)
    log_norm = float(np.logaddexp(log_a, log_b))
    log_bit = log_b - log_norm
    log_margin = float(np.logaddexp(log_c, log_d)) - LN2 - log_norm
    return log_bit, log_margin


def _check_pec_width(r: int) -> None:
    if r < 3 or r % 2 == 0:
        raise DomainError(f"PEC width must be odd and at least 3, got {r}")


def _bit_error_after_pec(bit: Union[float, np.ndarray], r: Union[int, np.ndarray]):
    """Probability of odd X-parity among r positions: (1 - (1 - 2b)^r) / 2."""
    if bit < 0.5:
        return -0.5 * np.expm1(r * np.log1p(-2.0 * bit))
    return 0.5 * (1.0 - np.power(1.0 - 2.0 * bit, r))


def pec_marginals(rates: PauliRates, r: Union[int, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Exact bit and phase error rates after one PEC round, vectorised over r."""
    widths = np.asarray(r, dtype=np.int64)
    bit = _bit_error_after_pec(rates.bit_error, widths)
    phase = binom.sf((widths - 1) // 2, widths, rates.phase_error)
    return np.asarray(bit, dtype=float), np.asarray(phase, dtype=float)


def _pec_joint(rates: PauliRates, r: int) -> PauliRates:
    """Joint output distribution of (X-parity, phase majority) over r i.i.d. positions.

    Conditions on the number m of phase-afflicted positions: given m, each of
    them carries an X component with probability p_y / (p_y + p_z) and each
    of the others with probability p_x / (p_i + p_x), so the parity is even
    with probability (1 + (1 - 2 alpha)^m (1 - 2 beta)^(r - m)) / 2.
    """
    phase = rates.phase_error
    clean = rates.p_i + rates.p_x
    alpha = rates.p_y / phase if phase > 0.0 else 0.0
    beta = rates.p_x / clean if clean > 0.0 else 0.0
    m = np.arange(r + 1)
    weights = binom.pmf(m, r, phase)
    bias = np.power(1.0 - 2.0 * alpha, m) * np.power(1.0 - 2.0 * beta, r - m)
    flipped = m >= (r + 1) // 2
    even = weights * (1.0 + bias) / 2.0
    odd = weights * (1.0 - bias) / 2.0
    return PauliRates.normalized(
        float(even[~flipped].sum()),
        float(odd[~flipped].sum()),
        float(odd[flipped].sum()),
        float(even[flipped].sum()),
    )


def pec_predict(rates: PauliRates, r: int) -> PecPrediction:
    """Predict one round of [r,1,r] majority-vote PEC.

    Args:
        rates: Input Pauli rates
        r: Odd group width, at least 3

    Returns:
        PecPrediction with the printed bounds, exact marginals and exact joint rates
    """
    _check_pec_width(r)
    clean = rates.p_i + rates.p_x
    phase = rates.phase_error

    product = 4.0 * clean * phase
    phase_bound = math.exp(0.5 * r * math.log(product)) if product > 0.0 else 0.0
    if phase < 0.5:
        exp_bound = math.exp(-2.0 * r * (0.5 - phase) ** 2)
    else:
        exp_bound = 1.0

    bit_exact, phase_exact = pec_marginals(rates, r)
    return PecPrediction(
        r=r,
        bit_error_bound=r * rates.bit_error,
        phase_error_bound=min(phase_bound, 1.0),
        phase_error_exp_bound=exp_bound,
        bit_error_exact=float(bit_exact),
        phase_error_exact=float(phase_exact),
        exact_rates=_pec_joint(rates, r),
    )


def binomial_tail_bound(n: int, lam: float, p: float) -> float:
    """Upper bound on P[Bin(n, p) <= lam * n] for 0 < lam < p < 1, evaluated in log space."""
    if not 0.0 < lam < p < 1.0:
        raise DomainError(f"binomial tail bound needs 0 < lambda < p < 1, got lambda={lam}, p={p}")
    log_bound = n * (
        -lam * math.log(lam)
        - (1.0 - lam) * math.log1p(-lam)
        + lam * math.log(p)
        + (1.0 - lam) * math.log1p(-p)
    )
    return math.exp(min(log_bound, 0.0))


def steane_level_map(lam: float) -> float:
    """Probability of two or more errors among seven: one concatenation level.

    Summed term by term so small inputs keep full relative precision.
    """
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"error rate must be in [0, 1], got {lam}")
    j = np.arange(2, 8)
    return float(np.sum(binom.pmf(j, 7, lam)))


@lru_cache(maxsize=None)
def steane_threshold() -> float:
    """Smallest positive fixed point of :func:`steane_level_map` (about 5.8%)."""
    root = bisect(lambda lam: steane_level_map(lam) - lam, 0.01, 0.5, xtol=1e-12)
    logger.debug("Steane fixed point %.12f", root)
    return float(root)


def steane_exact_logical_rate(lam: float) -> float:
    """Exact logical-X rate of one Steane level under i.i.d. pure-X noise.

    Enumerates all 2^7 patterns against the syndrome decoder; it never
    exceeds :func:`steane_level_map`, which counts every multi-error pattern
    as a failure.
    """
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"error rate must be in [0, 1], got {lam}")
    weights = np.power(lam, hamming.WEIGHT) * np.power(1.0 - lam, 7 - hamming.WEIGHT.astype(int))
    return float(np.sum(weights * hamming.LOGICAL))


def alternating_schedule(rates: PauliRates, rounds: int) -> List[Tuple[str, PauliRates]]:
    """Fixed alternation of one EP round and one [3,1,3] PEC round.

    This is the non-adaptive procedure the planner improves on; kept for
    side-by-side comparison.
    """
    if rounds < 0:
        raise DomainError(f"rounds must be non-negative, got {rounds}")
    stages = [("input", rates)]
    current = rates
    for index in range(1, rounds + 1):
        current, _ = ep_map(current)
        stages.append((f"ep{index}", current))
        current = pec_predict(current, 3).exact_rates
        stages.append((f"pec{index}", current))
    return stages
