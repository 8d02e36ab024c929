"""Pauli-frame stages of the six-state scheme.

Each stage maps the joint Alice/Bob error frame to the frame of the positions
that survive it. The index helpers (test selection, pairing, grouping,
permutation) are shared with the session parties so both execute the same
rearrangements from the same agreed seed.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np

from analysis.planner import SchedulePlan, depolarizing_threshold, ep_converges
from core.errors import DomainError
from core.pauli import Basis, ErrorFrame, PauliRates, anticommute_mask, sample_codes
from core.seeding import make_rng

from .models import Abort, AbortReason, BasisStats

logger = logging.getLogger(__name__)

N_BASES = 3
BLOCK_SIZE = 7
TEST_BASES = (Basis.Z, Basis.X, Basis.Y)


def basis_choices(n_sent: int, seed: int, party: str) -> np.ndarray:
    """Uniform basis choices (0=Z, 1=X, 2=Y) for every qubit a party prepares or measures."""
    return make_rng(seed, party, "bases").integers(0, N_BASES, n_sent, dtype=np.int8)


def sift(n_sent: int, rates: PauliRates, seed: int) -> ErrorFrame:
    """Keep positions whose preparation and measurement bases agree.

    Each position survives with probability 1/3. Surviving positions carry
    i.i.d. labels drawn from ``rates``.
    """
    if n_sent <= 0:
        raise DomainError(f"n_sent must be positive, got {n_sent}")
    kept = basis_choices(n_sent, seed, "alice") == basis_choices(n_sent, seed, "bob")
    n_kept = int(np.count_nonzero(kept))
    labels = sample_codes(rates, n_kept, make_rng(seed, "channel"))
    logger.debug("Sifted %d of %d positions", n_kept, n_sent)
    return ErrorFrame(labels=labels, origin_seed=seed)


def choose_test_positions(n: int, m_per_basis: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Pick 3 * m_per_basis distinct positions and tag m of them with each basis.

    Returns:
        Tuple of (positions, basis tags), both of length 3 * m_per_basis
    """
    if m_per_basis < 0:
        raise DomainError(f"m_per_basis must be non-negative, got {m_per_basis}")
    total = N_BASES * m_per_basis
    if total > n:
        raise DomainError(f"cannot test {total} positions out of {n}")
    positions = make_rng(seed, "test").permutation(n)[:total]
    tags = np.repeat(np.array([int(b) for b in TEST_BASES], dtype=np.int8), m_per_basis)
    return positions, tags


def basis_stats(flips: np.ndarray, tags: np.ndarray) -> BasisStats:
    tested = tuple(int(np.count_nonzero(tags == b)) for b in TEST_BASES)
    mismatched = tuple(int(np.count_nonzero(flips & (tags == b))) for b in TEST_BASES)
    return BasisStats(tested=tested, mismatched=mismatched)


def rates_from_stats(stats: BasisStats, symmetric: bool = False) -> PauliRates:
    """Invert per-basis mismatch rates into Pauli rates.

    e_Z = p_x + p_y, e_X = p_y + p_z and e_Y = p_x + p_z. With ``symmetric``
    the estimate is forced to p_x = p_y = p_z.
    """
    e_z = stats.error_rate(Basis.Z)
    e_x = stats.error_rate(Basis.X)
    e_y = stats.error_rate(Basis.Y)
    if symmetric:
        each = (e_z + e_x + e_y) / 6.0
        return PauliRates.normalized(1.0 - 3.0 * each, each, each, each)
    p_x = (e_z + e_y - e_x) / 2.0
    p_y = (e_z + e_x - e_y) / 2.0
    p_z = (e_x + e_y - e_z) / 2.0
    return PauliRates.normalized(1.0 - (e_z + e_x + e_y) / 2.0, p_x, p_y, p_z)


def estimate_rates(
    frame: ErrorFrame, m_per_basis: int, seed: int, symmetric: bool = False
) -> Tuple[PauliRates, BasisStats, ErrorFrame]:
    """Sacrifice test positions to estimate the channel.

    Args:
        frame: Sifted frame
        m_per_basis: Positions tested in each of the three bases
        seed: Agreed seed for the test selection
        symmetric: Force the estimate to be depolarizing

    Returns:
        Tuple of (estimated rates, per-basis counts, frame without the tested positions)
    """
    positions, tags = choose_test_positions(len(frame), m_per_basis, seed)
    flips = anticommute_mask(frame.labels[positions], tags)
    stats = basis_stats(flips, tags)
    if not stats.total_tested:
        logger.warning("No test positions; estimating a noiseless channel")
    keep = np.ones(len(frame), dtype=bool)
    keep[positions] = False
    return rates_from_stats(stats, symmetric), stats, frame.next(frame.labels[keep])


def check_test_budget(n: int, m_per_basis: int) -> Optional[Abort]:
    if N_BASES * m_per_basis > n:
        return Abort(AbortReason.EXHAUSTED, f"{n} sifted positions cannot cover {N_BASES * m_per_basis} tests")
    return None


def screen_estimate(rates: PauliRates, stats: BasisStats) -> Optional[Abort]:
    """Abort rule for the estimated channel.

    The run stops when the estimated bit error is within two standard errors
    of the depolarizing threshold, or when EP cannot converge on the estimate.
    """
    limit = depolarizing_threshold().bit_error
    n_z = stats.tested[Basis.Z]
    bit = rates.bit_error
    spread = math.sqrt(bit * (1.0 - bit) / n_z) if n_z else 0.0
    if bit >= limit - 2.0 * spread or not ep_converges(rates):
        logger.info("Estimated bit error %.4f is too close to the threshold %.4f", bit, limit)
        return Abort(AbortReason.THRESHOLD, f"estimated bit error {bit:.4f}")
    return None


def check_plan(plan: SchedulePlan) -> Optional[Abort]:
    if plan.feasible:
        return None
    reason = AbortReason.THRESHOLD if plan.reason == "threshold" else AbortReason.BUDGET
    return Abort(reason, f"no schedule ({plan.reason})")


def check_width_budget(r: int, n: int) -> Optional[Abort]:
    """PEC needs at least one full group of r bits."""
    if r > n:
        return Abort(AbortReason.BUDGET, f"r={r} exceeds {n} remaining bits")
    return None


def check_block_budget(n: int, L: int) -> Optional[Abort]:
    if n < BLOCK_SIZE ** L:
        return Abort(AbortReason.EXHAUSTED, f"{n} bits cannot fill a level-{L} block")
    return None


def pairing(n: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Random perfect matching of n positions as (control, target); an odd leftover is dropped."""
    order = make_rng(seed, "pairing").permutation(n)
    pairs = n // 2
    return order[0 : 2 * pairs : 2], order[1 : 2 * pairs : 2]


def ep_round(frame: ErrorFrame, seed: int) -> Tuple[ErrorFrame, int]:
    """One LOCC2 EP round.

    A pair is kept iff the control and target x bits agree; the kept control
    picks up the target's z bit.
    """
    control, target = pairing(len(frame), seed)
    c = frame.labels[control]
    t = frame.labels[target]
    keep = (c & 1) == (t & 1)
    out = c[keep] ^ (t[keep] & 2)
    survivors = int(out.size)
    logger.debug("EP round kept %d of %d pairs", survivors, control.size)
    return frame.next(out), survivors


def check_width(r: int) -> None:
    if r < 3 or r % 2 == 0:
        raise DomainError(f"PEC width must be odd and at least 3, got {r}")


def grouping(n: int, r: int, seed: int) -> np.ndarray:
    """Random partition of n positions into floor(n / r) groups of r, as a (groups, r) index array."""
    check_width(r)
    order = make_rng(seed, "grouping").permutation(n)
    groups = n // r
    return order[: groups * r].reshape(groups, r)


def pec_round(frame: ErrorFrame, r: int, seed: int) -> ErrorFrame:
    """One [r,1,r] PEC round: X parity and strict phase majority per group."""
    groups = frame.labels[grouping(len(frame), r, seed)]
    parity = np.bitwise_xor.reduce(groups & 1, axis=1)
    majority = (((groups >> 1) & 1).sum(axis=1) > r // 2).astype(np.uint8)
    return frame.next((parity | (majority << 1)).astype(np.uint8))


def permutation(n: int, seed: int) -> np.ndarray:
    """Shared random permutation applied before Steane decoding."""
    return make_rng(seed, "permute").permutation(n)
