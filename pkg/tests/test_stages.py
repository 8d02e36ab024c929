import math

import numpy as np
import pytest

from analysis.maps import ep_map, pec_predict
from analysis.planner import SchedulePlan
from core.errors import DomainError
from core.pauli import I, X, Y, Z, ErrorFrame, PauliRates, depolarizing, sample_frame
from simulation.models import AbortReason, BasisStats
from simulation.stages import (
    check_block_budget,
    check_plan,
    check_test_budget,
    check_width_budget,
    choose_test_positions,
    ep_round,
    estimate_rates,
    grouping,
    pairing,
    pec_round,
    rates_from_stats,
    screen_estimate,
    sift,
)


def within_sigmas(observed: np.ndarray, expected: np.ndarray, n: int, sigmas: float = 4.0) -> bool:
    spread = np.sqrt(expected * (1.0 - expected) / n)
    return bool(np.all(np.abs(observed - expected) <= sigmas * spread + 1e-12))


def test_sift_keeps_a_third():
    frame = sift(3_000_000, depolarizing(0.1), seed=1)
    sigma = math.sqrt(3_000_000 * (1 / 3) * (2 / 3))
    assert abs(len(frame) - 1_000_000) <= 4 * sigma


def test_sift_noiseless_and_deterministic(noiseless):
    frame = sift(30_000, noiseless, seed=2)
    assert not frame.labels.any()
    assert sift(30_000, depolarizing(0.1), seed=2) == sift(30_000, depolarizing(0.1), seed=2)
    with pytest.raises(DomainError):
        sift(0, noiseless, seed=2)


def test_choose_test_positions_are_distinct():
    positions, tags = choose_test_positions(1000, 50, seed=4)
    assert positions.size == 150 and np.unique(positions).size == 150
    assert np.bincount(tags).tolist() == [50, 50, 50]
    with pytest.raises(DomainError):
        choose_test_positions(100, 50, seed=4)


def test_estimate_noiseless(noiseless):
    frame = sample_frame(noiseless, 10_000, seed=1)
    rates, stats, remaining = estimate_rates(frame, 100, seed=3)
    assert rates.allclose(noiseless)
    assert stats.total_tested == 300
    assert len(remaining) == 9_700
    assert remaining.generation == frame.generation + 1


def test_symmetric_inversion():
    stats = BasisStats(tested=(1000, 1000, 1000), mismatched=(200, 200, 200))
    assert rates_from_stats(stats).allclose(depolarizing(0.2))
    assert rates_from_stats(stats, symmetric=True).allclose(depolarizing(0.2))


def test_estimate_depolarizing_statistics(depolarizing_20):
    m = 100_000
    frame = sample_frame(depolarizing_20, 3 * m + 1000, seed=8)
    rates, stats, _ = estimate_rates(frame, m, seed=9)
    spread = math.sqrt(3.0) / 2.0 * math.sqrt(0.2 * 0.8 / m)
    for value in (rates.p_x, rates.p_y, rates.p_z):
        assert abs(value - 0.1) <= 4 * spread
    assert stats.standard_error(0) > 0.0


@pytest.mark.parametrize(
    "control, target, kept",
    [(Z, Z, I), (X, Y, Y), (Y, X, Y), (I, I, I), (I, Z, Z)],
)
def test_ep_round_pairs(control, target, kept):
    frame, survivors = ep_round(ErrorFrame.from_labels([control, target]), seed=1)
    assert survivors == 1
    assert frame.to_labels() == [kept]


def test_ep_round_discards_mismatched_x():
    frame, survivors = ep_round(ErrorFrame.from_labels([I, X]), seed=1)
    assert survivors == 0 and len(frame) == 0


@pytest.mark.parametrize(
    "group, out",
    [([X, X, I], I), ([Z, Z, I], Z), ([I, I, I], I), ([Y, Z, I], Y), ([X, I, I], X)],
)
def test_pec_round_groups(group, out):
    assert pec_round(ErrorFrame.from_labels(group), 3, seed=1).to_labels() == [out]


def test_pairing_and_grouping_shapes():
    control, target = pairing(11, seed=2)
    assert control.size == target.size == 5
    assert np.intersect1d(control, target).size == 0
    groups = grouping(23, 5, seed=2)
    assert groups.shape == (4, 5) and np.unique(groups).size == 20
    with pytest.raises(DomainError):
        grouping(20, 4, seed=2)


@pytest.mark.parametrize("bit_error", [0.05, 0.10, 0.20])
def test_ep_round_matches_ep_map(bit_error):
    rates = depolarizing(bit_error)
    n = 1_000_000
    frame, survivors = ep_round(sample_frame(rates, n, seed=21), seed=22)
    expected, survival = ep_map(rates)
    pairs = n // 2
    assert abs(survivors / pairs - survival) <= 4 * math.sqrt(survival * (1 - survival) / pairs)
    assert within_sigmas(frame.empirical_rates().as_array(), expected.as_array(), survivors)


@pytest.mark.parametrize("bit_error", [0.05, 0.10, 0.20])
@pytest.mark.parametrize("r", [3, 5, 7])
def test_pec_round_matches_pec_predict(bit_error, r):
    rates = depolarizing(bit_error)
    frame = pec_round(sample_frame(rates, 1_000_000, seed=31), r, seed=32)
    assert len(frame) == 1_000_000 // r
    expected = pec_predict(rates, r).exact_rates
    assert within_sigmas(frame.empirical_rates().as_array(), expected.as_array(), len(frame))


def neighbour_correlations(frame: ErrorFrame) -> np.ndarray:
    """Pearson correlation of x and z bits between consecutive output labels."""
    x = (frame.labels & 1).astype(float)
    z = ((frame.labels >> 1) & 1).astype(float)
    pairs = [(x[:-1], x[1:]), (z[:-1], z[1:]), (x[:-1], z[1:]), (z[:-1], x[1:])]
    return np.array([np.corrcoef(left, right)[0, 1] for left, right in pairs])


@pytest.mark.parametrize("stage", ["ep", "pec3", "pec5"])
def test_output_labels_are_uncorrelated(stage, depolarizing_20):
    frame = sample_frame(depolarizing_20, 1_000_000, seed=41)
    if stage == "ep":
        out, _ = ep_round(frame, seed=42)
    else:
        out = pec_round(frame, int(stage[3:]), seed=42)
    assert np.all(np.abs(neighbour_correlations(out)) <= 4.0 / math.sqrt(len(out) - 1))


def test_abort_checks():
    assert check_test_budget(100, 40).reason == AbortReason.EXHAUSTED
    assert check_test_budget(120, 40) is None

    stats = BasisStats(tested=(1000, 1000, 1000), mismatched=(300, 300, 300))
    assert screen_estimate(depolarizing(0.3), stats).reason == AbortReason.THRESHOLD
    stats = BasisStats(tested=(1000, 1000, 1000), mismatched=(100, 100, 100))
    assert screen_estimate(depolarizing(0.1), stats) is None

    assert check_plan(SchedulePlan(feasible=False, reason="threshold")).reason == AbortReason.THRESHOLD
    assert check_plan(SchedulePlan(feasible=False, reason="budget")).reason == AbortReason.BUDGET
    assert check_plan(SchedulePlan(feasible=True, k=0, r=3)) is None

    assert check_width_budget(9, 8).reason == AbortReason.BUDGET
    assert check_block_budget(48, 2).reason == AbortReason.EXHAUSTED
    assert check_block_budget(49, 2) is None


def test_basis_stats_validation():
    with pytest.raises(ValueError):
        BasisStats(tested=(10, 10, 10), mismatched=(11, 0, 0))
    assert BasisStats().total_tested == 0
    assert BasisStats().error_rate(0) == 0.0


def test_rates_from_stats_recovers_biased_channel():
    rates = PauliRates(p_i=0.8, p_x=0.1, p_y=0.04, p_z=0.06)
    n = 10_000
    mismatched = tuple(round(n * e) for e in (rates.bit_error, rates.p_y + rates.p_z, rates.p_x + rates.p_z))
    assert rates_from_stats(BasisStats(tested=(n, n, n), mismatched=mismatched)).allclose(rates, atol=1e-9)
