import itertools
import math

import numpy as np
import pytest
from scipy.stats import binom

from analysis.maps import (
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
from core.errors import DomainError
from core.pauli import PauliRates


def random_rates(rng):
    return PauliRates.normalized(*rng.dirichlet(np.ones(4)))


def brute_force_pec(rates: PauliRates, r: int) -> np.ndarray:
    """Output (I, X, Y, Z) rates of one PEC round by enumerating all 4^r patterns."""
    probability = {0: rates.p_i, 1: rates.p_x, 2: rates.p_z, 3: rates.p_y}
    out = np.zeros(4)
    for pattern in itertools.product(range(4), repeat=r):
        weight = math.prod(probability[code] for code in pattern)
        parity = sum(code & 1 for code in pattern) % 2
        majority = int(sum(code >> 1 for code in pattern) > r // 2)
        out[{(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}[(parity, majority)]] += weight
    return out


def test_ep_map_fixed_points():
    rates, survival = ep_map(PauliRates(p_i=1.0, p_x=0.0, p_y=0.0, p_z=0.0))
    assert rates.allclose(PauliRates(p_i=1.0, p_x=0.0, p_y=0.0, p_z=0.0)) and survival == 1.0
    dephased = PauliRates(p_i=0.5, p_x=0.0, p_y=0.0, p_z=0.5)
    rates, survival = ep_map(dephased)
    # no X components, so every parity comparison agrees
    assert rates.allclose(dephased) and survival == 1.0


def test_ep_map_example(depolarizing_20):
    rates, survival = ep_map(depolarizing_20)
    assert math.isclose(survival, 0.68, abs_tol=1e-12)
    expected = np.array([0.50, 0.02, 0.02, 0.14]) / 0.68
    assert np.allclose(rates.as_array(), expected, atol=1e-12)


def test_ep_map_keeps_identity_majority():
    rng = np.random.default_rng(7)
    for _ in range(5000):
        p_i = rng.uniform(0.5 + 1e-6, 1.0)
        rest = rng.dirichlet(np.ones(3)) * (1.0 - p_i)
        rates, _ = ep_map(PauliRates.normalized(p_i, *rest))
        assert math.isclose(rates.as_array().sum(), 1.0, abs_tol=1e-12)
        assert rates.p_i > 0.5 and rates.p_z < 0.5


def test_ep_map_k_agrees_with_iteration():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        rates = random_rates(rng)
        k = int(rng.integers(0, 17))
        iterated = rates
        for _ in range(k):
            iterated, _ = ep_map(iterated)
        assert ep_map_k(rates, k).allclose(iterated, atol=1e-12)


def test_ep_map_k_large_k_limit(depolarizing_20):
    rates = ep_map_k(depolarizing_20, 12)
    assert rates.bit_error < 1e-12
    assert math.isclose(rates.p_i, 0.5, abs_tol=1e-9)
    assert math.isclose(rates.p_z, 0.5, abs_tol=1e-9)
    with pytest.raises(DomainError):
        ep_map_k(depolarizing_20, -1)


def test_ep_log_margins_track_rates(depolarizing_20):
    for k in range(0, 6):
        log_bit, log_margin = ep_log_margins(depolarizing_20, k)
        rates = ep_map_k(depolarizing_20, k)
        assert math.isclose(math.exp(log_bit), rates.bit_error, rel_tol=1e-9)
        assert math.isclose(math.exp(log_margin), 0.5 - rates.phase_error, rel_tol=1e-6)


def test_pec_predict_noiseless(noiseless):
    prediction = pec_predict(noiseless, 3)
    assert prediction.bit_error_exact == 0.0
    assert prediction.phase_error_exact == 0.0
    assert prediction.exact_rates.allclose(noiseless)


def test_pec_predict_depolarizing_example(depolarizing_20):
    prediction = pec_predict(depolarizing_20, 3)
    assert math.isclose(prediction.bit_error_exact, 0.392, abs_tol=1e-12)
    assert math.isclose(prediction.phase_error_exact, 0.104, abs_tol=1e-12)
    assert math.isclose(prediction.bit_error_bound, 0.6, abs_tol=1e-12)


@pytest.mark.parametrize("r", [3, 5])
def test_pec_exact_rates_match_enumeration(r):
    rng = np.random.default_rng(r)
    for _ in range(5):
        rates = random_rates(rng)
        prediction = pec_predict(rates, r)
        assert np.allclose(prediction.exact_rates.as_array(), brute_force_pec(rates, r), atol=1e-12)
        assert math.isclose(prediction.exact_rates.bit_error, prediction.bit_error_exact, abs_tol=1e-12)
        assert math.isclose(prediction.exact_rates.phase_error, prediction.phase_error_exact, abs_tol=1e-12)
        if prediction.bit_error_bound <= 1.0:
            assert prediction.bit_error_exact <= prediction.bit_error_bound + 1e-15
        if rates.phase_error < 0.5:
            assert prediction.phase_error_exact <= prediction.phase_error_bound + 1e-15


def test_pec_width_near_inverse_bit_error():
    rates = PauliRates(p_i=0.9498, p_x=0.0001, p_y=0.0001, p_z=0.05)
    r = int(round(0.01 / rates.bit_error)) | 1
    prediction = pec_predict(rates, r)
    assert prediction.bit_error_bound <= 0.011
    assert prediction.phase_error_exp_bound < 1e-6


def test_pec_marginals_vectorised(depolarizing_20):
    widths = np.array([3, 5, 7, 9])
    bit, phase = pec_marginals(depolarizing_20, widths)
    for r, b, p in zip(widths, bit, phase):
        single = pec_predict(depolarizing_20, int(r))
        assert math.isclose(b, single.bit_error_exact, abs_tol=1e-15)
        assert math.isclose(p, single.phase_error_exact, abs_tol=1e-15)


def test_pec_rejects_even_width(depolarizing_20):
    with pytest.raises(DomainError):
        pec_predict(depolarizing_20, 4)


@pytest.mark.parametrize("n, lam, p", [(10, 0.1, 0.5), (100, 0.2, 0.4)])
def test_binomial_tail_bound_dominates_exact_tail(n, lam, p):
    exact = binom.cdf(math.floor(lam * n), n, p)
    assert binomial_tail_bound(n, lam, p) >= exact


def test_binomial_tail_bound_tends_to_one():
    assert binomial_tail_bound(50, 0.3 - 1e-9, 0.3) > 0.999
    with pytest.raises(DomainError):
        binomial_tail_bound(10, 0.5, 0.4)


def test_steane_level_map_endpoints():
    assert steane_level_map(0.0) == 0.0
    assert math.isclose(steane_level_map(1.0), 1.0)
    assert math.isclose(steane_level_map(0.058), 0.058, abs_tol=5e-4)


def test_steane_level_map_is_increasing():
    values = np.array([steane_level_map(lam) for lam in np.linspace(0.0, 0.5, 501)])
    assert (np.diff(values) > 0.0).all()


def test_steane_threshold():
    root = steane_threshold()
    assert 0.0575 <= root <= 0.0585
    assert abs(steane_level_map(root) - root) < 1e-9


def test_steane_iteration_below_root_decreases():
    lam = 0.03
    for _ in range(8):
        following = steane_level_map(lam)
        assert following < lam
        lam = following
    assert lam < 1e-20


def test_exact_logical_rate_is_below_level_map():
    for lam in (0.001, 0.02, 0.05, 0.2):
        assert steane_exact_logical_rate(lam) <= steane_level_map(lam) + 1e-15


def test_alternating_schedule_shape(depolarizing_20):
    stages = alternating_schedule(depolarizing_20, 2)
    assert [name for name, _ in stages] == ["input", "ep1", "pec1", "ep2", "pec2"]
    assert stages[0][1] == depolarizing_20
