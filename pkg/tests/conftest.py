import pytest

from analysis.planner import PlannerConfig
from config import settings
from core.pauli import PauliRates, depolarizing
from simulation.models import SimConfig


@pytest.fixture(autouse=True)
def quiet_progress(monkeypatch):
    monkeypatch.setattr(settings, "SHOW_PROGRESS", False)


@pytest.fixture
def noiseless():
    return PauliRates(p_i=1.0, p_x=0.0, p_y=0.0, p_z=0.0)


@pytest.fixture
def depolarizing_20():
    return depolarizing(0.2)


@pytest.fixture
def noiseless_config(noiseless):
    return SimConfig(n_sent=60_000, rates=noiseless, test_bits_per_basis=500, seed=11)


@pytest.fixture
def noisy_config():
    """Small depolarizing(0.05) run that plans one EP round and yields a short key."""
    return SimConfig(
        n_sent=600_000,
        rates=depolarizing(0.05),
        test_bits_per_basis=2000,
        planner_config=PlannerConfig(key_fidelity_epsilon=0.01),
        seed=5,
    )


@pytest.fixture
def hopeless_config():
    return SimConfig(n_sent=60_000, rates=depolarizing(0.30), test_bits_per_basis=500, seed=3)
