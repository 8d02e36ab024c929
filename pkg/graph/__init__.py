"""
Protocol workflow orchestration.
"""

from .coordinator import ProtocolCoordinator, run_protocol, run_trials, trial_configs

__all__ = ['ProtocolCoordinator', 'run_protocol', 'run_trials', 'trial_configs']
