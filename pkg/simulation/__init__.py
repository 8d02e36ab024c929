"""
Monte Carlo simulation of the six-state scheme on Pauli frames.
"""

from .models import AbortReason, BasisStats, SimConfig, SimReport
from .stages import (
    basis_choices,
    choose_test_positions,
    ep_round,
    estimate_rates,
    grouping,
    pairing,
    pec_round,
    permutation,
    rates_from_stats,
    screen_estimate,
    sift,
)
from .steane import finalize_key, random_c1_codewords, steane_concat_decode, steane_decode_block

__all__ = [
    'AbortReason',
    'BasisStats',
    'SimConfig',
    'SimReport',
    'basis_choices',
    'choose_test_positions',
    'ep_round',
    'estimate_rates',
    'finalize_key',
    'grouping',
    'pairing',
    'pec_round',
    'permutation',
    'random_c1_codewords',
    'rates_from_stats',
    'screen_estimate',
    'sift',
    'steane_concat_decode',
    'steane_decode_block',
]
