"""
Pauli channel types, error frames and deterministic seeding.
"""

from .errors import (
    DomainError,
    InfeasibleError,
    InvariantViolation,
    SessionError,
    SixStateError,
    TranscriptError,
    TransportError,
)
from .pauli import (
    Basis,
    ErrorFrame,
    PauliLabel,
    PauliRates,
    anticommute_mask,
    depolarizing,
    sample_frame,
)
from .seeding import derive_seed, make_rng, party_seed, shared_seed

__all__ = [
    'Basis',
    'DomainError',
    'ErrorFrame',
    'InfeasibleError',
    'InvariantViolation',
    'PauliLabel',
    'PauliRates',
    'SessionError',
    'SixStateError',
    'TranscriptError',
    'TransportError',
    'anticommute_mask',
    'depolarizing',
    'derive_seed',
    'make_rng',
    'party_seed',
    'sample_frame',
    'shared_seed',
]
