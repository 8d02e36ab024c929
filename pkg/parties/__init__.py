"""
Alice and Bob: the two session parties.
"""

from .alice import AliceParty
from .base_party import BaseParty, PartyState, PeerAborted
from .bob import BobParty

__all__ = [
    'AliceParty',
    'BaseParty',
    'BobParty',
    'PartyState',
    'PeerAborted',
]
