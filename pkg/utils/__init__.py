"""
Utility modules shared by the wire codec and the session parties.
"""

from .bits import pack_bits, pack_pairs, split, unpack_bits, unpack_pairs

__all__ = [
    'pack_bits',
    'pack_pairs',
    'split',
    'unpack_bits',
    'unpack_pairs',
]
