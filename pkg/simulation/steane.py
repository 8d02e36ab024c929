"""Concatenated Steane decoding of Pauli frames and the key it leaves."""

import logging
from typing import Sequence, Tuple

import numpy as np

from core import hamming
from core.errors import DomainError
from core.pauli import ErrorFrame, PauliLabel

from .stages import BLOCK_SIZE, permutation

logger = logging.getLogger(__name__)


def _check_levels(L: int) -> None:
    if L < 0:
        raise DomainError(f"concatenation level must be non-negative, got {L}")


def steane_decode_block(block: Sequence[PauliLabel]) -> PauliLabel:
    """Decode one block of seven labels to its logical label.

    The x and z vectors are corrected independently with the Hamming
    syndrome; the logical bit is the weight parity of the corrected vector.
    """
    if len(block) != BLOCK_SIZE:
        raise DomainError(f"a Steane block has {BLOCK_SIZE} labels, got {len(block)}")
    x_vector = sum(label.x << j for j, label in enumerate(block))
    z_vector = sum(label.z << j for j, label in enumerate(block))
    return PauliLabel(x=int(hamming.LOGICAL[x_vector]), z=int(hamming.LOGICAL[z_vector]))


def decode_level(codes: np.ndarray) -> np.ndarray:
    """One decoding level over consecutive 7-blocks of label codes; a partial block is dropped."""
    blocks = codes[: (codes.size // BLOCK_SIZE) * BLOCK_SIZE].reshape(-1, BLOCK_SIZE)
    logical_x = hamming.LOGICAL[hamming.pack7(blocks & 1)]
    logical_z = hamming.LOGICAL[hamming.pack7((blocks >> 1) & 1)]
    return (logical_x | (logical_z << 1)).astype(np.uint8)


def decode_bits_level(bits: np.ndarray) -> np.ndarray:
    """Logical bit of each corrected 7-block of a bit string."""
    blocks = bits[: (bits.size // BLOCK_SIZE) * BLOCK_SIZE].reshape(-1, BLOCK_SIZE)
    return hamming.LOGICAL[hamming.pack7(blocks)]


def steane_concat_decode(frame: ErrorFrame, L: int) -> ErrorFrame:
    """Apply the block decoder L times; excess beyond a multiple of 7^L is discarded."""
    _check_levels(L)
    codes = frame.labels
    for _ in range(L):
        codes = decode_level(codes)
    return frame.next(codes)


def finalize_key(frame: ErrorFrame, L: int, seed: int) -> Tuple[int, int, float]:
    """Permute, decode L levels, and read off key agreement.

    Returns:
        Tuple of (key length, Alice/Bob mismatches, residual phase error rate)
    """
    shuffled = frame.next(frame.labels[permutation(len(frame), seed)])
    decoded = steane_concat_decode(shuffled, L)
    key_length = len(decoded)
    mismatches = int(np.count_nonzero(decoded.x_bits))
    residual = float(decoded.z_bits.mean()) if key_length else 0.0
    logger.debug("Key of %d bits with %d mismatches", key_length, mismatches)
    return key_length, mismatches, residual


def random_c1_codewords(n_blocks: int, L: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Random codewords of the L-fold concatenated Hamming code and their logical bits.

    Built top-down: each logical bit expands into a uniformly chosen
    codeword of matching weight parity, level by level.

    Returns:
        Tuple of (codeword bits of length n_blocks * 7^L, logical key bits)
    """
    _check_levels(L)
    key = rng.integers(0, 2, n_blocks, dtype=np.uint8)
    bits = key
    for _ in range(L):
        even = hamming.EVEN_CODEWORDS[rng.integers(0, hamming.EVEN_CODEWORDS.size, bits.size)]
        odd = hamming.ODD_CODEWORDS[rng.integers(0, hamming.ODD_CODEWORDS.size, bits.size)]
        words = np.where(bits == 1, odd, even)
        bits = hamming.VECTORS[words].reshape(-1)
    return bits.astype(np.uint8), key
