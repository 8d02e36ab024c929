"""[7,4] Hamming code tables behind the Steane [[7,1,3]] CSS code.

Bit vectors of length 7 are encoded as integers 0..127 with position ``j``
at bit ``j`` (little-endian). Lookup tables are derived, not hand-entered.
"""

import numpy as np

# Column j is the binary expansion of j + 1, so a single error at j has syndrome j + 1.
PARITY_CHECK = np.array(
    [[((j + 1) >> row) & 1 for j in range(7)] for row in range(3)],
    dtype=np.uint8,
)

_ALL = np.arange(128, dtype=np.uint8)
VECTORS = ((_ALL[:, None] >> np.arange(7)) & 1).astype(np.uint8)
WEIGHT = VECTORS.sum(axis=1).astype(np.uint8)

SYNDROME = ((VECTORS @ PARITY_CHECK.T) & 1) @ (1 << np.arange(3))
SYNDROME = SYNDROME.astype(np.uint8)

# syndrome -> minimum weight correction (0 or a single flip)
CORRECTION = np.zeros(8, dtype=np.uint8)
for _vec in _ALL[WEIGHT <= 1]:
    CORRECTION[SYNDROME[_vec]] = _vec
del _vec

CODEWORDS = _ALL[SYNDROME == 0]
# Even-weight codewords form C2 (the dual); odd-weight ones are logical operators.
EVEN_CODEWORDS = CODEWORDS[WEIGHT[CODEWORDS] % 2 == 0]
ODD_CODEWORDS = CODEWORDS[WEIGHT[CODEWORDS] % 2 == 1]

CORRECTED = _ALL ^ CORRECTION[SYNDROME]
LOGICAL = (WEIGHT[CORRECTED] & 1).astype(np.uint8)


def pack7(bits: np.ndarray) -> np.ndarray:
    """Pack an (n, 7) 0/1 array into integers 0..127."""
    return (bits.astype(np.uint8) << np.arange(7, dtype=np.uint8)).sum(axis=1).astype(np.uint8)


def nearest_codeword_bruteforce(vector: int) -> int:
    """Nearest codeword by exhaustive search (ties broken by smallest integer)."""
    distances = WEIGHT[CODEWORDS ^ np.uint8(vector)]
    return int(CODEWORDS[int(np.argmin(distances))])
