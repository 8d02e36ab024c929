from typing import Tuple

import numpy as np

from core.errors import TranscriptError


def pack_bits(bits: np.ndarray) -> bytes:
    """Pack 0/1 values eight per byte, first value in the least significant bit."""
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def unpack_bits(data: bytes, n: int) -> np.ndarray:
    """Inverse of :func:`pack_bits` for a string of ``n`` values."""
    if len(data) != (n + 7) // 8:
        raise TranscriptError(f"expected {(n + 7) // 8} bytes for {n} bits, got {len(data)}")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=n, bitorder="little")


def pack_pairs(codes: np.ndarray) -> bytes:
    """Pack 2-bit codes four per byte, first code in the two least significant bits."""
    codes = np.asarray(codes, dtype=np.uint8)
    padded = np.zeros(-(-codes.size // 4) * 4, dtype=np.uint8)
    padded[: codes.size] = codes & 3
    quads = padded.reshape(-1, 4) << np.array([0, 2, 4, 6], dtype=np.uint8)
    return np.bitwise_or.reduce(quads, axis=1).astype(np.uint8).tobytes()


def unpack_pairs(data: bytes, n: int) -> np.ndarray:
    """Inverse of :func:`pack_pairs` for ``n`` codes."""
    if len(data) != (n + 3) // 4:
        raise TranscriptError(f"expected {(n + 3) // 4} bytes for {n} codes, got {len(data)}")
    raw = np.frombuffer(data, dtype=np.uint8)
    codes = (raw[:, None] >> np.array([0, 2, 4, 6], dtype=np.uint8)) & 3
    return codes.reshape(-1)[:n].astype(np.uint8)


def split(data: bytes, size: int) -> Tuple[bytes, bytes]:
    """Split off a fixed-size header, failing cleanly on short payloads."""
    if len(data) < size:
        raise TranscriptError(f"payload truncated: need {size} bytes, have {len(data)}")
    return data[:size], data[size:]
