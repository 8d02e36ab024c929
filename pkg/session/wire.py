"""Framed wire format for the classical channel and the transcript file.

Frame: u32 payload length, u8 kind, payload, u32 reserved MAC (zero).
Integers are big-endian; bit strings are packed little-endian within bytes.
"""

import struct
from enum import IntEnum
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.errors import TranscriptError
from simulation.models import AbortReason, BasisStats
from utils.bits import pack_bits, pack_pairs, split, unpack_bits, unpack_pairs

MAGIC = b"QKDT"
HEADER = struct.Struct(">IB")
MAC = struct.Struct(">I")
MAX_PAYLOAD = (1 << 32) - 1

# PAIRING_SEED stage codes
SEED_STAGES = ("test", "ep", "pec", "permute")
ABORT_REASONS = tuple(AbortReason)


class MessageKind(IntEnum):
    BASIS_ANNOUNCE = 1
    TEST_REVEAL = 2
    TEST_VERDICT = 3
    PAIRING_SEED = 4
    PAIR_PARITY = 5
    KEEP_MASK = 6
    PEC_GROUPING = 7
    CODEWORD_MASK = 8
    ABORT = 9
    DONE = 10


class Direction(IntEnum):
    ALICE_TO_BOB = 0
    BOB_TO_ALICE = 1


class Message(BaseModel):
    """One classical announcement: a kind and its encoded payload."""

    model_config = ConfigDict(frozen=True)

    kind: MessageKind
    payload: bytes = b""

    @field_validator("payload")
    @classmethod
    def _check_length(cls, value: bytes) -> bytes:
        if len(value) > MAX_PAYLOAD:
            raise TranscriptError("payload does not fit a u32 length field")
        return value


class TranscriptEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    direction: Direction
    message: Message


class SessionTranscript(BaseModel):
    """Ordered record of every message exchanged in one session."""

    version: int
    entries: List[TranscriptEntry] = Field(default_factory=list)

    def append(self, direction: Direction, message: Message) -> None:
        self.entries.append(TranscriptEntry(direction=direction, message=message))

    def to_bytes(self) -> bytes:
        chunks = [MAGIC, struct.pack(">H", self.version)]
        for entry in self.entries:
            chunks.append(bytes([entry.direction]))
            chunks.append(encode_frame(entry.message))
        return b"".join(chunks)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SessionTranscript":
        if len(data) < 6 or data[:4] != MAGIC:
            raise TranscriptError("not a transcript: bad magic")
        (version,) = struct.unpack(">H", data[4:6])
        transcript = cls(version=version)
        offset = 6
        while offset < len(data):
            try:
                direction = Direction(data[offset])
            except ValueError:
                raise TranscriptError(f"bad direction byte {data[offset]} at offset {offset}") from None
            message, offset = decode_frame(data, offset + 1)
            transcript.append(direction, message)
        return transcript


def encode_frame(message: Message) -> bytes:
    return HEADER.pack(len(message.payload), message.kind) + message.payload + MAC.pack(0)


def decode_frame(data: bytes, offset: int = 0) -> Tuple[Message, int]:
    """Decode the frame starting at ``offset``.

    Returns:
        Tuple of (message, offset just past the frame)
    """
    if len(data) - offset < HEADER.size:
        raise TranscriptError(f"truncated frame header at offset {offset}")
    length, kind = HEADER.unpack_from(data, offset)
    start = offset + HEADER.size
    end = start + length
    if end + MAC.size > len(data):
        raise TranscriptError(f"truncated frame at offset {offset}: need {length} payload bytes")
    (mac,) = MAC.unpack_from(data, end)
    if mac != 0:
        raise TranscriptError(f"unexpected MAC value {mac:#x} at offset {end}")
    return Message(kind=parse_kind(kind), payload=bytes(data[start:end])), end + MAC.size


def parse_kind(value: int) -> MessageKind:
    try:
        return MessageKind(value)
    except ValueError:
        raise TranscriptError(f"unknown message kind {value}") from None


def write_transcript(path: Union[str, Path], transcript: SessionTranscript) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(transcript.to_bytes())
    return path


def read_transcript(path: Union[str, Path]) -> SessionTranscript:
    return SessionTranscript.from_bytes(Path(path).read_bytes())


# Payload schemas


def basis_announce(bases: np.ndarray) -> Message:
    return Message(kind=MessageKind.BASIS_ANNOUNCE, payload=struct.pack(">I", bases.size) + pack_pairs(bases))


def parse_basis_announce(message: Message) -> np.ndarray:
    head, body = split(message.payload, 4)
    (n,) = struct.unpack(">I", head)
    return unpack_pairs(body, n).astype(np.int8)


def pairing_seed(stage: str, index: int, contribution: int) -> Message:
    payload = struct.pack(">BIQ", SEED_STAGES.index(stage), index, contribution)
    return Message(kind=MessageKind.PAIRING_SEED, payload=payload)


def parse_pairing_seed(message: Message) -> Tuple[str, int, int]:
    if len(message.payload) != 13:
        raise TranscriptError(f"PAIRING_SEED payload must be 13 bytes, got {len(message.payload)}")
    stage, index, contribution = struct.unpack(">BIQ", message.payload)
    if stage >= len(SEED_STAGES):
        raise TranscriptError(f"unknown seed stage {stage}")
    return SEED_STAGES[stage], index, contribution


def _bit_message(kind: MessageKind, bits: np.ndarray, *header: int) -> Message:
    head = struct.pack(">" + "I" * (len(header) + 1), *header, bits.size)
    return Message(kind=kind, payload=head + pack_bits(bits))


def _parse_bit_message(message: Message, n_header: int) -> Tuple[Tuple[int, ...], np.ndarray]:
    head, body = split(message.payload, 4 * (n_header + 1))
    values = struct.unpack(">" + "I" * (n_header + 1), head)
    return values[:-1], unpack_bits(body, values[-1])


def reveal_tests(bits: np.ndarray) -> Message:
    return _bit_message(MessageKind.TEST_REVEAL, bits)


def parse_reveal_tests(message: Message) -> np.ndarray:
    return _parse_bit_message(message, 0)[1]


def verdict(stats: BasisStats) -> Message:
    values = [v for pair in zip(stats.tested, stats.mismatched) for v in pair]
    return Message(kind=MessageKind.TEST_VERDICT, payload=struct.pack(">6I", *values))


def parse_verdict(message: Message) -> BasisStats:
    if len(message.payload) != 24:
        raise TranscriptError(f"TEST_VERDICT payload must be 24 bytes, got {len(message.payload)}")
    values = struct.unpack(">6I", message.payload)
    try:
        return BasisStats(tested=values[0::2], mismatched=values[1::2])
    except ValueError as e:
        raise TranscriptError(f"inconsistent TEST_VERDICT: {e}") from None


def pair_parity(round_index: int, bits: np.ndarray) -> Message:
    return _bit_message(MessageKind.PAIR_PARITY, bits, round_index)


def keep_mask(round_index: int, bits: np.ndarray) -> Message:
    return _bit_message(MessageKind.KEEP_MASK, bits, round_index)


def parse_round_bits(message: Message) -> Tuple[int, np.ndarray]:
    (round_index,), bits = _parse_bit_message(message, 1)
    return round_index, bits


def pec_grouping(r: int, groups: int) -> Message:
    return Message(kind=MessageKind.PEC_GROUPING, payload=struct.pack(">II", r, groups))


def parse_pec_grouping(message: Message) -> Tuple[int, int]:
    if len(message.payload) != 8:
        raise TranscriptError(f"PEC_GROUPING payload must be 8 bytes, got {len(message.payload)}")
    return struct.unpack(">II", message.payload)


def codeword_mask(L: int, blocks: int, bits: np.ndarray) -> Message:
    head = struct.pack(">BII", L, blocks, bits.size)
    return Message(kind=MessageKind.CODEWORD_MASK, payload=head + pack_bits(bits))


def parse_codeword_mask(message: Message) -> Tuple[int, int, np.ndarray]:
    head, body = split(message.payload, 9)
    L, blocks, n = struct.unpack(">BII", head)
    return L, blocks, unpack_bits(body, n)


def abort(reason: AbortReason, detail: str) -> Message:
    payload = bytes([ABORT_REASONS.index(reason)]) + detail.encode("utf-8")
    return Message(kind=MessageKind.ABORT, payload=payload)


def parse_abort(message: Message) -> Tuple[AbortReason, str]:
    head, body = split(message.payload, 1)
    if head[0] >= len(ABORT_REASONS):
        raise TranscriptError(f"unknown abort reason {head[0]}")
    return ABORT_REASONS[head[0]], body.decode("utf-8", errors="replace")


def done(key_length: int) -> Message:
    return Message(kind=MessageKind.DONE, payload=struct.pack(">I", key_length))


def parse_done(message: Message) -> int:
    if len(message.payload) != 4:
        raise TranscriptError(f"DONE payload must be 4 bytes, got {len(message.payload)}")
    return struct.unpack(">I", message.payload)[0]
