"""
Two-party session: wire codec, transports and the simulated quantum channel.

The runner lives in :mod:`session.runner`, which depends on :mod:`parties`.
"""

from .channel import SimulatedChannel
from .transport import TRANSPORTS, Link, QueueLink, ReplayLink, StreamLink, TranscriptRecorder
from .wire import (
    Direction,
    Message,
    MessageKind,
    SessionTranscript,
    TranscriptEntry,
    read_transcript,
    write_transcript,
)

__all__ = [
    'Direction',
    'Link',
    'Message',
    'MessageKind',
    'QueueLink',
    'ReplayLink',
    'SessionTranscript',
    'SimulatedChannel',
    'StreamLink',
    'TRANSPORTS',
    'TranscriptEntry',
    'TranscriptRecorder',
    'read_transcript',
    'write_transcript',
]
