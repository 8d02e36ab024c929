"""Message links between the two parties.

Every link carries encoded frames, so the in-process and stream transports
exercise the same byte path. A :class:`TranscriptRecorder` shared by both
ends records each message at the moment it is sent.
"""

import asyncio
import logging
import socket
from abc import ABC, abstractmethod
from typing import List, Optional, Tuple

from core.errors import TranscriptError, TransportError

from .wire import HEADER, MAC, Direction, Message, SessionTranscript, decode_frame, encode_frame

logger = logging.getLogger(__name__)


class TranscriptRecorder:
    def __init__(self, transcript: SessionTranscript):
        self.transcript = transcript

    def record(self, direction: Direction, message: Message) -> None:
        self.transcript.append(direction, message)


class Link(ABC):
    """One party's end of the classical channel."""

    def __init__(self, direction: Direction, recorder: Optional[TranscriptRecorder] = None):
        self.direction = direction
        self.recorder = recorder

    async def send(self, message: Message) -> None:
        if self.recorder is not None:
            self.recorder.record(self.direction, message)
        logger.debug("%s %s (%d bytes)", self.direction.name, message.kind.name, len(message.payload))
        await self._send_frame(encode_frame(message))

    @abstractmethod
    async def _send_frame(self, frame: bytes) -> None:
        pass

    @abstractmethod
    async def recv(self) -> Message:
        pass

    async def close(self) -> None:
        pass


class QueueLink(Link):
    """In-process link over a pair of asyncio queues."""

    def __init__(self, direction, outbox: asyncio.Queue, inbox: asyncio.Queue, recorder=None, timeout: float = 30.0):
        super().__init__(direction, recorder)
        self.outbox = outbox
        self.inbox = inbox
        self.timeout = timeout

    async def _send_frame(self, frame: bytes) -> None:
        await self.outbox.put(frame)

    async def recv(self) -> Message:
        try:
            frame = await asyncio.wait_for(self.inbox.get(), self.timeout)
        except asyncio.TimeoutError:
            raise TransportError(f"no message within {self.timeout}s") from None
        if frame is None:
            raise TransportError("peer closed the channel")
        message, end = decode_frame(frame)
        if end != len(frame):
            raise TransportError("trailing bytes after frame")
        return message

    async def close(self) -> None:
        await self.outbox.put(None)


class StreamLink(Link):
    """Link over any reliable byte stream (asyncio StreamReader/StreamWriter)."""

    def __init__(self, direction, reader: asyncio.StreamReader, writer: asyncio.StreamWriter, recorder=None):
        super().__init__(direction, recorder)
        self.reader = reader
        self.writer = writer

    async def _send_frame(self, frame: bytes) -> None:
        try:
            self.writer.write(frame)
            await self.writer.drain()
        except (ConnectionError, OSError) as e:
            raise TransportError(f"stream write failed: {e}") from e

    async def recv(self) -> Message:
        try:
            header = await self.reader.readexactly(HEADER.size)
            length, _ = HEADER.unpack(header)
            rest = await self.reader.readexactly(length + MAC.size)
        except asyncio.IncompleteReadError as e:
            raise TransportError(f"stream closed after {len(e.partial)} bytes of a frame") from e
        except (ConnectionError, OSError) as e:
            raise TransportError(f"stream read failed: {e}") from e
        message, _ = decode_frame(header + rest)
        return message

    async def close(self) -> None:
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass


class ReplayLink(Link):
    """Plays one party against a recorded transcript.

    Outgoing messages must equal the recorded ones; incoming messages are
    served from the transcript in order.
    """

    def __init__(self, direction: Direction, transcript: SessionTranscript):
        super().__init__(direction)
        if not transcript.entries:
            raise TranscriptError("empty transcript")
        self.entries = list(transcript.entries)
        self.position = 0

    def _next(self, direction: Direction):
        if self.position >= len(self.entries):
            raise TranscriptError(f"transcript ended after {self.position} messages")
        entry = self.entries[self.position]
        if entry.direction != direction:
            raise TranscriptError(
                f"message {self.position}: expected {direction.name}, transcript has {entry.direction.name}"
            )
        self.position += 1
        return entry.message

    async def send(self, message: Message) -> None:
        recorded = self._next(self.direction)
        if encode_frame(recorded) != encode_frame(message):
            raise TranscriptError(
                f"message {self.position - 1}: replay sent {message.kind.name} that diverges from the "
                f"recorded {recorded.kind.name}"
            )

    async def _send_frame(self, frame: bytes) -> None:
        pass

    async def recv(self) -> Message:
        peer = Direction.BOB_TO_ALICE if self.direction == Direction.ALICE_TO_BOB else Direction.ALICE_TO_BOB
        return self._next(peer)

    def check_consumed(self) -> None:
        if self.position != len(self.entries):
            raise TranscriptError(f"{len(self.entries) - self.position} unreplayed messages left in the transcript")


def queue_links(recorder: Optional[TranscriptRecorder] = None) -> Tuple[QueueLink, QueueLink]:
    to_bob: asyncio.Queue = asyncio.Queue()
    to_alice: asyncio.Queue = asyncio.Queue()
    alice = QueueLink(Direction.ALICE_TO_BOB, to_bob, to_alice, recorder)
    bob = QueueLink(Direction.BOB_TO_ALICE, to_alice, to_bob, recorder)
    return alice, bob


async def stream_links(recorder: Optional[TranscriptRecorder] = None) -> Tuple[StreamLink, StreamLink]:
    """A connected socket pair wrapped in asyncio streams."""
    left, right = socket.socketpair()
    alice_reader, alice_writer = await asyncio.open_connection(sock=left)
    bob_reader, bob_writer = await asyncio.open_connection(sock=right)
    alice = StreamLink(Direction.ALICE_TO_BOB, alice_reader, alice_writer, recorder)
    bob = StreamLink(Direction.BOB_TO_ALICE, bob_reader, bob_writer, recorder)
    return alice, bob


TRANSPORTS: List[str] = ["in-process", "stream"]
