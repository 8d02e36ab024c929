import asyncio

import numpy as np
import pytest

from core.errors import SessionError, TranscriptError
from core.pauli import PauliRates, depolarizing
from graph.coordinator import run_protocol
from session import wire
from session.runner import replay, run_session, run_session_async
from session.wire import Direction, Message, MessageKind, SessionTranscript, TranscriptEntry
from simulation.models import AbortReason, SimConfig


def kinds(transcript: SessionTranscript):
    return [entry.message.kind for entry in transcript.entries]


def tampered(transcript: SessionTranscript, kind: MessageKind, direction: Direction, byte: int) -> SessionTranscript:
    """Copy of ``transcript`` with one bit flipped in the first matching message."""
    entries = list(transcript.entries)
    for index, entry in enumerate(entries):
        if entry.message.kind == kind and entry.direction == direction:
            payload = bytearray(entry.message.payload)
            payload[byte] ^= 1
            entries[index] = TranscriptEntry(direction=direction, message=Message(kind=kind, payload=bytes(payload)))
            return SessionTranscript(version=transcript.version, entries=entries)
    raise AssertionError(f"no {kind.name} from {direction.name} in the transcript")


def test_noiseless_session_matches_protocol(noiseless_config):
    report, transcript = run_session(noiseless_config)
    assert kinds(transcript)[-1] == MessageKind.DONE
    assert not report.aborted
    assert report.key_mismatch_count == 0
    assert report == run_protocol(noiseless_config)


def test_noisy_session_matches_protocol(noisy_config):
    report, transcript = run_session(noisy_config)
    assert report == run_protocol(noisy_config)
    assert kinds(transcript).count(MessageKind.KEEP_MASK) == report.plan.k


def test_hopeless_session_aborts_after_the_verdict(hopeless_config):
    report, transcript = run_session(hopeless_config)
    assert report.aborted and report.abort_reason == AbortReason.THRESHOLD
    assert len(transcript.entries) == 7
    last = transcript.entries[-1]
    assert last.direction == Direction.ALICE_TO_BOB
    assert wire.parse_abort(last.message)[0] == AbortReason.THRESHOLD
    assert report == run_protocol(hopeless_config)


def test_transcripts_are_reproducible(noiseless_config):
    _, first = run_session(noiseless_config)
    _, second = run_session(noiseless_config)
    assert first.to_bytes() == second.to_bytes()


def test_stream_transport_gives_the_same_run(noiseless_config):
    report, transcript = run_session(noiseless_config)
    streamed, streamed_transcript = run_session(noiseless_config, transport="stream")
    assert streamed == report
    assert streamed_transcript.to_bytes() == transcript.to_bytes()


def test_unknown_transport(noiseless_config):
    with pytest.raises(SessionError):
        asyncio.run(run_session_async(noiseless_config, transport="carrier-pigeon"))


def test_half_duplex_alternation(noisy_config):
    _, transcript = run_session(noisy_config)
    assert transcript.entries[0].direction == Direction.ALICE_TO_BOB
    # Alice's PAIR_PARITY is always answered by Bob's before her KEEP_MASK
    sequence = [(entry.message.kind, entry.direction) for entry in transcript.entries]
    for index, (kind, direction) in enumerate(sequence):
        if kind == MessageKind.KEEP_MASK:
            assert sequence[index - 1] == (MessageKind.PAIR_PARITY, Direction.BOB_TO_ALICE)
            assert sequence[index - 2] == (MessageKind.PAIR_PARITY, Direction.ALICE_TO_BOB)


def test_public_messages_reveal_only_the_tests(noisy_config):
    report, transcript = run_session(noisy_config)
    sent = kinds(transcript)
    assert sent.count(MessageKind.BASIS_ANNOUNCE) == 2
    assert sent.count(MessageKind.CODEWORD_MASK) == sent.count(MessageKind.DONE) == 1
    assert sent.count(MessageKind.PAIRING_SEED) == 2 * (report.plan.k + 3)
    reveals = [entry.message for entry in transcript.entries if entry.message.kind == MessageKind.TEST_REVEAL]
    assert len(reveals) == 1
    assert wire.parse_reveal_tests(reveals[0]).size == 3 * noisy_config.test_bits_per_basis
    assert report.tested_count == 3 * noisy_config.test_bits_per_basis


@pytest.mark.parametrize("party", ["alice", "bob"])
def test_replay_reproduces_the_report(noisy_config, party):
    report, transcript = run_session(noisy_config)
    assert replay(transcript, party, noisy_config, expected=report) == report


def test_replay_of_an_aborted_session(hopeless_config):
    report, transcript = run_session(hopeless_config)
    assert replay(transcript, "bob", hopeless_config, expected=report) == report


def test_replay_detects_a_flipped_parity_bit(noisy_config):
    report, transcript = run_session(noisy_config)
    assert report.plan.k >= 1
    # payload bytes 0..7 are the round index and bit count
    broken = tampered(transcript, MessageKind.PAIR_PARITY, Direction.ALICE_TO_BOB, 8)
    with pytest.raises(TranscriptError, match="keep-mask divergence"):
        replay(broken, "bob", noisy_config)
    with pytest.raises(TranscriptError, match="diverges"):
        replay(broken, "alice", noisy_config)


def test_replay_rejects_truncated_and_empty_transcripts(noiseless_config):
    _, transcript = run_session(noiseless_config)
    with pytest.raises(TranscriptError):
        replay(SessionTranscript(version=transcript.version), "bob", noiseless_config)
    cut = SessionTranscript(version=transcript.version, entries=transcript.entries[:-1])
    with pytest.raises(TranscriptError, match="ended"):
        replay(cut, "alice", noiseless_config)
    with pytest.raises(TranscriptError, match="version"):
        replay(SessionTranscript(version=99, entries=transcript.entries), "bob", noiseless_config)


def test_replay_with_the_wrong_config_diverges(noiseless_config):
    _, transcript = run_session(noiseless_config)
    other = noiseless_config.model_copy(update={"seed": noiseless_config.seed + 1})
    with pytest.raises(TranscriptError):
        replay(transcript, "alice", other)


@pytest.mark.parametrize("seed", range(21, 31))
def test_session_agrees_with_protocol_on_random_channels(seed):
    rng = np.random.default_rng(seed)
    noise = rng.dirichlet(np.ones(3)) * rng.uniform(0.0, 0.12)
    rates = PauliRates.normalized(1.0 - noise.sum(), *noise)
    config = SimConfig(n_sent=150_000, rates=rates, test_bits_per_basis=1000, seed=seed)
    report, _ = run_session(config)
    assert report == run_protocol(config)


def test_session_abort_for_too_few_bits():
    config = SimConfig(n_sent=3000, rates=depolarizing(0.05), test_bits_per_basis=500, seed=2)
    report, transcript = run_session(config)
    assert report.abort_reason == AbortReason.EXHAUSTED
    assert kinds(transcript) == [
        MessageKind.BASIS_ANNOUNCE,
        MessageKind.BASIS_ANNOUNCE,
        MessageKind.PAIRING_SEED,
        MessageKind.PAIRING_SEED,
        MessageKind.ABORT,
    ]
