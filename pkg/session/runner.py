"""Drive Alice and Bob through one session and turn their states into a report."""

import asyncio
import logging
from typing import Optional, Tuple

import numpy as np

from config import settings
from core.errors import InvariantViolation, SessionError, TranscriptError, TransportError
from parties import AliceParty, BaseParty, BobParty, PartyState
from simulation.models import SimConfig, SimReport
from simulation.stages import ep_round, estimate_rates, pec_round
from simulation.steane import finalize_key

from .channel import SimulatedChannel
from .transport import Link, ReplayLink, TranscriptRecorder, queue_links, stream_links
from .wire import Direction, SessionTranscript

logger = logging.getLogger(__name__)

PARTIES = {"alice": (AliceParty, Direction.ALICE_TO_BOB), "bob": (BobParty, Direction.BOB_TO_ALICE)}


def track_frame(channel: SimulatedChannel, state: PartyState, config: SimConfig) -> Tuple[int, int, float]:
    """Follow the physical error frame through the stages the session ran.

    Uses the seeds the parties agreed on, so the frame sees the same test
    positions, pairings, groupings and permutation as the bits did.

    Returns:
        Tuple of (key length, key mismatches, residual phase error rate)
    """
    seeds = state.agreed_seeds
    plan = state.plan
    _, _, frame = estimate_rates(
        channel.frame, config.test_bits_per_basis, seeds["test:0"], symmetric=config.symmetric_estimate
    )
    for index in range(plan.k):
        frame, _ = ep_round(frame, seeds[f"ep:{index}"])
    frame = pec_round(frame, plan.r, seeds["pec:0"])
    return finalize_key(frame, plan.L, seeds["permute:0"])


def report_from_party(
    config: SimConfig, state: PartyState, tracked: Optional[Tuple[int, int, float]] = None
) -> SimReport:
    """Build the SimReport one party's state implies."""
    completed = state.abort_reason is None
    if completed:
        if tracked is None:
            raise InvariantViolation("a completed session needs the tracked frame")
        key_length, mismatches, residual = tracked
        if key_length != state.final_key_length:
            raise InvariantViolation(f"tracked key has {key_length} bits, the session produced {state.final_key_length}")
    else:
        mismatches, residual = 0, None
    return SimReport(
        seed=config.seed,
        sifted_count=state.sifted_count,
        tested_count=state.tested_count,
        post_ep_counts=list(state.post_ep_counts),
        post_pec_count=state.post_pec_count,
        final_key_length=state.final_key_length,
        estimated_rates=state.estimated_rates,
        basis_stats=state.basis_stats,
        plan=state.plan,
        key_mismatch_count=mismatches,
        residual_phase_error_rate=residual,
        aborted=not completed,
        abort_reason=state.abort_reason,
        abort_detail=state.abort_detail,
    )


async def _drive(party: BaseParty) -> PartyState:
    try:
        return await party.run()
    except Exception as e:
        party.add_error(f"{party.name}: {e}")
        raise
    finally:
        await party.link.close()


def _root_cause(failures) -> Exception:
    # A TransportError on one side is usually the echo of the other side's failure.
    for failure in failures:
        if not isinstance(failure, TransportError):
            return failure
    return failures[0]


async def run_session_async(config: SimConfig, transport: str = "in-process") -> Tuple[SimReport, SessionTranscript]:
    """Run one Alice/Bob session on the current event loop.

    Args:
        config: Simulation configuration shared by both parties
        transport: "in-process" (asyncio queues) or "stream" (socket pair)

    Returns:
        Tuple of (report, transcript)

    Raises:
        TransportError: if the link fails
        TranscriptError: if a party receives a message that breaks the protocol
        InvariantViolation: if the parties disagree on the outcome
    """
    transcript = SessionTranscript(version=settings.TRANSCRIPT_VERSION)
    recorder = TranscriptRecorder(transcript)
    if transport == "in-process":
        alice_link, bob_link = queue_links(recorder)
    elif transport == "stream":
        alice_link, bob_link = await stream_links(recorder)
    else:
        raise SessionError(f"unknown transport {transport!r}")

    channel = SimulatedChannel(config)
    alice = AliceParty(config, alice_link, channel)
    bob = BobParty(config, bob_link, channel)
    results = await asyncio.gather(_drive(alice), _drive(bob), return_exceptions=True)
    failures = [result for result in results if isinstance(result, BaseException)]
    if failures:
        raise _root_cause(failures)

    alice_state, bob_state = results
    tracked = None
    if alice_state.abort_reason is None:
        tracked = track_frame(channel, alice_state, config)
        differing = int(np.count_nonzero(alice_state.key != bob_state.key))
        if differing != tracked[1]:
            raise InvariantViolation(f"keys differ in {differing} bits, the frame predicts {tracked[1]}")
    report = report_from_party(config, alice_state, tracked)
    if report != report_from_party(config, bob_state, tracked):
        raise InvariantViolation("Alice and Bob finished the session in different states")
    logger.info(
        "Session %d finished after %d messages: %s",
        config.seed,
        len(transcript.entries),
        report.abort_reason.value if report.aborted else f"{report.final_key_length}-bit key",
    )
    return report, transcript


def run_session(config: SimConfig, transport: str = "in-process") -> Tuple[SimReport, SessionTranscript]:
    """Synchronous wrapper around :func:`run_session_async`."""
    return asyncio.run(run_session_async(config, transport))


async def replay_async(
    transcript: SessionTranscript, party: str, config: SimConfig, expected: Optional[SimReport] = None
) -> SimReport:
    if transcript.version != settings.TRANSCRIPT_VERSION:
        raise TranscriptError(f"transcript version {transcript.version}, expected {settings.TRANSCRIPT_VERSION}")
    if party not in PARTIES:
        raise SessionError(f"unknown party {party!r}")
    party_cls, direction = PARTIES[party]
    link: Link = ReplayLink(direction, transcript)
    channel = SimulatedChannel(config)
    state = await party_cls(config, link, channel).run()
    link.check_consumed()

    tracked = track_frame(channel, state, config) if state.abort_reason is None else None
    report = report_from_party(config, state, tracked)
    if expected is not None and report != expected:
        raise TranscriptError(f"replayed {party} report differs from the recorded run")
    return report


def replay(
    transcript: SessionTranscript, party: str, config: SimConfig, expected: Optional[SimReport] = None
) -> SimReport:
    """Re-run one party against a recorded transcript.

    Args:
        transcript: Recorded session
        party: "alice" or "bob"
        config: The configuration the session ran with
        expected: Report of the live run to check against

    Returns:
        The party's reconstructed report

    Raises:
        TranscriptError: on a malformed, truncated or divergent transcript
    """
    return asyncio.run(replay_async(transcript, party, config, expected))
