import logging
from abc import ABC, abstractmethod
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from analysis.planner import PlannerConfig, SchedulePlan, plan_schedule
from core.errors import TranscriptError
from core.pauli import PauliRates
from core.seeding import party_seed
from session import wire
from session.channel import SimulatedChannel
from session.transport import Link
from session.wire import Message, MessageKind
from simulation.models import Abort, AbortReason, BasisStats, SimConfig
from simulation.stages import BLOCK_SIZE, permutation, rates_from_stats

logger = logging.getLogger(__name__)


class PeerAborted(Exception):
    """The other party sent ABORT."""

    def __init__(self, reason: AbortReason, detail: str):
        super().__init__(f"{reason.value}: {detail}")
        self.reason = reason
        self.detail = detail


class PartyState(BaseModel):
    """What one party knows at the end of (or partway through) a session."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    sifted_count: int = 0
    tested_count: int = 0
    estimated_rates: Optional[PauliRates] = None
    basis_stats: Optional[BasisStats] = None
    plan: Optional[SchedulePlan] = None
    post_ep_counts: List[int] = Field(default_factory=list)
    post_pec_count: int = 0
    final_key_length: int = 0
    key: Optional[np.ndarray] = None
    abort_reason: Optional[AbortReason] = None
    abort_detail: Optional[str] = None
    agreed_seeds: Dict[str, int] = Field(default_factory=dict)
    errors: List[str] = Field(default_factory=list)


class BaseParty(ABC):
    """Base class for the two session parties.

    Holds the party's state and the message helpers both roles share:
    typed receive, seed agreement and the abort handshake.
    """

    speaks_first: bool = False

    def __init__(self, name: str, config: SimConfig, link: Link, channel: SimulatedChannel):
        self.name = name
        self.config = config
        self.link = link
        self.channel = channel
        self.state = PartyState()

    @abstractmethod
    async def process(self) -> PartyState:
        """Run this party's side of the protocol.

        Returns:
            The final party state
        """
        pass

    async def run(self) -> PartyState:
        """Run :meth:`process`, turning a peer ABORT into state."""
        try:
            await self.process()
        except PeerAborted as e:
            self.update_state(abort_reason=e.reason, abort_detail=e.detail)
            logger.info("%s: peer aborted (%s)", self.name, e)
        return self.state

    def update_state(self, **kwargs) -> None:
        """Update the party's state with new information.

        Args:
            **kwargs: Key-value pairs to update in the state
        """
        for key, value in kwargs.items():
            if hasattr(self.state, key):
                setattr(self.state, key, value)

    def add_error(self, error: str) -> None:
        self.state.errors.append(error)

    async def send(self, message: Message) -> None:
        await self.link.send(message)

    async def expect(self, kind: MessageKind) -> Message:
        """Receive the next message, which must be of ``kind`` (or ABORT)."""
        message = await self.link.recv()
        if message.kind == MessageKind.ABORT and kind != MessageKind.ABORT:
            raise PeerAborted(*wire.parse_abort(message))
        if message.kind != kind:
            error = f"{self.name} expected {kind.name}, received {message.kind.name}"
            self.add_error(error)
            raise TranscriptError(error)
        return message

    async def agree_seed(self, stage: str, index: int = 0) -> int:
        """Exchange seed contributions for one stage; the agreed seed is their XOR."""
        mine = party_seed(self.config.seed, self.name, stage, index)
        if self.speaks_first:
            await self.send(wire.pairing_seed(stage, index, mine))
        message = await self.expect(MessageKind.PAIRING_SEED)
        their_stage, their_index, theirs = wire.parse_pairing_seed(message)
        if (their_stage, their_index) != (stage, index):
            raise TranscriptError(f"seed for {their_stage}:{their_index} arrived during {stage}:{index}")
        if not self.speaks_first:
            await self.send(wire.pairing_seed(stage, index, mine))
        agreed = mine ^ theirs
        self.state.agreed_seeds[f"{stage}:{index}"] = agreed
        return agreed

    async def settle(self, abort: Optional[Abort]) -> bool:
        """Resolve an abort point.

        The first speaker announces the abort; the other side expects the
        announcement and checks it against its own decision.

        Returns:
            True if the session stops here
        """
        if abort is None:
            return False
        if self.speaks_first:
            await self.send(wire.abort(abort.reason, abort.detail))
        else:
            reason, detail = wire.parse_abort(await self.expect(MessageKind.ABORT))
            if (reason, detail) != (abort.reason, abort.detail):
                raise TranscriptError(f"peer aborted with {reason.value} ({detail}), expected {abort.reason.value}")
        self.update_state(abort_reason=abort.reason, abort_detail=abort.detail)
        logger.info("%s: session aborted (%s): %s", self.name, abort.reason.value, abort.detail)
        return True

    def plan(self, rates: PauliRates, remaining: int) -> SchedulePlan:
        """Plan on the estimate (or the true rates when configured) for ``remaining`` bits."""
        planning_rates = self.config.rates if self.config.oracle_rates else rates
        planner_config: PlannerConfig = self.config.planner_config.model_copy(update={"n_sifted": remaining})
        plan = plan_schedule(planning_rates, planner_config)
        self.update_state(plan=plan)
        return plan

    @staticmethod
    def pec_compress(bits: np.ndarray, groups: np.ndarray) -> np.ndarray:
        return np.bitwise_xor.reduce(bits[groups], axis=1)

    def sift(self, bases: np.ndarray, peer_bases: np.ndarray) -> int:
        """Keep matching-basis positions and have the channel deliver them."""
        if peer_bases.size != bases.size:
            raise TranscriptError(f"peer announced {peer_bases.size} bases, expected {bases.size}")
        n = int(np.count_nonzero(bases == peer_bases))
        self.channel.deliver(n)
        self.update_state(sifted_count=n)
        return n

    def record_estimate(self, stats: BasisStats, bits: np.ndarray, positions: np.ndarray) -> np.ndarray:
        """Store the estimate and drop the tested positions from ``bits``."""
        rates = rates_from_stats(stats, self.config.symmetric_estimate)
        self.update_state(tested_count=stats.total_tested, estimated_rates=rates, basis_stats=stats)
        keep = np.ones(bits.size, dtype=bool)
        keep[positions] = False
        return bits[keep]

    @staticmethod
    def arrange_blocks(bits: np.ndarray, seed: int, L: int) -> np.ndarray:
        """Shared permutation, then truncation to whole level-L blocks."""
        shuffled = bits[permutation(bits.size, seed)]
        span = BLOCK_SIZE ** L
        return shuffled[: (shuffled.size // span) * span]
