import logging

import numpy as np

from core.errors import TranscriptError
from core.pauli import Basis
from session import wire
from session.wire import MessageKind
from simulation.stages import (
    basis_choices,
    basis_stats,
    check_block_budget,
    check_plan,
    check_test_budget,
    check_width_budget,
    choose_test_positions,
    grouping,
    pairing,
    screen_estimate,
)
from simulation.steane import decode_bits_level

from .base_party import BaseParty, PartyState

logger = logging.getLogger(__name__)


class BobParty(BaseParty):
    """Receiver side: measures, reports test verdicts and decodes the masked codeword."""

    speaks_first = False

    def __init__(self, config, link, channel):
        super().__init__(name="bob", config=config, link=link, channel=channel)

    async def process(self) -> PartyState:
        config = self.config
        bases = basis_choices(config.n_sent, config.seed, self.name)
        peer_bases = wire.parse_basis_announce(await self.expect(MessageKind.BASIS_ANNOUNCE))
        await self.send(wire.basis_announce(bases))
        n = self.sift(bases, peer_bases)

        # parameter estimation
        test_seed = await self.agree_seed("test")
        m = config.test_bits_per_basis
        if await self.settle(check_test_budget(n, m)):
            return self.state
        positions, tags = choose_test_positions(n, m, test_seed)
        measure_in = np.full(n, int(Basis.Z), dtype=np.int8)
        measure_in[positions] = tags
        bits = self.channel.bob_measure(measure_in)
        revealed = wire.parse_reveal_tests(await self.expect(MessageKind.TEST_REVEAL))
        if revealed.size != positions.size:
            raise TranscriptError(f"TEST_REVEAL carries {revealed.size} bits, expected {positions.size}")
        stats = basis_stats((revealed ^ bits[positions]).astype(bool), tags)
        await self.send(wire.verdict(stats))
        bits = self.record_estimate(stats, bits, positions)
        if await self.settle(screen_estimate(self.state.estimated_rates, stats)):
            return self.state
        plan = self.plan(self.state.estimated_rates, bits.size)
        if await self.settle(check_plan(plan)):
            return self.state

        for index in range(plan.k):
            bits = await self._ep_round(index, bits)
        if await self.settle(check_width_budget(plan.r, bits.size)):
            return self.state

        pec_seed = await self.agree_seed("pec")
        groups = grouping(bits.size, plan.r, pec_seed)
        announced = wire.parse_pec_grouping(await self.expect(MessageKind.PEC_GROUPING))
        if announced != (plan.r, groups.shape[0]):
            raise TranscriptError(f"PEC_GROUPING {announced} disagrees with {(plan.r, groups.shape[0])}")
        bits = self.pec_compress(bits, groups)
        self.update_state(post_pec_count=int(bits.size))
        if await self.settle(check_block_budget(bits.size, plan.L)):
            return self.state

        permute_seed = await self.agree_seed("permute")
        bits = self.arrange_blocks(bits, permute_seed, plan.L)
        L, _, mask = wire.parse_codeword_mask(await self.expect(MessageKind.CODEWORD_MASK))
        if L != plan.L or mask.size != bits.size:
            raise TranscriptError(f"CODEWORD_MASK for L={L} with {mask.size} bits, expected L={plan.L}, {bits.size} bits")
        key = bits ^ mask
        for _ in range(plan.L):
            key = decode_bits_level(key)
        await self.send(wire.done(int(key.size)))
        self.update_state(key=key.astype(np.uint8), final_key_length=int(key.size))
        logger.info("bob: session done with a %d-bit key", key.size)
        return self.state

    async def _ep_round(self, index: int, bits: np.ndarray) -> np.ndarray:
        seed = await self.agree_seed("ep", index)
        control, target = pairing(bits.size, seed)
        mine = bits[control] ^ bits[target]
        round_index, theirs = wire.parse_round_bits(await self.expect(MessageKind.PAIR_PARITY))
        if round_index != index or theirs.size != mine.size:
            raise TranscriptError(f"PAIR_PARITY for round {round_index} with {theirs.size} bits, expected round {index}")
        await self.send(wire.pair_parity(index, mine))
        mask_round, mask = wire.parse_round_bits(await self.expect(MessageKind.KEEP_MASK))
        keep = mine == theirs
        if mask_round != index or mask.size != keep.size or not np.array_equal(mask.astype(bool), keep):
            raise TranscriptError(f"keep-mask divergence in EP round {index}")
        bits = bits[control][keep]
        self.state.post_ep_counts.append(int(bits.size))
        return bits
