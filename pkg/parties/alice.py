import logging

import numpy as np

from core.errors import TranscriptError
from core.seeding import make_rng
from session import wire
from session.wire import MessageKind
from simulation.stages import (
    BLOCK_SIZE,
    basis_choices,
    check_block_budget,
    check_plan,
    check_test_budget,
    check_width_budget,
    choose_test_positions,
    grouping,
    pairing,
    screen_estimate,
)
from simulation.steane import random_c1_codewords

from .base_party import BaseParty, PartyState

logger = logging.getLogger(__name__)


class AliceParty(BaseParty):
    """Sender side: reveals test bits, decides keep masks and masks the final codeword."""

    speaks_first = True

    def __init__(self, config, link, channel):
        super().__init__(name="alice", config=config, link=link, channel=channel)

    async def process(self) -> PartyState:
        config = self.config
        bases = basis_choices(config.n_sent, config.seed, self.name)
        await self.send(wire.basis_announce(bases))
        peer_bases = wire.parse_basis_announce(await self.expect(MessageKind.BASIS_ANNOUNCE))
        n = self.sift(bases, peer_bases)
        bits = self.channel.alice_bits()

        # parameter estimation
        test_seed = await self.agree_seed("test")
        m = config.test_bits_per_basis
        if await self.settle(check_test_budget(n, m)):
            return self.state
        positions, _ = choose_test_positions(n, m, test_seed)
        await self.send(wire.reveal_tests(bits[positions]))
        stats = wire.parse_verdict(await self.expect(MessageKind.TEST_VERDICT))
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
        await self.send(wire.pec_grouping(plan.r, groups.shape[0]))
        bits = self.pec_compress(bits, groups)
        self.update_state(post_pec_count=int(bits.size))
        if await self.settle(check_block_budget(bits.size, plan.L)):
            return self.state

        permute_seed = await self.agree_seed("permute")
        bits = self.arrange_blocks(bits, permute_seed, plan.L)
        n_blocks = bits.size // BLOCK_SIZE ** plan.L
        codeword, key = random_c1_codewords(n_blocks, plan.L, make_rng(config.seed, self.name, "codeword"))
        await self.send(wire.codeword_mask(plan.L, n_blocks, bits ^ codeword))
        key_length = wire.parse_done(await self.expect(MessageKind.DONE))
        if key_length != key.size:
            raise TranscriptError(f"Bob reports a {key_length}-bit key, Alice holds {key.size}")
        self.update_state(key=key, final_key_length=int(key.size))
        logger.info("alice: session done with a %d-bit key", key.size)
        return self.state

    async def _ep_round(self, index: int, bits: np.ndarray) -> np.ndarray:
        seed = await self.agree_seed("ep", index)
        control, target = pairing(bits.size, seed)
        mine = bits[control] ^ bits[target]
        await self.send(wire.pair_parity(index, mine))
        round_index, theirs = wire.parse_round_bits(await self.expect(MessageKind.PAIR_PARITY))
        if round_index != index or theirs.size != mine.size:
            raise TranscriptError(f"PAIR_PARITY for round {round_index} with {theirs.size} bits, expected round {index}")
        keep = mine == theirs
        await self.send(wire.keep_mask(index, keep))
        bits = bits[control][keep]
        self.state.post_ep_counts.append(int(bits.size))
        return bits
