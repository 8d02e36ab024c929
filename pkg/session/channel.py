import logging
from typing import Optional

import numpy as np

from core.errors import InvariantViolation
from core.pauli import ErrorFrame, anticommute_mask, sample_codes
from core.seeding import make_rng
from simulation.models import SimConfig

logger = logging.getLogger(__name__)


class SimulatedChannel:
    """Stand-in for the quantum transmission.

    Draws the joint error frame of the sifted positions from the same
    sub-streams as :func:`simulation.stages.sift`, gives Alice her raw bits and
    lets Bob measure each position in a chosen basis.
    """

    def __init__(self, config: SimConfig):
        self.config = config
        self._frame: Optional[ErrorFrame] = None
        self._alice_bits: Optional[np.ndarray] = None

    def deliver(self, n_sifted: int) -> None:
        """Fix the number of sifted positions once the bases are public."""
        if self._frame is not None and len(self._frame) != n_sifted:
            raise InvariantViolation(f"channel already delivered {len(self._frame)} positions, not {n_sifted}")
        if self._frame is None:
            seed = self.config.seed
            labels = sample_codes(self.config.rates, n_sifted, make_rng(seed, "channel"))
            self._frame = ErrorFrame(labels=labels, origin_seed=seed)
            self._alice_bits = make_rng(seed, "alice", "bits").integers(0, 2, n_sifted, dtype=np.uint8)
            logger.debug("Channel delivered %d sifted positions", n_sifted)

    @property
    def frame(self) -> ErrorFrame:
        if self._frame is None:
            raise InvariantViolation("channel has not delivered yet")
        return self._frame

    def alice_bits(self) -> np.ndarray:
        if self._alice_bits is None:
            raise InvariantViolation("channel has not delivered yet")
        return self._alice_bits.copy()

    def bob_measure(self, bases: np.ndarray) -> np.ndarray:
        """Bob's outcomes: Alice's bit flipped wherever the error anticommutes with the basis."""
        flips = anticommute_mask(self.frame.labels, bases).astype(np.uint8)
        return self._alice_bits ^ flips
