import math
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from analysis.planner import PlannerConfig, SchedulePlan
from config import settings
from core.errors import DomainError
from core.pauli import Basis, PauliRates


class AbortReason(str, Enum):
    """Why a run stopped before producing a key."""

    THRESHOLD = "threshold"
    BUDGET = "budget"
    EXHAUSTED = "exhausted"


class SimConfig(BaseModel):
    """One protocol run: channel, sample sizes, planner targets and seed."""

    model_config = ConfigDict(frozen=True)

    n_sent: int = Field(gt=0)
    rates: PauliRates
    test_bits_per_basis: int = Field(default_factory=lambda: settings.TEST_BITS_PER_BASIS, ge=0)
    planner_config: PlannerConfig = Field(default_factory=PlannerConfig)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, ge=0)
    trials: int = Field(default=1, gt=0)
    oracle_rates: bool = False
    symmetric_estimate: bool = False


class BasisStats(BaseModel):
    """Tested and mismatched counts per test basis, in (Z, X, Y) order."""

    model_config = ConfigDict(frozen=True)

    tested: Tuple[int, int, int] = (0, 0, 0)
    mismatched: Tuple[int, int, int] = (0, 0, 0)

    @model_validator(mode="after")
    def _check_counts(self) -> "BasisStats":
        for tested, mismatched in zip(self.tested, self.mismatched):
            if tested < 0 or not 0 <= mismatched <= tested:
                raise DomainError(f"need 0 <= mismatched <= tested, got {mismatched}/{tested}")
        return self

    def error_rate(self, basis: Basis) -> float:
        tested = self.tested[basis]
        return self.mismatched[basis] / tested if tested else 0.0

    def standard_error(self, basis: Basis) -> float:
        tested = self.tested[basis]
        if not tested:
            return 0.0
        rate = self.error_rate(basis)
        return math.sqrt(rate * (1.0 - rate) / tested)

    @property
    def total_tested(self) -> int:
        return sum(self.tested)


class SimReport(BaseModel):
    """Outcome of one run, aborted or not."""

    model_config = ConfigDict(frozen=True)

    seed: int
    sifted_count: int = 0
    tested_count: int = 0
    post_ep_counts: List[int] = Field(default_factory=list)
    post_pec_count: int = 0
    final_key_length: int = 0
    estimated_rates: Optional[PauliRates] = None
    basis_stats: Optional[BasisStats] = None
    plan: Optional[SchedulePlan] = None
    key_mismatch_count: int = 0
    residual_phase_error_rate: Optional[float] = None
    aborted: bool = False
    abort_reason: Optional[AbortReason] = None
    abort_detail: Optional[str] = None

    @model_validator(mode="after")
    def _check_pipeline(self) -> "SimReport":
        if self.key_mismatch_count > self.final_key_length:
            raise DomainError("key mismatches cannot exceed the key length")
        if self.aborted != (self.abort_reason is not None):
            raise DomainError("abort_reason must be set exactly when the run aborted")
        return self

    @property
    def pipeline_counts(self) -> List[int]:
        """Surviving positions after sifting, testing, each EP round, PEC and Steane."""
        counts = [self.sifted_count, self.sifted_count - self.tested_count, *self.post_ep_counts]
        if self.plan is not None and self.plan.feasible and not self.aborted:
            counts += [self.post_pec_count, self.final_key_length]
        return counts


class Abort(NamedTuple):
    reason: AbortReason
    detail: str
