import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, TypedDict

from langgraph.graph import END, StateGraph
from tqdm import tqdm

from analysis.planner import SchedulePlan, plan_schedule
from config import settings
from core.errors import InvariantViolation
from core.pauli import ErrorFrame, PauliRates
from core.seeding import derive_seed, shared_seed
from simulation.models import Abort, AbortReason, BasisStats, SimConfig, SimReport
from simulation.stages import (
    check_block_budget,
    check_plan,
    check_test_budget,
    check_width_budget,
    ep_round,
    estimate_rates,
    pec_round,
    screen_estimate,
    sift,
)
from simulation.steane import finalize_key

logger = logging.getLogger(__name__)


class ProtocolState(TypedDict):
    """State for the protocol workflow."""
    config: SimConfig
    frame: Optional[ErrorFrame]
    sifted_count: int
    tested_count: int
    estimated_rates: Optional[PauliRates]
    basis_stats: Optional[BasisStats]
    plan: Optional[SchedulePlan]
    post_ep_counts: List[int]
    post_pec_count: int
    final_key_length: int
    key_mismatch_count: int
    residual_phase_error_rate: Optional[float]
    abort_reason: Optional[AbortReason]
    abort_detail: Optional[str]
    errors: List[str]


def _abort(state: ProtocolState, abort: Abort) -> ProtocolState:
    logger.info("Run %d aborted (%s): %s", state["config"].seed, abort.reason.value, abort.detail)
    return {**state, "abort_reason": abort.reason, "abort_detail": abort.detail}


class ProtocolCoordinator:
    """Runs sift, estimate, plan, distill, PEC and key finalization as a LangGraph workflow.

    Shared randomness for every stage comes from ``shared_seed`` so a
    two-party session driven by the same seed makes identical choices.
    """

    def __init__(self):
        # Create and compile the graph
        self.workflow = self._create_workflow()
        self.app = self.workflow.compile()

    def _create_workflow(self) -> StateGraph:
        """Create the protocol workflow graph."""
        workflow = StateGraph(ProtocolState)

        # Add nodes
        workflow.add_node("sift", self._sift_node)
        workflow.add_node("estimate", self._estimate_node)
        workflow.add_node("plan", self._plan_node)
        workflow.add_node("distill", self._distill_node)
        workflow.add_node("pec", self._pec_node)
        workflow.add_node("finalize", self._finalize_node)

        # Add edges; any abort or fault ends the run early
        stages = ("sift", "estimate", "plan", "distill", "pec", "finalize")
        for node, following in zip(stages, stages[1:]):
            workflow.add_conditional_edges(node, self._route, {"continue": following, "stop": END})
        workflow.add_edge("finalize", END)

        # Set entry point
        workflow.set_entry_point("sift")

        return workflow

    @staticmethod
    def _route(state: ProtocolState) -> str:
        if state["errors"] or state["abort_reason"] is not None:
            return "stop"
        return "continue"

    def _sift_node(self, state: ProtocolState) -> ProtocolState:
        """Sift node that keeps matching-basis positions."""
        try:
            config = state["config"]
            frame = sift(config.n_sent, config.rates, config.seed)
            return {**state, "frame": frame, "sifted_count": len(frame)}
        except Exception as e:
            return {**state, "errors": state["errors"] + [f"sift: {e}"]}

    def _estimate_node(self, state: ProtocolState) -> ProtocolState:
        """Estimate node that sacrifices test positions."""
        try:
            config = state["config"]
            frame = state["frame"]
            m = config.test_bits_per_basis
            abort = check_test_budget(len(frame), m)
            if abort is not None:
                return _abort(state, abort)
            rates, stats, remaining = estimate_rates(
                frame, m, shared_seed(config.seed, "test"), symmetric=config.symmetric_estimate
            )
            state = {
                **state,
                "frame": remaining,
                "tested_count": stats.total_tested,
                "estimated_rates": rates,
                "basis_stats": stats,
            }
            abort = screen_estimate(rates, stats)
            return state if abort is None else _abort(state, abort)
        except Exception as e:
            return {**state, "errors": state["errors"] + [f"estimate: {e}"]}

    def _plan_node(self, state: ProtocolState) -> ProtocolState:
        """Plan node that picks (k, r, L) from the estimate."""
        try:
            config = state["config"]
            rates = config.rates if config.oracle_rates else state["estimated_rates"]
            planner_config = config.planner_config.model_copy(update={"n_sifted": len(state["frame"])})
            plan = plan_schedule(rates, planner_config)
            state = {**state, "plan": plan}
            abort = check_plan(plan)
            if abort is not None:
                return _abort(state, abort)
            logger.info("Planned k=%d r=%d L=%d", plan.k, plan.r, plan.L)
            return state
        except Exception as e:
            return {**state, "errors": state["errors"] + [f"plan: {e}"]}

    def _distill_node(self, state: ProtocolState) -> ProtocolState:
        """Distill node that runs the planned EP rounds."""
        try:
            config = state["config"]
            frame = state["frame"]
            counts = []
            for index in range(state["plan"].k):
                frame, _ = ep_round(frame, shared_seed(config.seed, "ep", index))
                counts.append(len(frame))
            state = {**state, "frame": frame, "post_ep_counts": counts}
            abort = check_width_budget(state["plan"].r, len(frame))
            return state if abort is None else _abort(state, abort)
        except Exception as e:
            return {**state, "errors": state["errors"] + [f"distill: {e}"]}

    def _pec_node(self, state: ProtocolState) -> ProtocolState:
        """PEC node that compresses groups of r positions."""
        try:
            config = state["config"]
            plan = state["plan"]
            frame = pec_round(state["frame"], plan.r, shared_seed(config.seed, "pec"))
            state = {**state, "frame": frame, "post_pec_count": len(frame)}
            abort = check_block_budget(len(frame), plan.L)
            return state if abort is None else _abort(state, abort)
        except Exception as e:
            return {**state, "errors": state["errors"] + [f"pec: {e}"]}

    def _finalize_node(self, state: ProtocolState) -> ProtocolState:
        """Finalize node that decodes the Steane levels and compares keys."""
        try:
            config = state["config"]
            key_length, mismatches, residual = finalize_key(
                state["frame"], state["plan"].L, shared_seed(config.seed, "permute")
            )
            return {
                **state,
                "final_key_length": key_length,
                "key_mismatch_count": mismatches,
                "residual_phase_error_rate": residual,
            }
        except Exception as e:
            return {**state, "errors": state["errors"] + [f"finalize: {e}"]}

    def run(self, config: SimConfig) -> SimReport:
        """Run one protocol instance through the workflow.

        Args:
            config: Simulation configuration

        Returns:
            The run's SimReport

        Raises:
            InvariantViolation: if any node failed unexpectedly
        """
        # Initialize state
        initial_state: ProtocolState = {
            "config": config,
            "frame": None,
            "sifted_count": 0,
            "tested_count": 0,
            "estimated_rates": None,
            "basis_stats": None,
            "plan": None,
            "post_ep_counts": [],
            "post_pec_count": 0,
            "final_key_length": 0,
            "key_mismatch_count": 0,
            "residual_phase_error_rate": None,
            "abort_reason": None,
            "abort_detail": None,
            "errors": [],
        }

        final_state = self.app.invoke(initial_state)

        if final_state["errors"]:
            raise InvariantViolation("; ".join(final_state["errors"]))
        return report_from_state(final_state)


def report_from_state(state: Dict[str, Any]) -> SimReport:
    reason = state["abort_reason"]
    return SimReport(
        seed=state["config"].seed,
        sifted_count=state["sifted_count"],
        tested_count=state["tested_count"],
        post_ep_counts=state["post_ep_counts"],
        post_pec_count=state["post_pec_count"],
        final_key_length=state["final_key_length"],
        estimated_rates=state["estimated_rates"],
        basis_stats=state["basis_stats"],
        plan=state["plan"],
        key_mismatch_count=state["key_mismatch_count"],
        residual_phase_error_rate=state["residual_phase_error_rate"],
        aborted=reason is not None,
        abort_reason=reason,
        abort_detail=state["abort_detail"],
    )


def run_protocol(config: SimConfig, coordinator: Optional[ProtocolCoordinator] = None) -> SimReport:
    """Run the full scheme once with ``config.seed``."""
    return (coordinator or ProtocolCoordinator()).run(config)


def trial_configs(config: SimConfig) -> List[SimConfig]:
    """Per-trial configs with seeds derived from the root seed."""
    return [
        config.model_copy(update={"seed": derive_seed(config.seed, "trial", index), "trials": 1})
        for index in range(config.trials)
    ]


def run_trials(config: SimConfig, max_workers: Optional[int] = None) -> List[SimReport]:
    """Run ``config.trials`` independent trials on a thread pool, ordered by trial index."""
    coordinator = ProtocolCoordinator()
    configs = trial_configs(config)
    with ThreadPoolExecutor(max_workers=max_workers or settings.MAX_WORKERS) as executor:
        reports = list(
            tqdm(
                executor.map(coordinator.run, configs),
                total=len(configs),
                desc="trials",
                disable=not settings.SHOW_PROGRESS,
            )
        )
    aborted = sum(report.aborted for report in reports)
    logger.info("Finished %d trials, %d aborted", len(reports), aborted)
    return reports
