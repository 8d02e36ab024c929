"""Command implementations behind ``main.py``.

Each command turns parsed flags into a :class:`CommandOutput`; ``main.py``
renders it as key=value lines, CSV or JSON and optionally saves it as a
:class:`~cli.artifacts.RunArtifact`.
"""

import argparse
import logging
from typing import Any, Callable, Dict, List, NamedTuple, Optional

import numpy as np
import pandas as pd

from analysis.maps import alternating_schedule, ep_map, pec_predict, steane_threshold
from analysis.planner import PlannerConfig, depolarizing_threshold, plan_schedule, plan_table, threshold_sweep
from config import settings
from core.errors import DomainError
from core.pauli import PauliRates, depolarizing
from core.seeding import derive_seed
from graph.coordinator import run_protocol, run_trials
from session.runner import replay, run_session
from session.wire import read_transcript, write_transcript
from simulation.models import SimConfig, SimReport

from .artifacts import RunArtifact, load_artifact

logger = logging.getLogger(__name__)

EVOLVE_COLUMNS = ["round", "p_i", "p_x", "p_y", "p_z", "survival"]
SWEEP_COLUMNS = ["bit_error", "feasible", "k", "r", "L", "yield", "mc_key_rate", "mc_mismatch_rate"]
TRIAL_COLUMNS = [
    "trial",
    "seed",
    "aborted",
    "abort_reason",
    "sifted_count",
    "post_pec_count",
    "final_key_length",
    "key_mismatch_count",
    "residual_phase_error_rate",
]


class CommandOutput(NamedTuple):
    artifact: RunArtifact
    table: Optional[pd.DataFrame] = None


def parse_rates(text: str) -> PauliRates:
    """Parse ``p_i,p_x,p_y,p_z``; the values must already sum to one."""
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError:
        raise DomainError(f"rates must be four comma-separated numbers, got {text!r}") from None
    return PauliRates.from_array(values)


def _rates(args: argparse.Namespace) -> PauliRates:
    if getattr(args, "rates", None):
        return parse_rates(args.rates)
    if getattr(args, "bit_error", None) is not None:
        return depolarizing(args.bit_error)
    raise DomainError("give either --rates or --bit-error")


def _seed(args: argparse.Namespace) -> int:
    return settings.DEFAULT_SEED if args.seed is None else args.seed


def _planner_config(args: argparse.Namespace, n_sifted: Optional[int] = None) -> PlannerConfig:
    overrides = {
        "error_target": args.error_target,
        "key_fidelity_epsilon": args.epsilon,
        "max_k": args.max_k,
    }
    values = {name: value for name, value in overrides.items() if value is not None}
    return PlannerConfig(n_sifted=n_sifted, **values)


def _sim_config(args: argparse.Namespace) -> SimConfig:
    values = {
        "n_sent": args.n_sent,
        "rates": _rates(args),
        "planner_config": _planner_config(args),
        "seed": _seed(args),
        "trials": args.trials,
        "oracle_rates": args.oracle_rates,
        "symmetric_estimate": args.symmetric_estimate,
    }
    if args.test_bits is not None:
        values["test_bits_per_basis"] = args.test_bits
    return SimConfig(**values)


def report_summary(report: SimReport) -> Dict[str, Any]:
    """Flat view of a report for key=value output."""
    plan = report.plan
    return {
        "seed": report.seed,
        "aborted": report.aborted,
        "abort_reason": report.abort_reason.value if report.aborted else None,
        "abort_detail": report.abort_detail,
        "sifted_count": report.sifted_count,
        "tested_count": report.tested_count,
        "estimated_bit_error": report.estimated_rates.bit_error if report.estimated_rates else None,
        "plan_k": plan.k if plan and plan.feasible else None,
        "plan_r": plan.r if plan and plan.feasible else None,
        "plan_L": plan.L if plan and plan.feasible else None,
        "post_ep_counts": ",".join(str(count) for count in report.post_ep_counts),
        "post_pec_count": report.post_pec_count,
        "final_key_length": report.final_key_length,
        "key_mismatch_count": report.key_mismatch_count,
        "residual_phase_error_rate": report.residual_phase_error_rate,
    }


def cmd_threshold(args: argparse.Namespace) -> CommandOutput:
    point = depolarizing_threshold()
    summary: Dict[str, Any] = {
        "bit_error": round(point.bit_error, 6),
        "channel_error": round(point.channel_error, 6),
        "p_i_min": round(point.p_i_min, 6),
    }
    if args.numeric:
        numeric = threshold_sweep(args.lo, args.hi, args.tol)
        summary["numeric_bit_error"] = round(numeric, 6)
        summary["numeric_gap"] = abs(numeric - point.bit_error)
    if args.steane:
        summary["steane_threshold"] = round(steane_threshold(), 4)
    config = {"numeric": args.numeric, "tol": args.tol, "lo": args.lo, "hi": args.hi, "steane": args.steane}
    return CommandOutput(RunArtifact(command="threshold", config=config, summary=summary))


def cmd_evolve(args: argparse.Namespace) -> CommandOutput:
    """EP rounds as CSV rows; a --pec-r row holds the exact joint PEC rates.

    The CSV schema stays fixed. The row's p_x + p_y and p_y + p_z are the exact
    bit and phase marginals; the printed bounds appear in the --json summary.
    """
    if args.k < 0:
        raise DomainError(f"--k must be non-negative, got {args.k}")
    rates = parse_rates(args.rates)
    rows: List[Dict[str, Any]] = []

    def add(label: Any, current: PauliRates, survival: Optional[float]) -> None:
        p_i, p_x, p_y, p_z = current.as_array()
        rows.append({"round": label, "p_i": p_i, "p_x": p_x, "p_y": p_y, "p_z": p_z, "survival": survival})

    if args.alternate is not None:
        for label, current in alternating_schedule(rates, args.alternate):
            add(label, current, None)
    else:
        current = rates
        add(0, current, 1.0)
        for index in range(1, args.k + 1):
            current, survival = ep_map(current)
            add(index, current, survival)
        if args.pec_r is not None:
            prediction = pec_predict(current, args.pec_r)
            add(f"pec{args.pec_r}", prediction.exact_rates, None)

    summary: Dict[str, Any] = {}
    if args.pec_r is not None and args.alternate is None:
        summary = {
            "pec_r": args.pec_r,
            "bit_error_exact": prediction.bit_error_exact,
            "phase_error_exact": prediction.phase_error_exact,
            "bit_error_bound": prediction.bit_error_bound,
            "phase_error_bound": prediction.phase_error_bound,
        }
    config = {"rates": args.rates, "k": args.k, "pec_r": args.pec_r, "alternate": args.alternate}
    table = pd.DataFrame(rows, columns=EVOLVE_COLUMNS)
    artifact = RunArtifact(command="evolve", config=config, summary=summary, rows=table.to_dict("records"))
    return CommandOutput(artifact, table)


def cmd_plan(args: argparse.Namespace) -> CommandOutput:
    rates = _rates(args)
    config = _planner_config(args, n_sifted=args.n_sifted)
    plan = plan_schedule(rates, config)
    summary = {
        "feasible": plan.feasible,
        "reason": plan.reason,
        "k": plan.k if plan.feasible else None,
        "r": plan.r,
        "L": plan.L if plan.feasible else None,
        "asymptotic": plan.asymptotic,
        "predicted_final_error": plan.predicted_final_error,
        "predicted_yield": plan.predicted_yield,
        "log_yield": plan.log_yield,
        "predicted_key_error": plan.predicted_key_error,
        "predicted_key_length": plan.predicted_key_length,
    }
    echo = {"rates": rates.model_dump(), "planner_config": config.model_dump()}
    return CommandOutput(RunArtifact(command="plan", config=echo, summary=summary))


def _trial_table(reports: List[SimReport]) -> pd.DataFrame:
    rows = []
    for index, report in enumerate(reports):
        rows.append(
            {
                "trial": index,
                "seed": report.seed,
                "aborted": report.aborted,
                "abort_reason": report.abort_reason.value if report.aborted else None,
                "sifted_count": report.sifted_count,
                "post_pec_count": report.post_pec_count,
                "final_key_length": report.final_key_length,
                "key_mismatch_count": report.key_mismatch_count,
                "residual_phase_error_rate": report.residual_phase_error_rate,
            }
        )
    return pd.DataFrame(rows, columns=TRIAL_COLUMNS)


def cmd_simulate(args: argparse.Namespace) -> CommandOutput:
    config = _sim_config(args)
    echo = config.model_dump(mode="json")

    if args.session:
        if config.trials != 1:
            raise DomainError("--session runs a single trial; drop --trials")
        report, transcript = run_session(config, args.transport)
        transcript_path = None
        if args.transcript:
            transcript_path = str(write_transcript(args.transcript, transcript))
        summary = {**report_summary(report), "messages": len(transcript.entries)}
        artifact = RunArtifact(
            command="simulate",
            seed=config.seed,
            config=echo,
            summary=summary,
            report=report,
            transcript_path=transcript_path,
        )
        return CommandOutput(artifact)

    if config.trials == 1:
        report = run_protocol(config)
        artifact = RunArtifact(
            command="simulate", seed=config.seed, config=echo, summary=report_summary(report), report=report
        )
        return CommandOutput(artifact)

    reports = run_trials(config)
    table = _trial_table(reports)
    completed = table[~table["aborted"]]
    summary = {
        "trials": len(reports),
        "aborted": int(table["aborted"].sum()),
        "mean_key_length": float(completed["final_key_length"].mean()) if len(completed) else 0.0,
        "trials_with_mismatches": int((completed["key_mismatch_count"] > 0).sum()),
    }
    artifact = RunArtifact(
        command="simulate", seed=config.seed, config=echo, summary=summary, rows=table.to_dict("records")
    )
    return CommandOutput(artifact, table)


def sweep_points(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive grid from ``start`` to ``stop``, rounded to kill accumulated float drift."""
    if step <= 0.0 or stop < start:
        raise DomainError(f"sweep needs step > 0 and stop >= start, got {start}..{stop} by {step}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 10)


def cmd_sweep(args: argparse.Namespace) -> CommandOutput:
    points = sweep_points(args.start, args.stop, args.step)
    config = _planner_config(args)
    table = plan_table(points, config)
    table["mc_key_rate"] = np.nan
    table["mc_mismatch_rate"] = np.nan

    if args.mc_trials > 0:
        seed = _seed(args)
        for index, bit_error in enumerate(points):
            sim = SimConfig(
                n_sent=args.n_sent,
                rates=depolarizing(float(bit_error)),
                planner_config=config,
                seed=derive_seed(seed, "sweep", index),
                trials=args.mc_trials,
            )
            reports = run_trials(sim)
            key_bits = sum(report.final_key_length for report in reports)
            mismatches = sum(report.key_mismatch_count for report in reports)
            table.loc[index, "mc_key_rate"] = key_bits / (args.n_sent * len(reports))
            table.loc[index, "mc_mismatch_rate"] = mismatches / key_bits if key_bits else np.nan

    flips = int((table["feasible"].astype(int).diff().abs() > 0).sum())
    summary = {"points": len(points), "feasibility_flips": flips}
    echo = {
        "from": args.start,
        "to": args.stop,
        "step": args.step,
        "mc_trials": args.mc_trials,
        "n_sent": args.n_sent,
        "planner_config": config.model_dump(),
    }
    table = table[SWEEP_COLUMNS]
    artifact = RunArtifact(
        command="sweep", seed=_seed(args), config=echo, summary=summary, rows=table.to_dict("records")
    )
    return CommandOutput(artifact, table)


def cmd_replay(args: argparse.Namespace) -> CommandOutput:
    expected = None
    transcript_path = args.transcript
    if args.artifact:
        recorded = load_artifact(args.artifact)
        config = SimConfig.model_validate(recorded.config)
        expected = recorded.report
        transcript_path = transcript_path or recorded.transcript_path
    else:
        config = _sim_config(args)
    if not transcript_path:
        raise DomainError("replay needs a transcript path (positional or from --artifact)")

    report = replay(read_transcript(transcript_path), args.party, config, expected=expected)
    summary = {"party": args.party, "matches_recorded": expected is not None, **report_summary(report)}
    artifact = RunArtifact(
        command="replay",
        seed=config.seed,
        config=config.model_dump(mode="json"),
        summary=summary,
        report=report,
        transcript_path=str(transcript_path),
    )
    return CommandOutput(artifact)


COMMANDS: Dict[str, Callable[[argparse.Namespace], CommandOutput]] = {
    "threshold": cmd_threshold,
    "evolve": cmd_evolve,
    "plan": cmd_plan,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "replay": cmd_replay,
}
