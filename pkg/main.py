import argparse
import json
import logging
import sys
from typing import Any, List, Optional

from dotenv import load_dotenv

from cli.artifacts import save_artifact
from cli.commands import COMMANDS, CommandOutput
from config import configure_logging, settings
from core.errors import InfeasibleError, InvariantViolation, SessionError, TranscriptError
from session.transport import TRANSPORTS

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INTERNAL = 3


def _add_planner_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--error-target", type=float, default=None, help="Post-PEC error target (default: settings)")
    parser.add_argument("--epsilon", type=float, default=None, help="Key fidelity epsilon (default: settings)")
    parser.add_argument("--max-k", type=int, default=None, help="Largest number of EP rounds to consider")


def _add_channel_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--rates", help="Pauli rates p_i,p_x,p_y,p_z")
    group.add_argument("--bit-error", type=float, help="Depolarizing channel with this bit error rate")


def _add_simulation_flags(parser: argparse.ArgumentParser) -> None:
    _add_channel_flags(parser)
    _add_planner_flags(parser)
    parser.add_argument("--n-sent", type=int, default=3_000_000, help="Qubits sent (default: %(default)s)")
    parser.add_argument("--trials", type=int, default=1, help="Independent trials (default: %(default)s)")
    parser.add_argument("--test-bits", type=int, default=None, help="Test positions per basis (default: settings)")
    parser.add_argument("--oracle-rates", action="store_true", help="Plan on the true channel instead of the estimate")
    parser.add_argument("--symmetric-estimate", action="store_true", help="Force p_x = p_y = p_z in the estimate")


def build_parser() -> argparse.ArgumentParser:
    """Create the argument parser with one sub-command per operation."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="Emit one JSON object instead of text/CSV")
    common.add_argument("--seed", type=int, default=None, help="Root seed (default: DEFAULT_SEED)")
    common.add_argument("--log-level", default=None, help="Log level (default: LOG_LEVEL)")
    common.add_argument("--save", action="store_true", help=f"Save a run artifact under {settings.OUTPUT_DIR}")
    common.add_argument("--output-dir", default=None, help="Artifact directory (default: OUTPUT_DIR)")

    parser = argparse.ArgumentParser(
        prog="sixstate",
        description="Six-state QKD adaptive two-way privacy amplification toolkit.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    threshold = commands.add_parser("threshold", parents=[common], help="Closed-form and numeric thresholds")
    threshold.add_argument("--numeric", action="store_true", help="Also bisect planner feasibility")
    threshold.add_argument("--tol", type=float, default=1e-4, help="Bisection tolerance (default: %(default)s)")
    threshold.add_argument("--lo", type=float, default=0.01, help="Lower bisection bracket")
    threshold.add_argument("--hi", type=float, default=0.40, help="Upper bisection bracket")
    threshold.add_argument("--steane", action="store_true", help="Also print the Steane fixed point")

    evolve = commands.add_parser("evolve", parents=[common], help="Iterate the EP map as CSV")
    evolve.add_argument("--rates", required=True, help="Pauli rates p_i,p_x,p_y,p_z")
    evolve.add_argument("--k", type=int, default=1, help="EP rounds (default: %(default)s)")
    evolve.add_argument(
        "--pec-r", type=int, default=None, help="Append exact joint rates after one PEC round of this width"
    )
    evolve.add_argument("--alternate", type=int, default=None, help="Fixed EP / [3,1,3] PEC alternation for N rounds")

    plan = commands.add_parser("plan", parents=[common], help="Choose (k, r, L) for a channel")
    _add_channel_flags(plan)
    _add_planner_flags(plan)
    plan.add_argument("--n-sifted", type=int, default=None, help="Finite number of sifted bits (default: unbounded)")

    simulate = commands.add_parser("simulate", parents=[common], help="Monte Carlo run of the full scheme")
    _add_simulation_flags(simulate)
    simulate.add_argument("--session", action="store_true", help="Run as an Alice/Bob message session")
    simulate.add_argument("--transport", choices=TRANSPORTS, default="in-process", help="Session transport")
    simulate.add_argument("--transcript", default=None, help="Write the session transcript to this file")

    sweep = commands.add_parser("sweep", parents=[common], help="Planner feasibility over depolarizing bit errors")
    sweep.add_argument("--from", dest="start", type=float, default=0.05, help="First bit error")
    sweep.add_argument("--to", dest="stop", type=float, default=0.30, help="Last bit error")
    sweep.add_argument("--step", type=float, default=0.01, help="Grid step")
    sweep.add_argument("--mc-trials", type=int, default=0, help="Monte Carlo trials per point (default: none)")
    sweep.add_argument("--n-sent", type=int, default=3_000_000, help="Qubits sent per Monte Carlo trial")
    _add_planner_flags(sweep)

    replay = commands.add_parser("replay", parents=[common], help="Replay one party against a transcript")
    replay.add_argument("transcript", nargs="?", default=None, help="Transcript file")
    replay.add_argument("--party", choices=["alice", "bob"], default="bob", help="Party to replay")
    replay.add_argument("--artifact", default=None, help="simulate --session artifact holding config and report")
    _add_simulation_flags(replay)

    return parser


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


def render(output: CommandOutput, as_json: bool) -> str:
    """Render a command's output as JSON, CSV or key=value lines."""
    if as_json:
        return json.dumps(output.artifact.model_dump(mode="json"), indent=2)
    if output.table is not None:
        return output.table.to_csv(index=False).rstrip("\n")
    return "\n".join(f"{key}={_format_value(value)}" for key, value in output.artifact.summary.items())


def main(argv: Optional[List[str]] = None) -> int:
    """Parse flags, run one command and print its output.

    Returns:
        Process exit code: 0 success, 2 usage or domain error, 3 internal invariant violation
    """
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        configure_logging(args.log_level)
        output = COMMANDS[args.command](args)
    except (ValueError, InfeasibleError, TranscriptError) as e:
        # DomainError, and pydantic ValidationError wrapping it, are both ValueErrors
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (InvariantViolation, SessionError) as e:
        logger.exception("Internal failure in %s", args.command)
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL

    print(render(output, args.json))
    if args.save:
        path = save_artifact(output.artifact, args.output_dir)
        print(f"Artifact saved to: {path}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
