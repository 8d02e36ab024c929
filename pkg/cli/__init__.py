"""
Command-line front door: threshold analysis, map evolution, planning, simulation, sweeps and replay.
"""

from .artifacts import RunArtifact, load_artifact, save_artifact, tool_version
from .commands import COMMANDS, CommandOutput, parse_rates, report_summary, sweep_points

__all__ = [
    'COMMANDS',
    'CommandOutput',
    'RunArtifact',
    'load_artifact',
    'parse_rates',
    'report_summary',
    'save_artifact',
    'sweep_points',
    'tool_version',
]
