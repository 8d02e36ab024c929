import json
import logging
import os
import subprocess
from datetime import datetime
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from config import settings
from simulation.models import SimReport

logger = logging.getLogger(__name__)

FALLBACK_VERSION = "0.1.0"


@lru_cache(maxsize=None)
def tool_version() -> str:
    """``git describe`` of the working tree, or the package version outside a checkout."""
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
    except (OSError, subprocess.SubprocessError):
        return FALLBACK_VERSION
    version = result.stdout.strip()
    return version if result.returncode == 0 and version else FALLBACK_VERSION


class RunArtifact(BaseModel):
    """Self-describing record of one CLI command: enough to re-run it."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    command: str
    version: str = Field(default_factory=tool_version)
    seed: Optional[int] = None
    created_at: str = Field(default_factory=lambda: datetime.now().isoformat(timespec="seconds"))
    config: Dict[str, Any] = Field(default_factory=dict)
    summary: Dict[str, Any] = Field(default_factory=dict)
    report: Optional[SimReport] = None
    rows: List[Dict[str, Any]] = Field(default_factory=list)
    transcript_path: Optional[str] = None


def save_artifact(artifact: RunArtifact, output_dir: Optional[str] = None) -> Path:
    """Write ``artifact`` as ``<command>_<timestamp>.json`` under ``output_dir``.

    Args:
        artifact: The artifact to save
        output_dir: Target directory; defaults to settings.OUTPUT_DIR

    Returns:
        Path of the written file
    """
    directory = Path(output_dir or settings.OUTPUT_DIR)
    directory.mkdir(parents=True, exist_ok=True)
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S_%f")
    path = directory / f"{artifact.command}_{timestamp}.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(artifact.model_dump(mode="json"), f, indent=2)
    logger.info("Artifact saved to %s", path)
    return path


def load_artifact(path: Union[str, Path]) -> RunArtifact:
    with open(path, "r", encoding="utf-8") as f:
        return RunArtifact.model_validate(json.load(f))
