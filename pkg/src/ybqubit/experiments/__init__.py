from .artifacts import OUT_ENV, RunArtifact, Table
from .config import SCENARIOS, ExperimentConfig, config_hash, grid, load_config, load_defaults, resolve
from .cli import cli_main
from .scenarios import (RUNNERS, DetectionChain, run_branching, run_detection, run_hyperfine_scan,
                        run_rabi, run_ramsey, run_state_prep)

__all__ = [
    "cli_main", "OUT_ENV", "RunArtifact", "Table", "SCENARIOS", "ExperimentConfig", "config_hash", "grid",
    "load_config", "load_defaults", "resolve", "RUNNERS", "DetectionChain", "run_branching",
    "run_detection", "run_hyperfine_scan", "run_rabi", "run_ramsey", "run_state_prep",
]
