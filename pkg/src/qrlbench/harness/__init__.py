from .config import RunConfig, load_config, parse_config
from .runner import run_experiment
from .sweep import SWEEP_AXES, run_sweep
from .report import write_report

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config",
    "run_experiment",
    "run_sweep",
    "SWEEP_AXES",
    "write_report",
]
