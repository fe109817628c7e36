"""Experiment configs, presets, the run pipeline and the command line."""
from .config import CheckSpec, ConfigError, ExperimentConfig, load_config, parse_config
from .presets import PRESET_NAMES, preset, preset_text
from .runner import CheckResult, RunResult, compare, load_thresholds, run, run_experiment

__all__ = [
    "CheckResult", "CheckSpec", "ConfigError", "ExperimentConfig", "PRESET_NAMES", "RunResult",
    "compare", "load_config", "load_thresholds", "parse_config", "preset", "preset_text", "run",
    "run_experiment",
]
