"""Configuration, experiment pipelines, result files and the command line."""
from .config import ConfigError, ExperimentConfig, ExperimentKind, config_hash, dump_config, load_config, parse_config
from .experiments import audit_rows, run_experiment
from .io import ResultRow, read_pattern, write_pattern, write_results

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentKind",
    "config_hash",
    "dump_config",
    "load_config",
    "parse_config",
    "audit_rows",
    "run_experiment",
    "ResultRow",
    "read_pattern",
    "write_pattern",
    "write_results",
]
