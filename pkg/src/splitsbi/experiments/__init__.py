"""Experiment configurations and the command-line driver."""

from .config import CONFIG_DIR, ExperimentConfig, builtin_configs, load_config

__all__ = ["CONFIG_DIR", "ExperimentConfig", "builtin_configs", "load_config"]
