"""Configuration parsing, result serialization, and the verification CLI."""

from .config import ConfigError, ConfigIssue, LoadedConfig, VerifyThresholds, load_config, parse_config
from .outputs import write_outputs
from .cli import cli, main

__all__ = [
    "ConfigError",
    "ConfigIssue",
    "LoadedConfig",
    "VerifyThresholds",
    "cli",
    "load_config",
    "main",
    "parse_config",
    "write_outputs",
]
