"""Experiment harness behind the ``bil`` command line tool."""

from .commands import Outcome, run
from .config import COMMANDS, RunConfig, load_config, parse_config

__all__ = ["COMMANDS", "Outcome", "RunConfig", "load_config", "parse_config", "run"]
