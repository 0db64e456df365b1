"""Job configuration, job directories and the command line."""

from .config import ConfigError, JobConfig, dump, parse, validate
from .main import main

__all__ = ["ConfigError", "JobConfig", "dump", "main", "parse", "validate"]
