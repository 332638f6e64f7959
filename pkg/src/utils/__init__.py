"""
Configuration, error handling, tables, output and parallel helpers.
"""
from src.utils.errors import ConfigError, DqptLabError, NumericalError, exit_code_for
from src.utils.parallel import parallel_map, resolve_threads

__all__ = [
    "ConfigError",
    "DqptLabError",
    "NumericalError",
    "exit_code_for",
    "parallel_map",
    "resolve_threads",
]
