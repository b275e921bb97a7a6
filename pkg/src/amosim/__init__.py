"""Deterministic simulator and checker for at-most-once task execution."""

from .engine import Config, ExecutionTrace, run, run_with_adversary
from .ranked_set import RankedSet, select_excluding
from .registers import SharedMemory

__version__ = "0.1.0"

__all__ = [
    "Config",
    "ExecutionTrace",
    "RankedSet",
    "SharedMemory",
    "run",
    "run_with_adversary",
    "select_excluding",
    "__version__",
]
