# src/errors.py
from typing import Any, List, Optional


class SimulationError(Exception):
    """Base class for every error raised by the simulator"""


class ConfigurationError(SimulationError):
    """Invalid model parameters, experiment files or preset names"""

    def __init__(self, message: str, errors: Optional[List[Any]] = None):
        super().__init__(message)
        self.errors = errors or []


class DomainError(SimulationError, ValueError):
    """An operation was called outside its domain"""


class CapabilityError(SimulationError):
    """An exhaustive search was asked to go beyond its size cap"""


class BoundViolationError(SimulationError):
    """A queue exceeded its theoretical upper bound"""


class InternalError(SimulationError):
    """An algorithmic invariant did not hold"""


class OutputPathError(SimulationError, OSError):
    """The results directory cannot be created or written"""
