"""Simulation and trajectory classification for linear semigroup dynamics."""
from .core import InputError, TrajectoryTrace, UnsupportedOperationError, deviation_trace

__version__ = "0.1.0"

__all__ = ["InputError", "TrajectoryTrace", "UnsupportedOperationError", "deviation_trace",
           "__version__"]
