"""Scenario files, sweeps, verification suites and the command line."""
from .scenario import ConfigError, Scenario, execute, run_scenario
from .sweep import SweepSpec, run_sweep, sweep
from .verification import verify

__all__ = ["ConfigError", "Scenario", "execute", "run_scenario", "SweepSpec", "run_sweep",
           "sweep", "verify"]
