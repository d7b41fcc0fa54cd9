"""Simulation-based parameter estimation: global search then local quasi-Fisher scoring."""

from .core import (
    Bounds,
    Config,
    ConfigError,
    DegenerateStatisticError,
    FitResult,
    IfitError,
    ModelError,
    NonConvergenceError,
    SimArchive,
    TraceRecord,
    validate_config,
)
from .external import ProtocolError, SubprocessSimulator
from .harness import benchmark, fit, mc_error_study, read_result, write_result
from .kernels import BACKEND
from .sampling import RngStream

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Bounds", "Config", "ConfigError", "DegenerateStatisticError", "FitResult",
    "IfitError", "ModelError", "NonConvergenceError", "ProtocolError", "RngStream", "SimArchive",
    "SubprocessSimulator", "TraceRecord", "benchmark", "fit", "mc_error_study", "read_result",
    "validate_config", "write_result", "__version__",
]
