"""Simulation and analysis toolkit for trapped 171Yb+ / 174Yb+ hyperfine qubits."""

__version__ = "0.1.0"

from .atom import (AtomSpecies, MagneticEnvironment, PhysicalConstants, build_level_scheme,
                   qubit_splitting, transition_offset)
from .errors import (ConfigError, ConstraintViolation, FitError, ForbiddenTransitionError,
                     InsufficientDataError, ScanCoverageError, UnderConstrainedError, YbQubitError)

__all__ = [
    "AtomSpecies", "MagneticEnvironment", "PhysicalConstants", "build_level_scheme",
    "qubit_splitting", "transition_offset", "ConfigError", "ConstraintViolation", "FitError",
    "ForbiddenTransitionError", "InsufficientDataError", "ScanCoverageError",
    "UnderConstrainedError", "YbQubitError", "__version__",
]
