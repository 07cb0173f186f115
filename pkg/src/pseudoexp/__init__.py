"""Explicit solutions of five integrable wave-equation families.

The package constructs pseudo-exponential-type potentials and solution
fields from constant matrix data tied together by Lyapunov-type identities,
and verifies every construction twice: exact identity residuals plus an
independent finite-difference check of the governing equations.
"""

from .errors import ConfigError, ConstructionError, NoSolutionError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConstructionError",
    "NoSolutionError",
    "__version__",
]
