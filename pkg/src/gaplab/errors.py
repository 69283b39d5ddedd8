"""Exception types shared across gaplab.

The CLI maps these onto exit codes (see :mod:`gaplab.cli`).
"""


class GaplabError(Exception):
    """Base class."""


class DomainError(GaplabError, ValueError):
    """Argument outside the range where a function is defined or certified."""


class ConfigError(GaplabError, ValueError):
    """Inconsistent parameters, grids, or experiment configuration."""


class ProfileError(ConfigError):
    """Curvature profile is not strictly negative on the working rectangle."""


class MonotonicityError(GaplabError):
    """mu_1 fails to decrease at t0; the geometry cannot produce a positive delta."""


class NumericError(GaplabError, RuntimeError):
    """An eigensolver or integrator failed (factorization, convergence, inertia)."""


class CertificationFailure(GaplabError):
    """A runtime certificate did not hold."""
