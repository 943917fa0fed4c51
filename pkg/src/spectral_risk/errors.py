"""Exception types shared across the package."""


class SpectralRiskError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SpectralRiskError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ConvergenceError(SpectralRiskError, RuntimeError):
    """An iterative solve or a series failed to converge."""


class SingularProfileError(SpectralRiskError, ZeroDivisionError):
    """A profile was evaluated exactly at one of its poles."""


class SingularKernelError(SpectralRiskError, RuntimeError):
    """An empirical kernel matrix is numerically rank deficient."""


class StepSizeError(SpectralRiskError, RuntimeError):
    """The ODE integrator's local error estimate exceeded its tolerance."""


class ResolutionError(SpectralRiskError, RuntimeError):
    """A grid is too coarse for the requested divided-difference limit."""


class EstimateError(SpectralRiskError, RuntimeError):
    """Too many Monte-Carlo repetitions failed to produce an estimate."""


class ConfigError(SpectralRiskError, ValueError):
    """An experiment configuration file failed validation."""
