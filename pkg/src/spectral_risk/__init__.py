"""Generalization error of spectral kernel algorithms under power-law spectra.

Exact lattice-model evaluation, random-matrix (Gaussian-features) theory,
the naive noisy-observations surrogate, N -> infinity asymptotics, scaling
calculus, and Monte-Carlo verification -- plus a batch CLI.
"""

from .breakdown import LossBreakdown
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    EstimateError,
    ResolutionError,
    SingularKernelError,
    SingularProfileError,
    SpectralRiskError,
    StepSizeError,
)
from .profiles import (
    GradientDescent,
    GradientFlow,
    Interpolation,
    Krr,
    PairGFRun,
    SpectralProfile,
    Tabulated,
    pair_gf_control_krr,
    pair_gf_simulate,
    parse_profile,
)
from .scaling import RateReport, ScalingProfile, check_optimality_conditions, nmno_scaling, scaling_profile_of
from .specfun import (
    hurwitz_zeta,
    power_law_tail_integral,
    riemann_zeta,
    symmetrized_hurwitz_zeta,
)
from .spectrum import PowerLawSpectrum

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "EstimateError",
    "GradientDescent",
    "GradientFlow",
    "Interpolation",
    "Krr",
    "LossBreakdown",
    "PairGFRun",
    "PowerLawSpectrum",
    "RateReport",
    "ResolutionError",
    "ScalingProfile",
    "SingularKernelError",
    "SingularProfileError",
    "SpectralProfile",
    "SpectralRiskError",
    "StepSizeError",
    "Tabulated",
    "check_optimality_conditions",
    "hurwitz_zeta",
    "nmno_scaling",
    "pair_gf_control_krr",
    "pair_gf_simulate",
    "parse_profile",
    "power_law_tail_integral",
    "riemann_zeta",
    "scaling_profile_of",
    "symmetrized_hurwitz_zeta",
]

__version__ = "0.1.0"
