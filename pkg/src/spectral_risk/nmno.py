"""Naive Model of Noisy Observations: loss functional and limit constants.

The NMNO functional treats the top-N population modes as perfectly resolved:

    L[h] = (1/2) sum_{captured l} [ c_l^2 (1 - h(lambda_l))^2
                                    + (sigma^2/N) h(lambda_l)^2 ]

(discrete flavors; the continuous flavor integrates the densities over
[N^-nu, 1]).  For noisy observations this simple functional is the common
N -> infinity limit of the circle and Gaussian-features models, which makes
its closed-form limit constants the reference asymptotics for both.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .breakdown import LossBreakdown
from .errors import DomainError
from .profiles import SpectralProfile
from .spectrum import PowerLawSpectrum
from .specfun import riemann_zeta


def nmno_loss(spec: PowerLawSpectrum, n_samples: int, sigma_sq: float,
              profile: SpectralProfile) -> LossBreakdown:
    """NMNO generalization error over the N captured modes.

    The signal term is a pure bias (modes are resolved deterministically,
    there is no dataset variance in this model).
    """
    n = int(n_samples)
    if n < 1:
        raise DomainError("need at least one sample")
    if sigma_sq < 0.0:
        raise DomainError("noise variance must be >= 0")
    if spec.flavor == "continuous":
        lam_min = spec.lambda_min(n)

        def signal(lam: float) -> float:
            return float(profile.residual(lam)) ** 2 * spec.density_at(lam, "coefficient")

        def noise(lam: float) -> float:
            return float(profile.evaluate(lam)) ** 2 * spec.density_at(lam, "eigenvalue")

        # integrate on a log axis: the densities are power laws over many decades
        lo, hi = math.log(lam_min), 0.0
        bias = 0.5 * quad(lambda s: signal(math.exp(s)) * math.exp(s), lo, hi,
                          epsabs=0.0, epsrel=1e-10, limit=400)[0]
        var_noise = 0.0
        if sigma_sq > 0.0:
            var_noise = (sigma_sq / (2.0 * n)) * quad(
                lambda s: noise(math.exp(s)) * math.exp(s), lo, hi,
                epsabs=0.0, epsrel=1e-10, limit=400,
            )[0]
    else:
        lam = spec.leading_eigenvalues(n)
        csq = spec.leading_coefficients_sq(n)
        res = np.asarray(profile.residual(lam), dtype=float)
        h = np.asarray(profile.evaluate(lam), dtype=float)
        bias = 0.5 * float(np.sum(csq * res**2))
        var_noise = (sigma_sq / (2.0 * n)) * float(np.sum(h**2))
    return LossBreakdown.from_parts(
        bias=bias, variance_dataset=0.0, variance_noise=var_noise, provenance="nmno"
    )


def nmno_optimal_profile(spec: PowerLawSpectrum, n_samples: int, sigma_sq: float,
                         lam: float) -> float:
    """Pointwise minimizer h = c^2 / (c^2 + sigma^2/N) of the captured mode at lam."""
    n = int(n_samples)
    if spec.flavor == "continuous":
        if not spec.lambda_min(n) <= lam <= 1.0:
            raise DomainError("lambda is outside the captured band")
        mc = spec.density_at(lam, "coefficient")
        ml = spec.density_at(lam, "eigenvalue")
        return mc / (mc + sigma_sq * ml / n)
    lams = spec.leading_eigenvalues(n)
    csqs = spec.leading_coefficients_sq(n)
    match = np.nonzero(np.isclose(lams, lam, rtol=1e-12, atol=0.0))[0]
    if match.size == 0:
        raise DomainError(f"lambda = {lam} is not among the {n} captured eigenvalues")
    csq = float(csqs[match[0]])
    return csq / (csq + sigma_sq / n)


# ----------------------------------------------------------------------------
# closed-form N -> infinity constants at the optimal localization scale


def _check_t_prime(value: float, name: str) -> float:
    value = float(value)
    if not value > 0.0:
        raise DomainError(f"{name} must be positive")
    return value


def saturated_inverse_power_sum(spec: PowerLawSpectrum) -> float:
    """sum_l c_l^2 / lambda_l^2 for kappa > 2 nu, any flavor."""
    if not spec.kappa > 2.0 * spec.nu:
        raise DomainError("sum c^2/lambda^2 diverges unless kappa > 2 nu")
    alpha = spec.kappa + 1.0 - 2.0 * spec.nu
    if spec.flavor == "continuous":
        return 1.0 / (spec.kappa - 2.0 * spec.nu)
    if spec.truncation is not None:
        count = spec.mode_count()
        return float(
            np.sum(spec.leading_coefficients_sq(count) / spec.leading_eigenvalues(count) ** 2)
        )
    if spec.flavor == "circle":
        return spec.index_scale ** (-alpha) * (2.0 * riemann_zeta(alpha) - 1.0)
    return riemann_zeta(alpha)


def nmno_limit_constant(algorithm: str, parameter: float, nu: float, kappa: float,
                        sigma_sq: float, phase: str = "nonsaturated",
                        spec_for_saturated_sum: PowerLawSpectrum | None = None) -> float:
    """Coefficient C of the NMNO loss asymptotic at unit-free parameters.

    * ``gf`` with t' (nonsaturated only):  L = C N^(-kappa/(kappa+1)) for
      t = t' N^(nu/(kappa+1)),
    * ``krr`` nonsaturated with eta':      L = C N^(-kappa/(kappa+1)) for
      eta = eta' N^(-nu/(kappa+1)),
    * ``krr`` saturated (kappa > 2 nu):    L = C N^(-2nu/(2nu+1)) for
      eta = eta' N^(-nu/(2nu+1)); needs a spectrum for sum c^2/lambda^2.

    Evaluated by quadrature of the localized-scale integrals (the Gamma and
    Beta reductions serve as independent oracles in the test suite).
    """
    if algorithm not in ("gf", "krr"):
        raise DomainError(f"unknown algorithm {algorithm!r}")
    if phase not in ("nonsaturated", "saturated"):
        raise DomainError(f"unknown phase {phase!r}")
    p = _check_t_prime(parameter, "scaled parameter")

    if phase == "nonsaturated":
        if not kappa < 2.0 * nu:
            raise DomainError("nonsaturated constants require kappa < 2 nu")
        if algorithm == "gf":
            s_center = -math.log(p)  # bump at lambda ~ 1/t'

            def integrand(s: float) -> float:
                lam = math.exp(s)
                sig = math.exp(-2.0 * p * lam) * lam ** (kappa / nu)
                noi = sigma_sq * (-math.expm1(-p * lam)) ** 2 * lam ** (-1.0 / nu)
                return sig + noi
        else:
            s_center = math.log(p)  # bump at lambda ~ eta'

            def integrand(s: float) -> float:
                lam = math.exp(s)
                sig = p**2 * lam ** (kappa / nu)
                noi = sigma_sq * lam ** (2.0 - 1.0 / nu)
                return (sig + noi) / (lam + p) ** 2
        # log-axis quadrature; window sized by the tail exponents so both
        # truncation errors sit below 1e-14 relative
        decay_lo = min(kappa / nu, 2.0 - 1.0 / nu)
        s_lo = min(0.0, s_center) - 40.0 / decay_lo
        s_hi = max(0.0, s_center) + 40.0 * nu
        val = quad(integrand, s_lo, s_hi, epsabs=0.0, epsrel=1e-11,
                   limit=500, points=[s_center])[0]
        return val / (2.0 * nu)

    if algorithm != "krr":
        raise DomainError("only KRR saturates; GF attains kappa/(kappa+1) for all kappa")
    if not kappa > 2.0 * nu:
        raise DomainError("saturated constants require kappa > 2 nu")
    if spec_for_saturated_sum is None:
        raise DomainError("saturated constant needs a spectrum for sum c^2/lambda^2")
    s_center = math.log(p)
    s_lo = min(0.0, s_center) - 40.0 / (2.0 - 1.0 / nu)
    s_hi = max(0.0, s_center) + 40.0 * nu
    noise = quad(lambda s: math.exp(s) ** (2.0 - 1.0 / nu) / (math.exp(s) + p) ** 2,
                 s_lo, s_hi, epsabs=0.0, epsrel=1e-11, limit=500,
                 points=[s_center])[0] * sigma_sq / nu
    signal = p**2 * saturated_inverse_power_sum(spec_for_saturated_sum)
    return 0.5 * (noise + signal)


def saturated_optimal_eta_prime(nu: float, sigma_sq: float,
                                spec_for_saturated_sum: PowerLawSpectrum) -> float:
    """Scaled ridge eta' minimizing the saturated KRR constant (closed form)."""
    s_sum = saturated_inverse_power_sum(spec_for_saturated_sum)
    coeff = sigma_sq * math.gamma(2.0 - 1.0 / nu) * math.gamma(1.0 / nu) / (2.0 * nu**2 * s_sum)
    return coeff ** (1.0 / (2.0 + 1.0 / nu))


def minimize_limit_constant(algorithm: str, nu: float, kappa: float, sigma_sq: float,
                            phase: str = "nonsaturated",
                            spec_for_saturated_sum: PowerLawSpectrum | None = None):
    """(best parameter, best constant) by 1-d minimization over the scaled knob."""
    res = minimize_scalar(
        lambda lg: nmno_limit_constant(
            algorithm, math.exp(lg), nu, kappa, sigma_sq, phase, spec_for_saturated_sum
        ),
        bounds=(-12.0, 12.0),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return math.exp(res.x), float(res.fun)
