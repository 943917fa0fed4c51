"""Exact and asymptotic generalization error of the circle data model.

With training inputs on a regular lattice of size N, aliasing folds every
population quantity lambda_l^a c_l^{2b} into its N-deformation

    [lambda_k^a c_k^{2b}]_N = sum_n lambda_{k+Nn}^a c_{k+Nn}^{2b},

periodic in k with period N.  For pure power laws the fold-in tails are
Hurwitz zeta values, so the deformation -- and hence the exact loss of any
spectral profile -- is available in closed form at any N.

The module also carries the two N -> infinity noiseless limits:

* non-saturated (kappa < 2 nu): the loss is N^-kappa times a fixed integral
  over tau = (|k|+1)/N of symmetrized Hurwitz zeta combinations;
* saturated (kappa > 2 nu): the loss is N^-2nu times a convergent lattice
  sum, minimized by KRR with the negative ridge eta* = -2 zeta(nu) N^-nu.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.integrate import quad

from .breakdown import LossBreakdown
from .errors import ConvergenceError, DomainError
from .profiles import SpectralProfile, Tabulated
from .spectrum import PowerLawSpectrum
from .specfun import (
    hurwitz_zeta,
    riemann_zeta,
    symmetrized_hurwitz_zeta_split,
)

# lower cutoff for the tau-integrals of the non-saturated limit
_TAU_DELTA = 1e-8


def _require_circle(spec: PowerLawSpectrum) -> None:
    if spec.flavor != "circle":
        raise DomainError("circle-model operations need a circle-flavor spectrum")


def reduce_index(k: int, n_samples: int) -> int:
    """Reduce k modulo N into the window (-floor(N/2), ceil(N/2)]."""
    n = int(n_samples)
    lo = -(n // 2) + 1  # smallest member of the window
    return (int(k) - lo) % n + lo


def _deformation_exponent(spec: PowerLawSpectrum, a: float, b: float) -> float:
    alpha = a * spec.nu + b * (spec.kappa + 1.0)
    if alpha <= 1.0:
        raise ConvergenceError(
            f"N-deformation diverges: a*nu + b*(kappa+1) = {alpha} <= 1"
        )
    return alpha


def _deformation_array(spec: PowerLawSpectrum, n_samples: int, k: np.ndarray,
                       a: float, b: float) -> np.ndarray:
    """[lambda_k^a c_k^{2b}]_N for k already reduced into the window."""
    alpha = _deformation_exponent(spec, a, b)
    n = float(n_samples)
    scale = spec.index_scale
    k = np.asarray(k, dtype=float)
    head = (np.abs(k) + 1.0) ** (-alpha)
    if spec.truncation is not None:
        # truncated spectrum: sum the finitely many fold-ins directly
        p = int(spec.truncation)
        vals = np.zeros_like(head)
        n_max = int(np.ceil((p + n / 2) / n)) + 1
        for shift in range(-n_max, n_max + 1):
            idx = k + shift * n
            mask = np.abs(idx) <= p
            vals = vals + np.where(mask, (np.abs(idx) + 1.0) ** (-alpha), 0.0)
        return scale ** (-alpha) * vals
    tail = n ** (-alpha) * (
        hurwitz_zeta(alpha, 1.0 + (1.0 + k) / n)
        + hurwitz_zeta(alpha, 1.0 + (1.0 - k) / n)
    )
    return scale ** (-alpha) * (head + tail)


def n_deformation(spec: PowerLawSpectrum, n_samples: int, k: int, a: float, b: float) -> float:
    """Closed-form [lambda_k^a c_k^{2b}]_N; any integer k (periodic)."""
    _require_circle(spec)
    if int(n_samples) < 1:
        raise DomainError("need at least one sample")
    k_red = reduce_index(k, n_samples)
    return float(_deformation_array(spec, n_samples, np.array(k_red), a, b))


def _representatives(n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Distinct |k| classes of the summation window with their multiplicities.

    [.]_N is even in k and N-periodic, so the window (-floor(N/2), ceil(N/2)]
    collapses onto |k| in {0, ..., floor(N/2)} with weight 2 for interior
    classes (both signs present) and 1 for k = 0 and, when N is even, for
    the |k| = N/2 class.
    """
    n = int(n_samples)
    reps = np.arange(n // 2 + 1)
    weights = np.full(reps.shape, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    return reps, weights


def _loss_terms(spec: PowerLawSpectrum, n_samples: int, sigma_sq: float,
                h_values: np.ndarray, reps: np.ndarray, weights: np.ndarray):
    """Per-class bias / dataset-variance / noise-variance summands."""
    d_c = _deformation_array(spec, n_samples, reps, 0.0, 1.0)      # [c^2]
    d_l = _deformation_array(spec, n_samples, reps, 1.0, 0.0)      # [lambda]
    d_l2 = _deformation_array(spec, n_samples, reps, 2.0, 0.0)     # [lambda^2]
    d_lc = _deformation_array(spec, n_samples, reps, 1.0, 1.0)     # [lambda c^2]
    d_l2c = _deformation_array(spec, n_samples, reps, 2.0, 1.0)    # [lambda^2 c^2]

    h = np.asarray(h_values, dtype=float)
    bias = 0.5 * weights * (d_c - 2.0 * (d_lc / d_l) * h + (d_l2c / d_l**2) * h**2)
    var_data = 0.5 * weights * h**2 * (d_l2 * d_c - d_l2c) / d_l**2
    var_noise = 0.5 * weights * (sigma_sq / n_samples) * (d_l2 / d_l**2) * h**2
    return bias, var_data, var_noise


def empirical_eigenvalues(spec: PowerLawSpectrum, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Distinct empirical eigenvalues [lambda_k]_N with class weights."""
    _require_circle(spec)
    reps, weights = _representatives(n_samples)
    return _deformation_array(spec, n_samples, reps, 1.0, 0.0), weights


def exact_loss(spec: PowerLawSpectrum, n_samples: int, sigma_sq: float,
               profile: SpectralProfile) -> LossBreakdown:
    """Exact expected generalization error at finite N (no approximations)."""
    _require_circle(spec)
    n = int(n_samples)
    if n < 2:
        raise DomainError("the lattice model needs N >= 2")
    if sigma_sq < 0.0:
        raise DomainError("noise variance must be >= 0")
    reps, weights = _representatives(n)
    lam_hat = _deformation_array(spec, n, reps, 1.0, 0.0)
    h = np.asarray(profile.evaluate(lam_hat), dtype=float)
    bias, var_data, var_noise = _loss_terms(spec, n, sigma_sq, h, reps, weights)
    return LossBreakdown.from_parts(
        bias=float(np.sum(bias)),
        variance_dataset=float(np.sum(var_data)),
        variance_noise=float(np.sum(var_noise)),
        provenance="exact",
    )


def optimal_profile_value(spec: PowerLawSpectrum, n_samples: int, sigma_sq: float,
                          k: int) -> float:
    """Pointwise loss minimizer h*([lambda_k]_N)."""
    _require_circle(spec)
    k_red = np.array(reduce_index(k, n_samples))
    d_c = _deformation_array(spec, n_samples, k_red, 0.0, 1.0)
    d_l = _deformation_array(spec, n_samples, k_red, 1.0, 0.0)
    d_l2 = _deformation_array(spec, n_samples, k_red, 2.0, 0.0)
    d_lc = _deformation_array(spec, n_samples, k_red, 1.0, 1.0)
    return float(d_lc * d_l / ((sigma_sq / n_samples + d_c) * d_l2))


def optimal_loss(spec: PowerLawSpectrum, n_samples: int, sigma_sq: float) -> LossBreakdown:
    """Loss of the optimal profile: free term of the completed square."""
    _require_circle(spec)
    n = int(n_samples)
    reps, weights = _representatives(n)
    d_c = _deformation_array(spec, n, reps, 0.0, 1.0)
    d_l = _deformation_array(spec, n, reps, 1.0, 0.0)
    d_l2 = _deformation_array(spec, n, reps, 2.0, 0.0)
    d_lc = _deformation_array(spec, n, reps, 1.0, 1.0)
    h_star = d_lc * d_l / ((sigma_sq / n + d_c) * d_l2)
    bias, var_data, var_noise = _loss_terms(spec, n, sigma_sq, h_star, reps, weights)
    return LossBreakdown.from_parts(
        bias=float(np.sum(bias)),
        variance_dataset=float(np.sum(var_data)),
        variance_noise=float(np.sum(var_noise)),
        provenance="exact",
    )


# ----------------------------------------------------------------------------
# noiseless N -> infinity, non-saturated phase (kappa < 2 nu)


def _sym_zeta_factors(nu: float, kappa: float, tau: float):
    """Head-normalized symmetrized zeta ratios at tau.

    Returns (p, r, q, d) with
        zeta_tau^(kappa+1)      = tau^-(kappa+1)    * (1 + p)
        zeta_tau^(2 nu)         = tau^-2nu          * (1 + r)
        zeta_tau^(nu+kappa+1)   = tau^-(nu+kappa+1) * (1 + q)
        zeta_tau^(nu)           = tau^-nu           * (1 + d)
    so products of heads cancel analytically instead of numerically.
    """
    tau = float(tau)
    out = []
    for alpha in (kappa + 1.0, 2.0 * nu, nu + kappa + 1.0, nu):
        _, rest = symmetrized_hurwitz_zeta_split(alpha, tau)
        out.append(rest * tau**alpha)
    return tuple(out)


def circle_optimal_profile_limit(nu: float, kappa: float, tau):
    """N -> infinity noiseless optimal profile h*(lambda_tau), tau in (0, 1).

    Equals zeta^(nu+kappa+1) zeta^(nu) / (zeta^(kappa+1) zeta^(2nu)); the
    head powers cancel exactly, leaving a ratio that tends to 1 as
    tau -> 0 and crosses 1 with the sign of kappa - (nu - 1).
    """
    if not kappa < 2.0 * nu:
        raise DomainError("the continuum optimal profile needs kappa < 2 nu")
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau_arr <= 0.0) or np.any(tau_arr >= 1.0):
        raise DomainError("tau must lie in (0, 1)")
    out = np.empty_like(tau_arr)
    for i, t in enumerate(tau_arr):
        t_eff = min(t, 1.0 - t)  # all zeta_tau are symmetric in tau <-> 1-tau
        p, r, q, d = _sym_zeta_factors(nu, kappa, t_eff)
        out[i] = (1.0 + q) * (1.0 + d) / ((1.0 + p) * (1.0 + r))
    return float(out[0]) if np.ndim(tau) == 0 else out


def limit_eigenvalue(nu: float, tau, n_samples: int):
    """lambda_tau = N^-nu zeta_tau^(nu), the continuum empirical eigenvalue."""
    head, rest = symmetrized_hurwitz_zeta_split(nu, np.asarray(tau, dtype=float))
    return float(n_samples) ** (-nu) * (head + rest)


def _nonsaturated_integrand(nu: float, kappa: float, tau: float, h: float | None) -> float:
    p, r, q, d = _sym_zeta_factors(nu, kappa, tau)
    head_c = tau ** (-(kappa + 1.0))
    # free term: zeta^(k+1) - (zeta^(nu+k+1))^2/(zeta^(k+1) zeta^(2nu));
    # the tau^-(kappa+1) heads cancel exactly in this form.
    free = head_c * ((p - q) * (2.0 + p + q) + r * (1.0 + p) ** 2) / ((1.0 + p) * (1.0 + r))
    if h is None:
        return free
    h_star = (1.0 + q) * (1.0 + d) / ((1.0 + p) * (1.0 + r))
    weight = head_c * (1.0 + p) * (1.0 + r) / (1.0 + d) ** 2
    return weight * (h - h_star) ** 2 + free


def noiseless_limit_loss_nonsaturated(profile_of_tau, nu: float, kappa: float) -> float:
    """Coefficient C in L = C N^-kappa (noiseless, kappa < 2 nu).

    ``profile_of_tau`` maps tau in (0, 1/2] to h(lambda_tau); pass None for
    the optimal profile (its squared-deviation term vanishes identically).
    Parametric profiles enter through their scaled parameter, e.g.
    ``lambda tau: z/(z + eta_scaled)`` with z = zeta_tau^(nu) = N^nu lambda.
    """
    if not kappa < 2.0 * nu:
        raise DomainError("non-saturated limit requires kappa < 2 nu")

    def h_at(tau: float):
        return None if profile_of_tau is None else float(profile_of_tau(tau))

    kappa_t = kappa + 1.0 - 2.0 * nu  # tau-exponent of the worst free-term piece
    if kappa_t <= 0.0:
        val, err = quad(
            lambda t: _nonsaturated_integrand(nu, kappa, t, h_at(t)),
            _TAU_DELTA, 0.5, epsabs=0.0, epsrel=1e-9, limit=300,
        )
    else:
        # integrable tau^-kappa_t blow-up at 0: flatten it with tau = u^(1/(1-kappa_t))
        power = 1.0 / (1.0 - kappa_t)

        def g(u: float) -> float:
            t = u**power
            return _nonsaturated_integrand(nu, kappa, t, h_at(t)) * power * u ** (power - 1.0)

        val, err = quad(g, _TAU_DELTA, 0.5 ** (1.0 - kappa_t), epsabs=0.0,
                        epsrel=1e-9, limit=300)
    if not np.isfinite(val) or (abs(val) > 0 and err > 1e-6 * abs(val)):
        raise ConvergenceError(f"tau-integral did not converge (value {val}, err {err})")
    return float(val)


def limit_optimal_profile_table(nu: float, kappa: float, n_samples: int,
                                points: int = 4096) -> Tabulated:
    """The continuum-optimal profile as a tabulated h(lambda) at a given N.

    Feeding this into :func:`exact_loss` realizes the Fig.-3-style
    consistency check L_exact ~ C N^-kappa.
    """
    taus = np.logspace(np.log10(1.0 / (8.0 * n_samples)), np.log10(0.5), points)
    lams = limit_eigenvalue(nu, taus, n_samples)
    values = circle_optimal_profile_limit(nu, kappa, taus)
    order = np.argsort(lams)
    return Tabulated(lambdas=tuple(lams[order]), values=tuple(values[order]))


# ----------------------------------------------------------------------------
# noiseless N -> infinity, saturated phase (kappa > 2 nu)


def inverse_power_target_sum(spec: PowerLawSpectrum) -> float:
    """sum_l c_l^2 / lambda_l^2, the saturated-phase constant (kappa > 2 nu)."""
    _require_circle(spec)
    if not spec.kappa > 2.0 * spec.nu:
        raise DomainError("sum_l c_l^2/lambda_l^2 converges only for kappa > 2 nu")
    alpha = spec.kappa + 1.0 - 2.0 * spec.nu
    return spec.index_scale ** (-alpha) * (2.0 * riemann_zeta(alpha) - 1.0)


def saturated_optimal_eta(nu: float, n_samples: int) -> float:
    """eta* = -2 zeta(nu) N^-nu, the loss-minimizing (negative) ridge."""
    return -2.0 * riemann_zeta(nu) * float(n_samples) ** (-nu)


def noiseless_loss_saturated(spec: PowerLawSpectrum, n_samples: int,
                             profile: SpectralProfile) -> float:
    """Saturated-phase (kappa > 2 nu) noiseless loss asymptotic.

    (1/2) N^-2nu sum_l (c_l^2/lambda_l^2) [ (lambda_l N^nu (h(lambda_l)-1)
    - 2 zeta(nu))^2 + 2 zeta(2nu) ], summed over the population lattice until
    the summand drops below 1e-16 of the running total.  Valid for profiles
    with |h-1|^2 = O(lambda^{-kappa/nu+eps} N^{-2nu}); a warning is issued
    when the evaluation grid violates that bound.
    """
    _require_circle(spec)
    if spec.scale2:
        raise DomainError("saturated asymptotics are implemented for the unit-scale spectrum")
    nu, kappa = spec.nu, spec.kappa
    if not kappa > 2.0 * nu:
        raise DomainError("saturated phase requires kappa > 2 nu")
    n_pow = float(n_samples) ** nu
    z1 = 2.0 * riemann_zeta(nu)
    z2 = 2.0 * riemann_zeta(2.0 * nu)

    total = 0.0
    block, l0 = 4096, 0
    worst_condition = 0.0
    while True:
        l = np.arange(l0, l0 + block)
        base = l + 1.0
        lam = base ** (-nu)
        csq_over_lam2 = base ** (2.0 * nu - kappa - 1.0)
        h = np.asarray(profile.evaluate(lam), dtype=float)
        dev = lam * n_pow * (h - 1.0)
        term = csq_over_lam2 * ((dev - z1) ** 2 + z2)
        weight = np.where(l == 0, 1.0, 2.0)
        chunk = float(np.sum(weight * term))
        worst_condition = max(
            worst_condition, float(np.max((h - 1.0) ** 2 * lam ** (kappa / nu) * n_pow**2))
        )
        total += chunk
        if chunk < 1e-16 * abs(total) or l0 > 10**8:
            break
        l0 += block
    if worst_condition > 100.0:
        warnings.warn(
            "profile violates |h-1|^2 = O(lambda^-kappa/nu N^-2nu) on the grid; "
            "the saturated asymptotic may not apply",
            stacklevel=2,
        )
    return 0.5 * float(n_samples) ** (-2.0 * nu) * total


def saturated_krr_loss_closed_form(spec: PowerLawSpectrum, n_samples: int,
                                   eta: float) -> float:
    """KRR specialization: (1/2)((eta N^nu + 2 zeta(nu))^2 + 2 zeta(2nu)) S N^-2nu

    with S = sum c_l^2/lambda_l^2; minimized at eta* = -2 zeta(nu) N^-nu.
    """
    _require_circle(spec)
    if spec.scale2:
        raise DomainError("saturated asymptotics are implemented for the unit-scale spectrum")
    nu = spec.nu
    s_const = inverse_power_target_sum(spec)
    n_pow = float(n_samples) ** nu
    z1 = 2.0 * riemann_zeta(nu)
    z2 = 2.0 * riemann_zeta(2.0 * nu)
    return 0.5 * ((eta * n_pow + z1) ** 2 + z2) * s_const / n_pow**2
