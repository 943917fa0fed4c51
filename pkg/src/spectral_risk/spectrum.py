"""Population spectral data with power-law decay.

A :class:`PowerLawSpectrum` carries the kernel eigenvalues lambda_l and the
target coefficients c_l^2 in one of three flavors:

* ``circle``     integer-indexed l in Z, lambda_l = (s(|l|+1))^-nu and
                 c_l^2 = (s(|l|+1))^-(kappa+1) with s = 2 when ``scale2``
                 is set (the factor that aligns the small-lambda tails of
                 the circle spectrum with the positive-indexed one), else 1
* ``positive``   l >= 1, lambda_l = l^-nu, c_l^2 = l^-(kappa+1)
* ``continuous`` densities on (0, 1]:
                 mu_lambda(dl) = (1/nu) l^(-1-1/nu) dl,
                 mu_c(dl)      = (1/nu) l^(kappa/nu-1) dl

Discrete flavors can be truncated: ``truncation = P`` keeps l in [-P, P]
(circle) or l in [1, P] (positive).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .specfun import riemann_zeta

FLAVORS = ("circle", "positive", "continuous")

#: default index cutoff for discrete spectra in sampled-matrix experiments
DEFAULT_TRUNCATION = 40_000


@dataclass(frozen=True)
class PowerLawSpectrum:
    """Immutable power-law population spectrum."""

    nu: float
    kappa: float
    flavor: str = "circle"
    truncation: int | None = None
    scale2: bool = False

    def __post_init__(self) -> None:
        if not self.nu > 1.0:
            raise DomainError(f"eigenvalue exponent nu must exceed 1, got {self.nu}")
        if not self.kappa > 0.0:
            raise DomainError(f"target exponent kappa must be positive, got {self.kappa}")
        if self.flavor not in FLAVORS:
            raise DomainError(f"unknown flavor {self.flavor!r}, expected one of {FLAVORS}")
        if self.truncation is not None:
            if self.flavor == "continuous":
                raise DomainError("continuous spectra have no index truncation")
            if int(self.truncation) < 1:
                raise DomainError("truncation must be a positive index count")
        if self.scale2 and self.flavor != "circle":
            raise DomainError("the factor-2 index scale applies to the circle flavor only")

    # -- discrete values ---------------------------------------------------

    @property
    def index_scale(self) -> float:
        return 2.0 if self.scale2 else 1.0

    def _base_index(self, l) -> np.ndarray:
        """Map an index (array) to the positive base s*(|l|+1) or s*l."""
        l_arr = np.asarray(l)
        if self.flavor == "circle":
            if self.truncation is not None and np.any(np.abs(l_arr) > self.truncation):
                raise DomainError("index beyond circle truncation")
            return self.index_scale * (np.abs(l_arr) + 1.0)
        if self.flavor == "positive":
            if np.any(l_arr < 1):
                raise DomainError("positive flavor indexes l >= 1")
            if self.truncation is not None and np.any(l_arr > self.truncation):
                raise DomainError("index beyond truncation")
            return np.asarray(l_arr, dtype=float)
        raise DomainError("continuous spectra have no per-index eigenvalues")

    def eigenvalue_at(self, l):
        """lambda_l for a discrete flavor; accepts scalars or index arrays."""
        out = self._base_index(l) ** (-self.nu)
        return float(out) if np.ndim(l) == 0 else out

    def coefficient_sq_at(self, l):
        """c_l^2 for a discrete flavor."""
        out = self._base_index(l) ** (-(self.kappa + 1.0))
        return float(out) if np.ndim(l) == 0 else out

    # -- continuous densities ----------------------------------------------

    def density_at(self, lam, which: str):
        """Continuous density at lam in (0, 1]: 'eigenvalue' or 'coefficient'."""
        if self.flavor != "continuous":
            raise DomainError("densities are defined for the continuous flavor")
        lam_arr = np.asarray(lam, dtype=float)
        if np.any(lam_arr <= 0.0) or np.any(lam_arr > 1.0):
            raise DomainError("density argument must lie in (0, 1]")
        if which == "eigenvalue":
            out = lam_arr ** (-1.0 - 1.0 / self.nu) / self.nu
        elif which == "coefficient":
            out = lam_arr ** (self.kappa / self.nu - 1.0) / self.nu
        else:
            raise DomainError(f"unknown density kind {which!r}")
        return float(out) if np.ndim(lam) == 0 else out

    # -- enumeration --------------------------------------------------------

    def leading_indices(self, count: int) -> np.ndarray:
        """First ``count`` indices in decreasing-eigenvalue order.

        Circle flavor uses the fixed tie-breaking order 0, -1, +1, -2, +2, ...
        so that the N-th largest eigenvalue is deterministic.
        """
        count = int(count)
        if count < 1:
            raise DomainError("need at least one index")
        if self.flavor == "circle":
            if self.truncation is not None and count > 2 * self.truncation + 1:
                raise DomainError("count exceeds the truncated circle spectrum")
            half = np.arange(1, count // 2 + 1)
            order = np.empty(count, dtype=int)
            order[0] = 0
            order[1:2 * len(half):2] = -half
            order[2:2 * len(half) + 1:2] = half[: (count - 1) // 2]
            return order
        if self.flavor == "positive":
            if self.truncation is not None and count > self.truncation:
                raise DomainError("count exceeds the truncated spectrum")
            return np.arange(1, count + 1)
        raise DomainError("continuous spectra have no discrete enumeration")

    def leading_eigenvalues(self, count: int) -> np.ndarray:
        return self.eigenvalue_at(self.leading_indices(count))

    def leading_coefficients_sq(self, count: int) -> np.ndarray:
        return self.coefficient_sq_at(self.leading_indices(count))

    # -- aggregates ----------------------------------------------------------

    def lambda_min(self, n_samples: int) -> float:
        """Reference minimal eigenvalue: N-th largest (discrete) or N^-nu."""
        n_samples = int(n_samples)
        if n_samples < 1:
            raise DomainError("sample count must be positive")
        if self.flavor == "continuous":
            return float(n_samples) ** (-self.nu)
        return float(self.leading_eigenvalues(n_samples)[-1])

    def target_norm_sq(self) -> float:
        """Total signal power sum_l c_l^2 (integral of mu_c when continuous)."""
        k1 = self.kappa + 1.0
        if self.flavor == "continuous":
            return 1.0 / self.kappa
        if self.truncation is not None:
            return float(np.sum(self.leading_coefficients_sq(self.mode_count())))
        if self.flavor == "circle":
            return self.index_scale ** (-k1) * (2.0 * riemann_zeta(k1) - 1.0)
        return riemann_zeta(k1)

    def mode_count(self) -> int:
        """Number of discrete modes under the current truncation."""
        if self.truncation is None or self.flavor == "continuous":
            raise DomainError("mode_count requires a truncated discrete spectrum")
        if self.flavor == "circle":
            return 2 * int(self.truncation) + 1
        return int(self.truncation)
