"""Spectral learning profiles h(lambda) and the pair-of-gradient-flows run.

A profile fixes how strongly each empirical eigendirection is fitted:

* ``Krr(eta)``               h(l) = l / (l + eta)          (eta may be < 0)
* ``GradientFlow(t)``        h(l) = 1 - exp(-t l)
* ``GradientDescent(a, t)``  h(l) = 1 - (1 - a l)^t
* ``Interpolation()``        h(l) = 1 for l > 0
* ``Tabulated(lams, vals)``  linear in log-lambda, clamped outside

All catalog profiles satisfy h(0) = 0 (a spectral algorithm never moves the
null direction), and ``residual`` returns 1 - h in a cancellation-safe form.

The pair-of-gradient-flows construction realizes a KRR profile as the long-
time limit of two coupled flows: the first is plain gradient flow, the second
reuses its gradients scaled by 1 + g(t).  For a KRR target residual
eta/(l + eta), the control is g(t) = exp(-eta t) - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SingularProfileError, StepSizeError

# p = exp(-t*lam) underflows anyway below this; clip to exact zero so the
# stiff region costs nothing.
_P_FLOOR = 1e-300


def _as_array(lam):
    arr = np.asarray(lam, dtype=float)
    if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
        raise DomainError("profiles are evaluated at eigenvalues lambda >= 0")
    return arr


def _finish(lam, values: np.ndarray):
    return float(values) if np.ndim(lam) == 0 else values


class SpectralProfile:
    """Base class: ``evaluate`` gives h(lambda), ``residual`` gives 1 - h."""

    kind = "abstract"

    def evaluate(self, lam):
        raise NotImplementedError

    def residual(self, lam):
        raise NotImplementedError

    def spec_string(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Krr(SpectralProfile):
    eta: float
    kind = "krr"

    def evaluate(self, lam):
        arr = _as_array(lam)
        denom = arr + self.eta
        if np.any(denom == 0.0):
            raise SingularProfileError(f"KRR profile pole at lambda = {-self.eta}")
        out = np.where(arr == 0.0, 0.0, arr / denom)
        return _finish(lam, out)

    def residual(self, lam):
        arr = _as_array(lam)
        denom = arr + self.eta
        if np.any(denom == 0.0):
            raise SingularProfileError(f"KRR profile pole at lambda = {-self.eta}")
        out = np.where(arr == 0.0, 1.0, self.eta / denom)
        return _finish(lam, out)

    def spec_string(self) -> str:
        return f"krr:eta={self.eta:.17g}"


@dataclass(frozen=True)
class GradientFlow(SpectralProfile):
    t: float
    kind = "gf"

    def __post_init__(self):
        if self.t < 0.0:
            raise DomainError("gradient-flow time must be >= 0")

    def evaluate(self, lam):
        arr = _as_array(lam)
        return _finish(lam, -np.expm1(-self.t * arr))

    def residual(self, lam):
        arr = _as_array(lam)
        return _finish(lam, np.exp(-self.t * arr))

    def spec_string(self) -> str:
        return f"gf:t={self.t:.17g}"


@dataclass(frozen=True)
class GradientDescent(SpectralProfile):
    alpha: float
    t: int
    kind = "gd"

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise DomainError("learning rate must be positive")
        if int(self.t) != self.t or self.t < 0:
            raise DomainError("iteration count must be a non-negative integer")

    def stable_on(self, lam) -> bool:
        """Whether alpha*lambda < 2 everywhere on the given grid."""
        return bool(np.all(self.alpha * _as_array(lam) < 2.0))

    def evaluate(self, lam):
        arr = _as_array(lam)
        return _finish(lam, 1.0 - (1.0 - self.alpha * arr) ** int(self.t))

    def residual(self, lam):
        arr = _as_array(lam)
        return _finish(lam, (1.0 - self.alpha * arr) ** int(self.t))

    def spec_string(self) -> str:
        return f"gd:alpha={self.alpha:.17g},t={int(self.t)}"


@dataclass(frozen=True)
class Interpolation(SpectralProfile):
    kind = "interpolation"

    def evaluate(self, lam):
        arr = _as_array(lam)
        return _finish(lam, np.where(arr == 0.0, 0.0, 1.0))

    def residual(self, lam):
        arr = _as_array(lam)
        return _finish(lam, np.where(arr == 0.0, 1.0, 0.0))

    def spec_string(self) -> str:
        return "interpolation"


@dataclass(frozen=True)
class Tabulated(SpectralProfile):
    """Pointwise profile (lambda_i, h_i); linear interpolation in log-lambda.

    Outside the tabulated range the nearest endpoint value is used; these
    profiles vary on logarithmic eigenvalue scales, so log-linear is the
    natural rule.
    """

    lambdas: tuple = field()
    values: tuple = field()
    kind = "tabulated"

    def __post_init__(self):
        lams = np.asarray(self.lambdas, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if lams.ndim != 1 or lams.shape != vals.shape or lams.size == 0:
            raise DomainError("tabulated profile needs matching 1-d tables")
        if np.any(lams <= 0.0) or np.any(np.diff(lams) <= 0.0):
            raise DomainError("tabulated lambdas must be positive and strictly increasing")
        object.__setattr__(self, "lambdas", tuple(float(v) for v in lams))
        object.__setattr__(self, "values", tuple(float(v) for v in vals))

    def evaluate(self, lam):
        arr = _as_array(lam)
        flat = np.atleast_1d(arr).astype(float)
        out = np.zeros_like(flat)
        pos = flat > 0.0
        out[pos] = np.interp(
            np.log(flat[pos]), np.log(np.asarray(self.lambdas)), np.asarray(self.values)
        )
        return _finish(lam, out.reshape(arr.shape))

    def residual(self, lam):
        arr = _as_array(lam)
        out = 1.0 - np.asarray(self.evaluate(arr))
        out = np.where(arr == 0.0, 1.0, out)
        return _finish(lam, out)

    def spec_string(self) -> str:
        return "tabulated:<inline>"


def parse_profile(text: str) -> SpectralProfile:
    """Parse the config syntax: ``krr:eta=-0.001``, ``gf:t=1e4``,
    ``gd:alpha=0.5,t=200``, ``interpolation``, ``tabulated:@file.csv``."""
    text = text.strip()
    if text == "interpolation":
        return Interpolation()
    head, _, rest = text.partition(":")
    params = {}
    if rest and not rest.startswith("@"):
        for item in rest.split(","):
            key, _, value = item.partition("=")
            if not _:
                raise DomainError(f"malformed profile parameter {item!r} in {text!r}")
            params[key.strip()] = value.strip()
    if head == "krr":
        return Krr(eta=float(params["eta"]))
    if head == "gf":
        return GradientFlow(t=float(params["t"]))
    if head == "gd":
        return GradientDescent(alpha=float(params["alpha"]), t=int(params["t"]))
    if head == "tabulated":
        if not rest.startswith("@"):
            raise DomainError("tabulated profiles are loaded as tabulated:@file.csv")
        table = np.loadtxt(rest[1:], delimiter=",", ndmin=2)
        return Tabulated(lambdas=tuple(table[:, 0]), values=tuple(table[:, 1]))
    raise DomainError(f"unknown profile syntax {text!r}")


# ----------------------------------------------------------------------------
# pair of gradient flows


def pair_gf_control_krr(eta: float, t) -> float:
    """Control g(t) whose Laplace transform is -p(l)/l for p(l) = eta/(l+eta).

    Closed form g(t) = exp(-eta t) - 1.
    """
    if eta == 0.0:
        raise DomainError("KRR control requires eta != 0")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise DomainError("control time must be >= 0")
    out = np.expm1(-eta * t_arr)
    return float(out) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class PairGFRun:
    """One pair-of-flows integration: target KRR eta, grid, horizon, step."""

    eta: float
    lambda_grid: tuple
    horizon: float
    step: float

    def __post_init__(self):
        if self.eta == 0.0:
            raise DomainError("pair-GF target requires eta != 0")
        grid = np.asarray(self.lambda_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0 or np.any(grid < 0.0):
            raise DomainError("lambda grid must be 1-d and non-negative")
        if not 0.0 < self.step < self.horizon:
            raise DomainError("need 0 < step < horizon")
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in grid))


def pair_gf_simulate(run: PairGFRun, error_tol: float = 1e-6) -> dict:
    """Integrate dp/dt = -l p, dq/dt = -(1+g(t)) l p from p = q = 1.

    Classical RK4 with a fixed step.  Every 64 steps the local error is
    estimated by comparing one full step against two half steps (Richardson);
    if the estimate exceeds ``error_tol`` a :class:`StepSizeError` is raised.
    Returns {lambda: q(horizon)}; as horizon -> inf, q -> eta/(lambda+eta).
    """
    lam = np.asarray(run.lambda_grid, dtype=float)
    eta = run.eta

    def rhs(t: float, p: np.ndarray, q: np.ndarray):
        coupling = 1.0 + math.expm1(-eta * t)  # 1 + g(t), g the KRR control
        return -lam * p, -coupling * lam * p

    def rk4_step(t: float, p: np.ndarray, q: np.ndarray, h: float):
        k1p, k1q = rhs(t, p, q)
        k2p, k2q = rhs(t + 0.5 * h, p + 0.5 * h * k1p, q + 0.5 * h * k1q)
        k3p, k3q = rhs(t + 0.5 * h, p + 0.5 * h * k2p, q + 0.5 * h * k2q)
        k4p, k4q = rhs(t + h, p + h * k3p, q + h * k3q)
        p_new = p + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        q_new = q + (h / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q)
        return p_new, q_new

    p = np.ones_like(lam)
    q = np.ones_like(lam)
    t = 0.0
    n_steps = int(math.ceil(run.horizon / run.step))
    for i in range(n_steps):
        h = min(run.step, run.horizon - t)
        if h <= 0.0:
            break
        if i % 64 == 0:
            p_full, q_full = rk4_step(t, p, q, h)
            p_half, q_half = rk4_step(t, p, q, 0.5 * h)
            p_two, q_two = rk4_step(t + 0.5 * h, p_half, q_half, 0.5 * h)
            est = max(np.max(np.abs(q_full - q_two)), np.max(np.abs(p_full - p_two)))
            if est > error_tol:
                raise StepSizeError(
                    f"local error estimate {est:.2e} exceeds {error_tol:.2e}; "
                    f"reduce the step below {run.step}"
                )
            p, q = p_two, q_two
        else:
            p, q = rk4_step(t, p, q, h)
        p = np.where(np.abs(p) < _P_FLOOR, 0.0, p)
        t += h

    return {l: float(qv) for l, qv in zip(run.lambda_grid, q)}
