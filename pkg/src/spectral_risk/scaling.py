"""Scaling-profile calculus: rate prediction, localization, optimality.

A sequence of functions g_N(lambda) has scaling profile S(s) when
|g_N(lambda_N)| decays like N^-S(s) along any eigenvalue sequence of scale
lambda_N ~ N^-s.  All profiles arising from the algorithm catalog are
piecewise linear on the scale interval [0, nu], so the calculus below is
exact: min-composition and comparisons are carried out on breakpoint unions
plus segment crossings.

The NMNO loss scaling is

    S[L] = min_{0<=s<=nu} (1 - s/nu + 2 S_h(s)) ^ (kappa s / nu + 2 S_1mh(s))

bounded by kappa/(kappa+1); the bound is attained exactly when the two
Proposition-style inequality conditions hold on either side of the pivot
scale s* = nu/(kappa+1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

#: finite stand-in for "exponentially small" (superpolynomial) decay
SENTINEL_SCALE = 1e6

_TOL = 1e-9


@dataclass(frozen=True)
class ScalingProfile:
    """Continuous piecewise-linear exponent map s -> S(s) on [0, nu]."""

    breakpoints: tuple
    kind: str | None = None

    def __post_init__(self):
        pts = tuple((float(s), float(v)) for s, v in self.breakpoints)
        if len(pts) < 2:
            raise DomainError("a scaling profile needs at least two breakpoints")
        ss = [s for s, _ in pts]
        if ss[0] != 0.0:
            raise DomainError("scaling profiles start at s = 0")
        if any(b <= a for a, b in zip(ss, ss[1:])):
            raise DomainError("breakpoint scales must be strictly increasing")
        object.__setattr__(self, "breakpoints", pts)

    @property
    def domain_end(self) -> float:
        return self.breakpoints[-1][0]

    def knots(self) -> np.ndarray:
        return np.array([s for s, _ in self.breakpoints])

    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.breakpoints])

    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < -_TOL) or np.any(s_arr > self.domain_end + _TOL):
            raise DomainError(f"scale outside the profile domain [0, {self.domain_end}]")
        out = np.interp(np.clip(s_arr, 0.0, self.domain_end), self.knots(), self.values())
        return float(out) if np.ndim(s) == 0 else out


@dataclass(frozen=True)
class RateReport:
    """Predicted loss scale with localization and optimality flags."""

    loss_scale: float
    localization_scales: tuple
    saturated: bool | None
    optimal: bool


def scaling_profile_of(profile_kind: str, parameter_scale: float, which: str,
                       nu: float) -> ScalingProfile:
    """Scaling profile of h or 1-h for the parametric algorithms.

    ``parameter_scale`` is the scale of the parameter *sequence*: for KRR,
    eta ~ N^-s_eta with s_eta in [0, nu]; for GF, t ~ N^{s_t} has scale
    -s_t, so the argument lies in [-nu, 0].

    KRR:  S_h = (s - s_eta) v 0,  S_1mh = (s_eta - s) v 0.
    GF:   S_h = (s - s_t) v 0;  1 - h = exp(-t lambda) is exponentially
    small for s < s_t (sentinel) and O(1) for s >= s_t.
    """
    if not nu > 1.0:
        raise DomainError("nu must exceed 1")
    if which not in ("h", "one_minus_h"):
        raise DomainError(f"unknown side {which!r}")
    if profile_kind == "krr":
        s_par = float(parameter_scale)
        if not 0.0 <= s_par <= nu:
            raise DomainError("KRR ridge scale must lie in [0, nu]")
    elif profile_kind == "gf":
        if not -nu <= float(parameter_scale) <= 0.0:
            raise DomainError("GF time scale must lie in [-nu, 0]")
        s_par = -float(parameter_scale)
    else:
        raise DomainError(f"no scaling profile catalog entry for {profile_kind!r}")

    interior = 0.0 < s_par < nu
    if which == "h":
        # (s - s_par) v 0 for both algorithms
        pts = [(0.0, 0.0)]
        if interior:
            pts.append((s_par, 0.0))
        pts.append((nu, max(nu - s_par, 0.0)))
        if s_par == nu:
            pts = [(0.0, 0.0), (nu, 0.0)]
        return ScalingProfile(tuple(pts), kind=profile_kind)
    if profile_kind == "krr":
        pts = [(0.0, s_par)]
        if interior:
            pts.append((s_par, 0.0))
        pts.append((nu, max(0.0, s_par - nu)))
        if s_par == 0.0:
            pts = [(0.0, 0.0), (nu, 0.0)]
        return ScalingProfile(tuple(pts), kind=profile_kind)
    # GF residual: superpolynomially small below s_t, order one above
    if s_par == 0.0:
        pts = [(0.0, 0.0), (nu, 0.0)]
    elif s_par == nu:
        pts = [(0.0, SENTINEL_SCALE), (nu, 0.0)]
    else:
        pts = [(0.0, SENTINEL_SCALE), (s_par, 0.0), (nu, 0.0)]
    return ScalingProfile(tuple(pts), kind=profile_kind)


def _merged_knots(*profiles_and_linear) -> np.ndarray:
    knots = set()
    for item in profiles_and_linear:
        knots.update(float(s) for s in item)
    return np.array(sorted(knots))


def _piecewise_min_scan(knots: np.ndarray, f_vals: np.ndarray, g_vals: np.ndarray):
    """Min over s of min(f, g) for two piecewise-linear functions on shared knots.

    Returns (min value, tuple of argmin scales).  Segment crossings of f and
    g are inserted so the scan is exact for piecewise-linear inputs.
    """
    cand_s = list(knots)
    for i in range(len(knots) - 1):
        df0 = f_vals[i] - g_vals[i]
        df1 = f_vals[i + 1] - g_vals[i + 1]
        if df0 * df1 < 0.0:
            w = df0 / (df0 - df1)
            cand_s.append(knots[i] + w * (knots[i + 1] - knots[i]))
    cand_s = np.array(sorted(cand_s))
    f_c = np.interp(cand_s, knots, f_vals)
    g_c = np.interp(cand_s, knots, g_vals)
    both = np.minimum(f_c, g_c)
    best = float(np.min(both))
    arg = cand_s[both <= best + _TOL]
    # deduplicate near-equal scales
    keep = []
    for s in arg:
        if not keep or s - keep[-1] > 1e-9:
            keep.append(float(s))
    return best, tuple(keep)


def nmno_scaling(profile_h: ScalingProfile, profile_one_minus_h: ScalingProfile,
                 nu: float, kappa: float) -> RateReport:
    """Loss scale, localization set, and optimality of an algorithm pair.

    ``saturated`` is reported for KRR-kind inputs as kappa > 2 nu and left
    None for arbitrary profiles (only the optimal flag is meaningful there).
    """
    if abs(profile_h.domain_end - nu) > _TOL or abs(profile_one_minus_h.domain_end - nu) > _TOL:
        raise DomainError("scaling profiles must live on [0, nu]")
    knots = _merged_knots(profile_h.knots(), profile_one_minus_h.knots(), (0.0, nu))
    noise = 1.0 - knots / nu + 2.0 * profile_h(knots)
    signal = (kappa / nu) * knots + 2.0 * profile_one_minus_h(knots)
    loss_scale, localization = _piecewise_min_scan(knots, noise, signal)

    optimal = abs(loss_scale - kappa / (kappa + 1.0)) <= _TOL
    saturated = None
    if profile_h.kind == "krr" or profile_one_minus_h.kind == "krr":
        saturated = kappa > 2.0 * nu
    return RateReport(
        loss_scale=loss_scale,
        localization_scales=localization,
        saturated=saturated,
        optimal=optimal,
    )


def check_optimality_conditions(profile_h: ScalingProfile,
                                profile_one_minus_h: ScalingProfile,
                                nu: float, kappa: float) -> tuple[bool, bool]:
    """The two inequality conditions for attaining the kappa/(kappa+1) scale.

    1) S_h(s)   >= (s/nu - 1/(kappa+1)) / 2      for s >= s* = nu/(kappa+1)
    2) S_1mh(s) >= (kappa/(kappa+1) - kappa s/nu) / 2   for s <= s*

    Both sides are piecewise linear, so checking on breakpoints (plus the
    pivot s*) is exact.
    """
    s_star = nu / (kappa + 1.0)
    knots = _merged_knots(profile_h.knots(), profile_one_minus_h.knots(), (0.0, s_star, nu))

    upper = knots[knots >= s_star - _TOL]
    cond1 = bool(
        np.all(profile_h(upper) - 0.5 * (upper / nu - 1.0 / (kappa + 1.0)) >= -_TOL)
    )
    lower = knots[knots <= s_star + _TOL]
    cond2 = bool(
        np.all(
            profile_one_minus_h(lower)
            - 0.5 * (kappa / (kappa + 1.0) - (kappa / nu) * lower)
            >= -_TOL
        )
    )
    return cond1, cond2
