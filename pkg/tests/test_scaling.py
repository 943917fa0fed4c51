"""Tests for the piecewise-linear scaling calculus."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_risk.errors import DomainError
from spectral_risk.scaling import (
    SENTINEL_SCALE,
    RateReport,
    ScalingProfile,
    check_optimality_conditions,
    nmno_scaling,
    scaling_profile_of,
)


class TestProfileConstruction:
    def test_krr_values(self):
        nu = 1.2
        sh = scaling_profile_of("krr", 0.5, "h", nu)
        assert sh(0.8) == pytest.approx(0.3)
        assert sh(0.0) == 0.0
        s1h = scaling_profile_of("krr", 0.5, "one_minus_h", nu)
        assert s1h(0.2) == pytest.approx(0.3)
        assert s1h(0.9) == 0.0

    def test_krr_complementarity(self):
        nu = 1.7
        sh = scaling_profile_of("krr", 0.6, "h", nu)
        s1h = scaling_profile_of("krr", 0.6, "one_minus_h", nu)
        for s in np.linspace(0, nu, 57):
            assert sh(s) * s1h(s) == 0.0

    def test_gf_residual_orientation(self):
        # t ~ N^{s_t} has parameter scale -s_t; the residual e^{-t lambda} is
        # superpolynomially small on scales s < s_t and order one above
        nu, s_t = 1.5, 0.6
        s1h = scaling_profile_of("gf", -s_t, "one_minus_h", nu)
        assert s1h(0.0) == SENTINEL_SCALE
        assert s1h(s_t) == 0.0
        assert s1h(nu) == 0.0

    def test_gf_h_side(self):
        nu, s_t = 1.5, 0.6
        sh = scaling_profile_of("gf", -s_t, "h", nu)
        assert sh(0.3) == 0.0
        assert sh(1.0) == pytest.approx(0.4)

    def test_parameter_scale_domains(self):
        with pytest.raises(DomainError):
            scaling_profile_of("krr", -0.1, "h", 1.5)
        with pytest.raises(DomainError):
            scaling_profile_of("gf", 0.3, "h", 1.5)
        with pytest.raises(DomainError):
            scaling_profile_of("gd", 0.3, "h", 1.5)

    def test_profile_validation(self):
        with pytest.raises(DomainError):
            ScalingProfile(((0.5, 0.0), (1.0, 0.0)))  # must start at 0
        with pytest.raises(DomainError):
            ScalingProfile(((0.0, 0.0), (0.0, 1.0)))  # increasing knots


class TestNmnoScaling:
    def test_optimal_krr(self):
        nu, kappa = 1.2, 1.0
        s_star = nu / (kappa + 1.0)
        rep = nmno_scaling(
            scaling_profile_of("krr", s_star, "h", nu),
            scaling_profile_of("krr", s_star, "one_minus_h", nu),
            nu, kappa,
        )
        assert rep.loss_scale == pytest.approx(0.5, abs=1e-12)
        assert rep.localization_scales == pytest.approx((0.6,), abs=1e-9)
        assert rep.optimal
        assert rep.saturated is False

    def test_saturated_krr(self):
        nu, kappa = 1.2, 5.0
        s_eta = nu / (2.0 * nu + 1.0)
        rep = nmno_scaling(
            scaling_profile_of("krr", s_eta, "h", nu),
            scaling_profile_of("krr", s_eta, "one_minus_h", nu),
            nu, kappa,
        )
        assert rep.loss_scale == pytest.approx(2.0 * nu / (2.0 * nu + 1.0), abs=1e-12)
        assert rep.loss_scale == pytest.approx(0.70588235, abs=1e-7)
        assert rep.localization_scales == pytest.approx((0.0, s_eta), abs=1e-9)
        assert rep.saturated is True
        assert not rep.optimal

    @pytest.mark.parametrize("kappa", [0.3, 1.0, 5.0])
    def test_gf_never_saturates(self, kappa):
        nu = 1.2
        s_star = nu / (kappa + 1.0)
        rep = nmno_scaling(
            scaling_profile_of("gf", -s_star, "h", nu),
            scaling_profile_of("gf", -s_star, "one_minus_h", nu),
            nu, kappa,
        )
        assert rep.loss_scale == pytest.approx(kappa / (kappa + 1.0), abs=1e-12)
        assert rep.optimal
        assert rep.saturated is None

    def test_suboptimal_krr_scale(self):
        # ridge decaying too slowly: the signal term dominates at s_eta
        nu, kappa = 1.5, 1.0
        s_eta = 0.9  # > s* = 0.75
        rep = nmno_scaling(
            scaling_profile_of("krr", s_eta, "h", nu),
            scaling_profile_of("krr", s_eta, "one_minus_h", nu),
            nu, kappa,
        )
        assert rep.loss_scale < kappa / (kappa + 1.0) - 1e-9
        assert not rep.optimal

    @given(
        nu=st.floats(1.05, 3.0),
        kappa=st.floats(0.1, 8.0),
        pivot=st.floats(0.0, 1.0),
        rise_h=st.floats(0.0, 5.0),
        rise_r=st.floats(0.0, 5.0),
    )
    @settings(max_examples=150, deadline=None)
    def test_scale_bound_for_complementary_pairs(self, nu, kappa, pivot, rise_h, rise_r):
        # any admissible pair has min(S_h, S_1mh) = 0 pointwise (h and 1-h
        # cannot both be small); bound: loss scale <= kappa/(kappa+1)
        a = pivot * nu
        if 0.0 < a < nu:
            sh = ScalingProfile(((0.0, 0.0), (a, 0.0), (nu, rise_h * (nu - a))))
            s1h = ScalingProfile(((0.0, rise_r * a), (a, 0.0), (nu, 0.0)))
        elif a == 0.0:
            sh = ScalingProfile(((0.0, 0.0), (nu, rise_h * nu)))
            s1h = ScalingProfile(((0.0, 0.0), (nu, 0.0)))
        else:
            sh = ScalingProfile(((0.0, 0.0), (nu, 0.0)))
            s1h = ScalingProfile(((0.0, rise_r * nu), (nu, 0.0)))
        rep = nmno_scaling(sh, s1h, nu, kappa)
        assert rep.loss_scale <= kappa / (kappa + 1.0) + 1e-12


class TestOptimalityConditions:
    def test_krr_at_pivot(self):
        nu, kappa = 1.5, 1.0
        s_star = nu / (kappa + 1.0)
        cond = check_optimality_conditions(
            scaling_profile_of("krr", s_star, "h", nu),
            scaling_profile_of("krr", s_star, "one_minus_h", nu),
            nu, kappa,
        )
        assert cond == (True, True)

    def test_krr_saturated_never_both(self):
        nu, kappa = 1.2, 5.0
        for s_eta in np.linspace(0.0, nu, 41):
            cond = check_optimality_conditions(
                scaling_profile_of("krr", s_eta, "h", nu),
                scaling_profile_of("krr", s_eta, "one_minus_h", nu),
                nu, kappa,
            )
            assert cond != (True, True)

    def test_gf_at_pivot_saturating_exponents(self):
        nu, kappa = 1.2, 5.0
        s_star = nu / (kappa + 1.0)
        cond = check_optimality_conditions(
            scaling_profile_of("gf", -s_star, "h", nu),
            scaling_profile_of("gf", -s_star, "one_minus_h", nu),
            nu, kappa,
        )
        assert cond == (True, True)

    def test_equivalence_with_optimal_flag_on_krr_grid(self):
        # both-conditions-true <=> kappa/(kappa+1) scale, grid of 1000 points
        count = 0
        for nu in np.linspace(1.1, 2.5, 10):
            for kappa in np.linspace(0.2, 6.0, 10):
                for s_eta in np.linspace(0.0, nu, 10):
                    sh = scaling_profile_of("krr", s_eta, "h", nu)
                    s1h = scaling_profile_of("krr", s_eta, "one_minus_h", nu)
                    both = check_optimality_conditions(sh, s1h, nu, kappa) == (True, True)
                    optimal = nmno_scaling(sh, s1h, nu, kappa).optimal
                    assert both == optimal, (nu, kappa, s_eta)
                    count += 1
        assert count == 1000

    def test_report_type(self):
        rep = nmno_scaling(
            scaling_profile_of("krr", 0.5, "h", 1.5),
            scaling_profile_of("krr", 0.5, "one_minus_h", 1.5),
            1.5, 1.0,
        )
        assert isinstance(rep, RateReport)
