import math

import numpy as np
import pytest

from pulsefront.kernel import KernelSpec
from pulsefront.model import (
    Coefficients,
    FrontierParams,
    HarvestRule,
    InitialData,
    a_priori_bound,
    apply_harvest,
    harvest_slope0,
    validate_hypotheses,
)


def const_coeffs(b=2.0, a=1.0, m1=0.5, m2=0.5, alpha1=1.0, alpha2=1.0, d1=1.0, d2=1.0, tau=1.0):
    return Coefficients(d1=d1, d2=d2, b=b, a=a, m1=m1, m2=m2, alpha1=alpha1, alpha2=alpha2, tau=tau)


class TestCoefficients:
    def test_constant_detection(self):
        c = const_coeffs()
        assert c.is_constant
        assert c.constant_values()["b"] == 2.0

    def test_table_broadcast_and_bounds(self):
        c = Coefficients(
            d1=0.5, d2=0.5,
            b=[1.0, 2.0, 3.0, 2.0], a=1.0, m1=0.5, m2=0.5, alpha1=1.0, alpha2=1.0,
            tau=2.0,
        )
        assert not c.is_constant
        assert c.slots == 4
        assert c.sup["b"] == 3.0
        assert c.inf["b"] == 1.0
        assert c.a.size == 4

    def test_slot_lookup(self):
        c = Coefficients(
            d1=0, d2=0, b=[1.0, 2.0], a=1.0, m1=1.0, m2=1.0, alpha1=1.0, alpha2=1.0, tau=1.0
        )
        assert c.values_at(0.0)["b"] == 1.0
        assert c.values_at(0.49)["b"] == 1.0
        assert c.values_at(0.5)["b"] == 2.0
        assert c.values_at(1.25)["b"] == 1.0  # periodic wrap

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            const_coeffs(b=0.0)
        with pytest.raises(ValueError):
            const_coeffs(d1=-1.0)
        with pytest.raises(ValueError):
            const_coeffs(tau=0.0)


class TestHarvest:
    def test_linear(self):
        r = HarvestRule.linear(0.5)
        assert apply_harvest(r, 2.0) == 1.0
        assert harvest_slope0(r) == 0.5

    def test_beverton_holt(self):
        r = HarvestRule.beverton_holt(2.0, 1.0)
        assert apply_harvest(r, 1.0) == pytest.approx(1.0, abs=1e-15)
        assert harvest_slope0(HarvestRule.beverton_holt(2.0, 4.0)) == 0.5

    def test_ricker_value(self):
        # u * exp(r - b*u) evaluated independently
        r = HarvestRule.ricker(0.1, 1.0)
        assert apply_harvest(r, 0.5) == pytest.approx(0.5 * math.exp(-0.4), rel=1e-15)
        assert harvest_slope0(HarvestRule.ricker(0.0, 1.0)) == 1.0

    def test_identity(self):
        r = HarvestRule.identity()
        u = np.array([0.0, 0.7, 3.0])
        assert np.array_equal(apply_harvest(r, u), u)
        assert harvest_slope0(r) == 1.0

    def test_zero_maps_to_zero(self):
        for r in (
            HarvestRule.linear(0.3),
            HarvestRule.beverton_holt(1.0, 2.0),
            HarvestRule.ricker(0.2, 1.0),
            HarvestRule.identity(),
        ):
            assert apply_harvest(r, 0.0) == 0.0

    def test_negative_input_rejected(self):
        with pytest.raises(ValueError):
            apply_harvest(HarvestRule.linear(0.5), -1e-9)

    def test_slope_matches_finite_difference(self):
        for r in (
            HarvestRule.linear(0.7),
            HarvestRule.beverton_holt(1.5, 2.0),
            HarvestRule.ricker(0.1, 0.5),
        ):
            eps = 1e-6
            fd = (r.apply(2 * eps) - r.apply(eps)) / eps  # one-sided at the origin
            central = (r.apply(eps)) / eps
            assert central == pytest.approx(r.slope0(), rel=1e-6)
            assert fd == pytest.approx(r.slope0(), rel=1e-5)

    def test_ratio_nonincreasing_for_validated_rules(self):
        u = np.linspace(1e-6, 5.0, 500)
        for r in (HarvestRule.linear(0.8), HarvestRule.beverton_holt(1.0, 2.0)):
            ratio = r.apply(u) / u
            assert np.all(np.diff(ratio) <= 1e-12)

    def test_bad_params_rejected(self):
        with pytest.raises(ValueError):
            HarvestRule.linear(0.0)
        with pytest.raises(ValueError):
            HarvestRule.linear(1.5)
        with pytest.raises(ValueError):
            HarvestRule.beverton_holt(0.0, 1.0)
        with pytest.raises(ValueError):
            HarvestRule("exotic", {})


class TestBound:
    def test_simple_max(self):
        c = const_coeffs(b=1.0, a=1.0, alpha1=1.0, alpha2=1.0)
        init = InitialData.bump(1.0, 0.5, 0.5)
        assert a_priori_bound(c, init) == pytest.approx(1.0)

    def test_all_equal_two(self):
        c = const_coeffs(b=2.0, a=2.0, alpha1=1.0, alpha2=1.0)
        init = InitialData.bump(1.0, 2.0, 2.0)
        assert a_priori_bound(c, init) == pytest.approx(2.0)

    def test_mixed_entries(self):
        # max{3/2, 1/4, 0.1, 0.1} = 1.5
        c = const_coeffs(b=3.0, a=1.0, alpha1=2.0, alpha2=4.0)
        init = InitialData.bump(1.0, 0.1, 0.1)
        assert a_priori_bound(c, init) == pytest.approx(1.5)

    def test_monotone_in_each_argument(self):
        base = a_priori_bound(const_coeffs(), InitialData.bump(1.0, 0.5, 0.5))
        assert a_priori_bound(const_coeffs(b=3.0), InitialData.bump(1.0, 0.5, 0.5)) >= base
        assert a_priori_bound(const_coeffs(a=2.0), InitialData.bump(1.0, 0.5, 0.5)) >= base
        assert a_priori_bound(const_coeffs(), InitialData.bump(1.0, 5.0, 0.5)) >= base
        assert a_priori_bound(const_coeffs(), InitialData.bump(1.0, 0.5, 5.0)) >= base
        assert a_priori_bound(const_coeffs(alpha1=2.0), InitialData.bump(1.0, 0.5, 0.5)) <= base


class TestValidation:
    def setup_method(self):
        self.coeffs = const_coeffs()
        self.frontier = FrontierParams(mu1=0.5, mu2=0.5, h0=2.0)
        self.init = InitialData.bump(2.0, 0.5, 0.5)

    def test_linear_passes(self):
        rep = validate_hypotheses(self.coeffs, HarvestRule.linear(0.5), self.frontier, self.init)
        assert rep.passed, str(rep)

    def test_ricker_flagged_with_witness(self):
        rep = validate_hypotheses(self.coeffs, HarvestRule.ricker(0.5, 1.0), self.frontier, self.init)
        fails = [c for c in rep.failures() if c.name == "harvest-sublinearity"]
        assert fails and fails[0].witness is not None
        # H(u)/u = exp(0.5 - u) > 1 exactly for u < 0.5
        assert 0 < fails[0].witness < 0.5

    def test_identity_flagged_but_slope_ok(self):
        rep = validate_hypotheses(self.coeffs, HarvestRule.identity(), self.frontier, self.init)
        names = {c.name: c.passed for c in rep.checks}
        assert not names["harvest-sublinearity"]
        assert names["harvest-slope-in-(0,1]"]

    def test_nonzero_boundary_fails(self):
        h0 = 2.0
        x = np.linspace(-h0, h0, 101)
        u1 = np.full_like(x, 0.1)  # u1(+-h0) = 0.1
        u2 = np.maximum(1 - (x / h0) ** 2, 0.0)
        init = InitialData.from_profiles(x, u1, u2)
        rep = validate_hypotheses(self.coeffs, HarvestRule.linear(0.5), self.frontier, init)
        assert any(c.name == "initial-zero-at-front" and not c.passed for c in rep.checks)

    def test_degenerate_adult_profile_reported(self):
        init = InitialData.bump(2.0, 0.5, 0.0)
        rep = validate_hypotheses(self.coeffs, HarvestRule.linear(0.5), self.frontier, init)
        assert any(c.name == "initial-positive-interior" and not c.passed for c in rep.checks)


class TestInitialData:
    def test_bump_is_bitwise_symmetric(self):
        init = InitialData.bump(2.0, 0.5, 0.3)
        x = np.arange(-40, 41) * 0.05
        u1, u2 = init.sample(x)
        assert np.array_equal(u1, u1[::-1])
        assert np.array_equal(u2, u2[::-1])

    def test_profiles_zero_outside(self):
        init = InitialData.bump(1.0, 1.0, 1.0)
        u1, u2 = init.sample(np.array([-3.0, 3.0]))
        assert np.all(u1 == 0) and np.all(u2 == 0)

    def test_scaled(self):
        init = InitialData.bump(1.0, 1.0, 0.5)
        half = init.scaled(0.5)
        assert half.sup_norms[0] == pytest.approx(0.5)
        assert half.sup_norms[1] == pytest.approx(0.25)

    def test_negative_profile_rejected(self):
        x = np.linspace(-1, 1, 21)
        with pytest.raises(ValueError):
            InitialData.from_profiles(x, x, np.abs(x))


def test_frontier_validation():
    with pytest.raises(ValueError):
        FrontierParams(mu1=-0.1, mu2=0.0, h0=1.0)
    with pytest.raises(ValueError):
        FrontierParams(mu1=0.1, mu2=0.0, h0=0.0)
    assert FrontierParams(0.2, 0.3, 1.0).mu_total == pytest.approx(0.5)
