import math

import numpy as np
import pytest

from pulsefront.errors import NumericalError
from pulsefront.kernel import KernelSpec
from pulsefront.model import Coefficients
from pulsefront.eigen import (
    EigenProblemSpec,
    GeneralizedBracket,
    characteristic_roots,
    closed_form_lambda,
    floquet_lambda,
    generalized_bracket,
    lambda0,
    lambda_sensitivity,
    quadrature_matrix,
    richardson,
    translate_interval,
)

TRI = KernelSpec.triangular(1.0)


def coeffs(b=2.0, a=1.0, m1=0.5, m2=0.5, alpha1=1.0, alpha2=1.0, d1=1.0, d2=1.0, tau=1.0):
    return Coefficients(d1=d1, d2=d2, b=b, a=a, m1=m1, m2=m2, alpha1=alpha1, alpha2=alpha2, tau=tau)


def spec(slope=0.5, interval=(-2.0, 2.0), n=128, c=None, k1=TRI, k2=TRI, time_steps=64):
    return EigenProblemSpec(
        coeffs=c or coeffs(), k1=k1, k2=k2, pulse_slope=slope,
        interval=interval, n=n, time_steps=time_steps,
    )


class TestLambda0:
    def test_small_interval_limit(self):
        r = lambda0(TRI, 0.01, 64)
        assert -1.0 < r.value < -0.98

    def test_large_interval(self):
        r = lambda0(TRI, 100.0, 512, tol=1e-9)
        assert -0.05 < r.value < 0.0

    def test_matches_dense_oracle(self):
        r = lambda0(TRI, 2.0, 256)
        B = quadrature_matrix(TRI, 2.0, 256)
        oracle = float(np.max(np.linalg.eigvals(B).real)) - 1.0
        assert abs(r.value - oracle) < 1e-8

    def test_range_and_monotone_in_length(self):
        vals = [lambda0(TRI, L, 128).value for L in (0.5, 1.0, 2.0, 4.0, 8.0)]
        assert all(-1.0 < v < 0.0 for v in vals)
        assert all(v2 > v1 for v1, v2 in zip(vals, vals[1:]))

    def test_positive_eigenfunction(self):
        r = lambda0(TRI, 3.0, 96)
        assert np.all(r.psi_space > 0)
        assert np.max(r.psi_space) == pytest.approx(1.0)

    def test_nonconvergence_raises(self):
        with pytest.raises(NumericalError):
            lambda0(TRI, 20.0, 64, tol=1e-15, max_iter=3)


class TestCharacteristicRoots:
    def test_symmetric_unit_case(self):
        # eigenvalues of [[-2, 1], [1, -1]] are (-3 +- sqrt(5))/2
        c = coeffs(b=1.0, a=1.0, m1=1.0, m2=1.0)
        c1, c2 = characteristic_roots(c, 0.0)
        oracle = np.sort(np.linalg.eigvals(np.array([[-2.0, 1.0], [1.0, -1.0]])).real)
        assert c2 == pytest.approx(oracle[0], abs=1e-12)
        assert c1 == pytest.approx(oracle[1], abs=1e-12)
        assert c1 == pytest.approx((-3 + math.sqrt(5)) / 2, abs=1e-12)

    def test_vanishing_reproduction_decouples(self):
        c = coeffs(b=1e-12, a=1.0, m1=1.0, m2=1.0)
        c1, c2 = characteristic_roots(c, 0.0)
        assert c1 == pytest.approx(-1.0, abs=1e-5)
        assert c2 == pytest.approx(-2.0, abs=1e-5)

    def test_identity_randomized(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            c = coeffs(
                b=rng.uniform(0.1, 3), a=rng.uniform(0.1, 3),
                m1=rng.uniform(0.1, 2), m2=rng.uniform(0.1, 2),
                d1=rng.uniform(0, 2), d2=rng.uniform(0, 2),
            )
            lam0_val = rng.uniform(-0.9, 0.0)
            c1, c2 = characteristic_roots(c, lam0_val)
            cv = c.constant_values()
            left = cv["a"] + cv["m1"] - c.d1 * lam0_val + c1
            right = -(cv["m2"] - c.d2 * lam0_val + c2)
            assert abs(left - right) < 1e-12
            assert left > 0
            assert c1 > c2

    def test_requires_constants(self):
        c = Coefficients(d1=1, d2=1, b=[1.0, 2.0], a=1.0, m1=0.5, m2=0.5,
                         alpha1=1.0, alpha2=1.0, tau=1.0)
        with pytest.raises(ValueError):
            characteristic_roots(c, 0.0)


class TestClosedForm:
    def test_no_pulse_collapse(self):
        r = closed_form_lambda(spec(slope=1.0))
        assert abs(r.details["m"]) < 1e-10
        assert abs(r.details["Lambda"] - 1.0) < 1e-10
        c1, _ = characteristic_roots(coeffs(), r.lam0)
        assert r.value == pytest.approx(-c1, abs=1e-8)

    def test_dispersal_free_case_against_floquet(self):
        c = coeffs(b=1.0, a=1.0, m1=1.0, m2=1.0, d1=0.0, d2=0.0)
        s = spec(slope=0.5, c=c)
        r = closed_form_lambda(s)
        f = floquet_lambda(s)
        c1, _ = characteristic_roots(c, r.lam0)
        assert r.value > -c1  # harvesting raises the eigenvalue
        assert r.value == pytest.approx(f.value, abs=1e-9)

    def test_lambda_window(self):
        for slope in (0.2, 0.5, 0.8):
            r = closed_form_lambda(spec(slope=slope))
            lo, hi = r.details["window"]
            assert lo < r.details["Lambda"] < hi

    def test_positive_time_factors(self):
        r = closed_form_lambda(spec(slope=0.3))
        assert np.all(r.alpha > 0)
        assert np.all(r.beta > 0)
        # pulse consistency of the beta factor: beta(0+) = H'(0) beta(tau)
        assert r.beta[0] == pytest.approx(0.3 * r.beta[-1], rel=1e-10)
        assert r.alpha[0] == pytest.approx(r.alpha[-1], rel=1e-10)

    def test_requires_matching_kernels_and_constants(self):
        with pytest.raises(ValueError):
            closed_form_lambda(spec(k2=KernelSpec.triangular(1.5)))
        c = Coefficients(d1=1, d2=1, b=[1.0, 2.0], a=1.0, m1=0.5, m2=0.5,
                         alpha1=1.0, alpha2=1.0, tau=1.0)
        with pytest.raises(ValueError):
            closed_form_lambda(spec(c=c))

    def test_infinite_interval_uses_zero_dispersal_eigenvalue(self):
        r = closed_form_lambda(spec(interval=None))
        assert r.lam0 == 0.0
        finite = closed_form_lambda(spec(interval=(-30.0, 30.0), n=512))
        assert finite.value == pytest.approx(r.value, abs=5e-3)
        assert finite.value > r.value  # finite habitat is harder to persist in


class TestFloquet:
    def test_cross_method_with_richardson(self):
        vals_c, vals_f = [], []
        for n in (64, 128):
            s = spec(slope=0.5, n=n)
            vals_c.append(closed_form_lambda(s).value)
            vals_f.append(floquet_lambda(s).value)
        rc = richardson(vals_c[0], vals_c[1])
        rf = richardson(vals_f[0], vals_f[1])
        assert abs(rc - rf) < 1e-6

    def test_no_pulse_equals_minus_c1(self):
        s = spec(slope=1.0, n=96)
        f = floquet_lambda(s)
        lam0_val = closed_form_lambda(s).lam0
        c1, _ = characteristic_roots(coeffs(), lam0_val)
        assert f.value == pytest.approx(-c1, abs=1e-6)

    def test_time_resolution_is_noop(self):
        # per-slot integration is exact, so extra sampling cannot move the value
        a = floquet_lambda(spec(time_steps=32))
        b = floquet_lambda(spec(time_steps=64))
        assert abs(a.value - b.value) <= max(a.residual, b.residual) + 1e-13

    def test_eigenfunction_positive_and_periodic(self):
        f = floquet_lambda(spec(slope=0.4, n=64))
        assert np.all(f.phi > 0)
        assert np.all(f.psi > 0)
        assert f.details["periodicity_defect"] < 1e-8
        # pulse line: psi(0+) = H'(0) psi(0) with psi(0) = psi(tau)
        assert np.allclose(f.psi[0], 0.4 * f.psi[-1], rtol=1e-8)
        assert np.allclose(f.phi[0], f.phi[-1], rtol=1e-8)

    def test_distinct_kernels_labeled_surrogate(self):
        f = floquet_lambda(spec(k2=KernelSpec.triangular(1.4), n=64))
        assert f.note == "discrete surrogate"

    def test_time_dependent_coefficients(self):
        c = Coefficients(d1=1.0, d2=1.0, b=[1.5, 2.5], a=1.0, m1=0.5, m2=0.5,
                         alpha1=1.0, alpha2=1.0, tau=1.0)
        lo = floquet_lambda(spec(c=c, slope=0.8, n=48, time_steps=8))
        hi = floquet_lambda(spec(c=c, slope=0.4, n=48, time_steps=8))
        assert lo.value < hi.value  # heavier harvesting pushes towards extinction


class TestMonotonicity:
    def test_lambda_star_decreasing_in_length(self):
        vals = [
            closed_form_lambda(spec(interval=(0.0, L), n=96)).value
            for L in (1.0, 2.0, 3.0, 4.0, 6.0)
        ]
        assert all(v2 < v1 for v1, v2 in zip(vals, vals[1:]))

    def test_lambda_star_decreasing_in_slope(self):
        vals = [
            closed_form_lambda(spec(slope=s, n=96)).value
            for s in (0.2, 0.4, 0.6, 0.8, 1.0)
        ]
        assert all(v2 < v1 for v1, v2 in zip(vals, vals[1:]))

    def test_translation_invariance_exact(self):
        s = spec(interval=(0.0, 4.0), n=64)
        t = translate_interval(s, -2.0)
        assert t.interval == (-2.0, 2.0)
        assert closed_form_lambda(s).value == closed_form_lambda(t).value
        assert floquet_lambda(s).value == floquet_lambda(t).value

    def test_translate_identity_and_composition(self):
        s = spec(interval=(0.0, 4.0))
        assert translate_interval(s, 0.0).interval == (0.0, 4.0)
        assert translate_interval(translate_interval(s, 1.0), 2.0).interval == (3.0, 7.0)
        assert translate_interval(spec(interval=None), 5.0).interval is None


class TestBracket:
    def test_collapse_for_equal_kernels(self):
        s = spec(n=64)
        br = generalized_bracket(s, tol=1e-8)
        lam = floquet_lambda(s).value
        assert br.lower <= lam + 1e-10
        assert br.upper >= lam - 1e-10
        assert br.upper - br.lower < 2e-8

    def test_ordered_and_shrinking_with_length(self):
        k2 = KernelSpec.triangular(1.5)
        uppers, lowers = [], []
        for L in (2.0, 4.0, 6.0):
            br = generalized_bracket(spec(interval=(0.0, L), n=64, k2=k2))
            assert br.lower <= br.upper
            uppers.append(br.upper)
            lowers.append(br.lower)
        assert all(u2 <= u1 + 1e-12 for u1, u2 in zip(uppers, uppers[1:]))
        assert all(l2 <= l1 + 1e-12 for l1, l2 in zip(lowers, lowers[1:]))

    def test_requires_constant_coefficients(self):
        c = Coefficients(d1=1, d2=1, b=[1.0, 2.0], a=1.0, m1=0.5, m2=0.5,
                         alpha1=1.0, alpha2=1.0, tau=1.0)
        with pytest.raises(ValueError):
            generalized_bracket(spec(c=c))

    def test_invariant_enforced(self):
        with pytest.raises(ValueError):
            GeneralizedBracket(lower=1.0, upper=0.0)


class TestSensitivity:
    def test_always_negative_and_matches_finite_difference(self):
        rng = np.random.default_rng(20240501)
        for _ in range(5):
            c = coeffs(
                b=rng.uniform(0.5, 3.0), a=rng.uniform(0.5, 2.0),
                m1=rng.uniform(0.2, 1.5), m2=rng.uniform(0.2, 1.5),
                d1=rng.uniform(0.0, 2.0), d2=rng.uniform(0.0, 2.0),
                tau=rng.uniform(0.5, 2.0),
            )
            slope = rng.uniform(0.25, 0.9)
            length = rng.uniform(1.0, 5.0)
            s = EigenProblemSpec(coeffs=c, k1=TRI, k2=TRI, pulse_slope=slope,
                                 interval=(0.0, length), n=64)
            sens = lambda_sensitivity(s)
            assert sens < 0
            h = 1e-4
            up = closed_form_lambda(
                EigenProblemSpec(coeffs=c, k1=TRI, k2=TRI, pulse_slope=slope + h,
                                 interval=(0.0, length), n=64)).value
            dn = closed_form_lambda(
                EigenProblemSpec(coeffs=c, k1=TRI, k2=TRI, pulse_slope=slope - h,
                                 interval=(0.0, length), n=64)).value
            fd = (up - dn) / (2 * h)
            assert abs(sens - fd) / abs(fd) < 1e-4

    def test_first_order_taylor_from_no_pulse(self):
        s1 = spec(slope=1.0, n=64)
        base = closed_form_lambda(s1).value
        sens = lambda_sensitivity(s1)
        step = 1e-3
        moved = closed_form_lambda(spec(slope=1.0 - step, n=64)).value
        assert moved - base == pytest.approx(-sens * step, rel=5e-3)


def test_spec_validation():
    with pytest.raises(ValueError):
        spec(slope=0.0)
    with pytest.raises(ValueError):
        spec(slope=1.2)
    with pytest.raises(ValueError):
        spec(interval=(2.0, 1.0))
    with pytest.raises(ValueError):
        spec(n=4)
