import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from todalump._constants import DELTA, LAM
from todalump.exact import (
    FiniteDifferenceFallback,
    SitePoint,
    TauFamily,
    backlund_residual_b1,
    backlund_residual_b2,
    bilinear_residual,
    eval_lump,
    eval_tau,
    exchange_identity_residual,
    hirota_D,
    sample_points,
    toda_residual,
    v_field_and_substitutions,
)
from todalump.fields import lump_field

coord = st.floats(-10, 10, allow_nan=False)
site = st.integers(-5, 5)


def lump_mp(n, x, y):
    """Oracle: Q_n = ln theta_{n-1} - ln theta_n at 50 digits."""
    with mpmath.workdps(50):
        def theta(k):
            return (2 * mpmath.sqrt(2) * x + k) ** 2 + 4 * mpmath.mpf(y) ** 2 + mpmath.mpf(1) / 4
        return float(mpmath.log(theta(n - 1)) - mpmath.log(theta(n)))


class TestTauValues:
    def test_theta_origin(self):
        assert eval_tau(TauFamily.THETA, SitePoint(0, 0.0, 0.0)).value == pytest.approx(0.25, abs=1e-15)

    def test_omega_origin(self):
        val = eval_tau(TauFamily.OMEGA, SitePoint(0, 0.0, 0.0)).value
        np.testing.assert_allclose(val, (math.sqrt(2) - 1) / 2, atol=1e-15)

    def test_theta_shift_by_delta(self):
        one = eval_tau(TauFamily.THETA, SitePoint(1, 0.0, 0.0)).value
        shifted = eval_tau(TauFamily.THETA, SitePoint(0, DELTA, 0.0)).value
        assert one == pytest.approx(1.25, abs=1e-14)
        assert shifted == pytest.approx(one, abs=1e-14)

    def test_omega_zero_location(self):
        n = 2
        x = -(n + (math.sqrt(2) - 1) / 2) / (2 * math.sqrt(2))
        assert abs(eval_tau(TauFamily.OMEGA, SitePoint(n, x, 0.0)).value) < 1e-14

    def test_theta_mixed_partial_is_six(self):
        # direct differentiation gives 6; the Hirota form at the origin gives 3
        p = sample_points(20, seed=3)
        np.testing.assert_allclose(eval_tau(TauFamily.THETA, p).d_st, 6.0, atol=1e-13)

    @given(site, coord, coord)
    def test_shift_covariance(self, n, x, y):
        for fam in TauFamily:
            a = eval_tau(fam, SitePoint(n + 1, x, y)).value
            b = eval_tau(fam, SitePoint(n, x + DELTA, y)).value
            assert abs(a - b) <= 1e-14 * max(1.0, abs(a))

    @given(site, coord, coord)
    def test_real_families_are_real(self, n, x, y):
        for fam in (TauFamily.THETA, TauFamily.KAPPA):
            assert np.imag(eval_tau(fam, SitePoint(n, x, y)).value) == 0

    def test_partials_match_finite_differences(self):
        p = SitePoint(1, 0.3, -0.7)
        h = 1e-4
        for fam in TauFamily:
            jet = eval_tau(fam, p)
            fx = (eval_tau(fam, SitePoint(1, 0.3 + h, -0.7)).value
                  - eval_tau(fam, SitePoint(1, 0.3 - h, -0.7)).value) / (2 * h)
            np.testing.assert_allclose(jet.d_x, fx, atol=1e-7)


class TestLump:
    def test_origin(self):
        assert eval_lump(SitePoint(0, 0.0, 0.0)) == pytest.approx(math.log(5), abs=1e-14)

    def test_far_field_against_high_precision(self):
        expected = lump_mp(0, 100.0, 0.0)
        assert expected == pytest.approx(-7.083575e-3, rel=1e-6)
        assert eval_lump(SitePoint(0, 100.0, 0.0)) == pytest.approx(expected, rel=1e-12)

    @given(site, coord, coord)
    def test_matches_log_ratio(self, n, x, y):
        assert abs(eval_lump(SitePoint(n, x, y)) - lump_mp(n, x, y)) < 1e-13

    @given(coord, coord)
    def test_traveling(self, x, y):
        assert abs(eval_lump(SitePoint(1, x, y)) - eval_lump(SitePoint(0, x + DELTA, y))) < 1e-13


class TestTodaResidual:
    def test_lump_on_seeded_points(self):
        p = sample_points(1000)
        assert np.max(toda_residual(lump_field(), p).magnitude) < 1e-10

    @given(site, coord, coord)
    def test_lump_property(self, n, x, y):
        assert toda_residual(lump_field(), SitePoint(n, x, y)).magnitude < 1e-10

    def test_zero_sequence(self):
        from todalump.fields import SeqField
        p = sample_points(50, seed=1)
        np.testing.assert_array_equal(toda_residual(SeqField.zero(), p).magnitude, 0.0)

    def test_detects_perturbation(self):
        import sympy as sp
        from todalump.fields import LUMP_EXPR, X, Y, SeqField
        bumped = SeqField.from_expr(LUMP_EXPR + sp.Rational(1, 100) * sp.exp(-X ** 2 - Y ** 2))
        assert toda_residual(bumped, SitePoint(0, 0.0, 0.0)).magnitude > 1e-4


class TestBilinear:
    @pytest.mark.parametrize("family", list(TauFamily))
    def test_seeded_points(self, family):
        p = sample_points(1000)
        assert np.max(bilinear_residual(family, p).magnitude) < 1e-12

    def test_kappa_exactly_zero(self):
        p = sample_points(30, seed=2)
        np.testing.assert_array_equal(bilinear_residual(TauFamily.KAPPA, p, dps=None).magnitude, 0.0)

    def test_hirota_theta_origin_is_three(self):
        val = hirota_D(1, 1, TauFamily.THETA, TauFamily.THETA, SitePoint(0, 0.0, 0.0))
        assert val == pytest.approx(3.0, abs=1e-13)

    def test_hirota_constant(self):
        assert hirota_D(1, 1, TauFamily.KAPPA, TauFamily.KAPPA, SitePoint(0, 0.4, 0.1)) == 0

    def test_hirota_first_order_definition(self):
        p = SitePoint(1, 0.2, -0.3)
        a, b = eval_tau(TauFamily.THETA, p), eval_tau(TauFamily.OMEGA, p)
        got = hirota_D(1, 0, TauFamily.THETA, TauFamily.OMEGA, p)
        np.testing.assert_allclose(got, a.d_s * b.value - a.value * b.d_s, atol=1e-14)

    def test_analytic_vs_finite_difference(self):
        p = SitePoint(0, 0.3, 0.2)
        exact = hirota_D(1, 1, TauFamily.THETA, TauFamily.OMEGA, p)
        fd = hirota_D(1, 1, TauFamily.THETA, TauFamily.OMEGA, p, method="fd")
        np.testing.assert_allclose(fd, exact, rtol=1e-6)

    def test_high_order_warns(self):
        with pytest.warns(FiniteDifferenceFallback):
            hirota_D(2, 1, TauFamily.THETA, TauFamily.THETA, SitePoint(0, 0.1, 0.1))

    def test_negative_order_rejected(self):
        with pytest.raises(ValueError):
            hirota_D(-1, 0, TauFamily.THETA, TauFamily.THETA, SitePoint(0, 0.0, 0.0))


class TestBacklund:
    def test_b1_seeded(self):
        p = sample_points(1000)
        for r in backlund_residual_b1(p):
            assert np.max(r.magnitude) < 1e-12

    def test_b2_seeded(self):
        p = sample_points(1000)
        for r in backlund_residual_b2(p):
            assert np.max(r.magnitude) < 1e-12

    def test_origin(self):
        o = SitePoint(0, 0.0, 0.0)
        for r in (*backlund_residual_b1(o), *backlund_residual_b2(o)):
            assert r.magnitude < 1e-12

    def test_lambda_matters(self):
        first, _ = backlund_residual_b1(SitePoint(0, 0.0, 0.0), lam_scale=2.0)
        assert first.magnitude > 0.1

    def test_orientation_matters(self):
        res = backlund_residual_b2(SitePoint(0, 0.0, 0.0), swap=True)
        assert max(r.magnitude for r in res) > 0.1

    def test_on_omega_zero(self):
        x = -((math.sqrt(2) - 1) / 2) / (2 * math.sqrt(2))
        for r in backlund_residual_b1(SitePoint(0, x, 0.0)):
            assert r.magnitude < 1e-12


class TestExchangeIdentity:
    @pytest.mark.parametrize("tau, tau_prime, lam", [
        (TauFamily.KAPPA, TauFamily.OMEGA, LAM),
        (TauFamily.THETA, TauFamily.THETA, 1.0),
        (TauFamily.THETA, TauFamily.OMEGA, 1 / LAM),
    ])
    def test_seeded(self, tau, tau_prime, lam):
        p = sample_points(300, seed=11)
        assert np.max(exchange_identity_residual(tau, tau_prime, lam, p).magnitude) < 1e-10

    @given(st.floats(0.1, 5.0))
    def test_kappa_pair_any_lambda(self, lam):
        r = exchange_identity_residual(TauFamily.KAPPA, TauFamily.KAPPA, lam, SitePoint(0, 0.3, 0.4), dps=None)
        assert r.magnitude == 0


class TestVField:
    def test_origin_value(self):
        rec = v_field_and_substitutions(SitePoint(0, 0.0, 0.0))
        assert rec.V_n == pytest.approx(24.0, rel=1e-13)

    def test_far_field(self):
        assert abs(v_field_and_substitutions(SitePoint(0, 100.0, 0.0)).V_n) < 1e-3

    def test_seeded_consistency(self):
        rec = v_field_and_substitutions(sample_points(1000))
        assert np.max(rec.mismatch / (1 + np.abs(rec.V_n))) < 1e-12

    def test_sample_points_deterministic(self):
        a, b = sample_points(10, seed=5), sample_points(10, seed=5)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.n, b.n)
        assert np.all((a.n >= -3) & (a.n <= 3))

    def test_nonfinite_point_rejected(self):
        with pytest.raises(ValueError):
            SitePoint(0, float("nan"), 0.0)
