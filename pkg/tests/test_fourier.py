import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from todalump._constants import LAM, SQRT2
from todalump.exact import SitePoint, TauFamily, eval_tau
from todalump.fields import GridMisalignment, GridSpec
from todalump.fourier import (
    GridFT,
    MeanZeroViolation,
    NonIntegrableSingularity,
    SymbolParams,
    bump,
    fourier_quadrature,
    ft_omega_ratios,
    ft_rational,
    ft_simple_pole,
    ft_theta_ratios,
    multiplier_grid,
    multiplier_solve_eta_tilde,
    multiplier_symbol,
    ode_fundamental_g,
    rho,
    rho_equation_residual,
    small_xi_coefficient,
    symbols,
    variation_of_parameters,
    verify_transformed_F0,
    verify_transformed_F1,
)
from todalump.linearized import kernel_field
from todalump.suites import random_traveling_field

XI = np.array([-1.5, -0.4, 0.25, 0.8, 2.0])
heights = st.floats(-50, 50).filter(lambda y: abs(y) > 1e-3)


def E(xi):
    return np.exp(2j * math.pi * xi / (2 * SQRT2))


@pytest.fixture(scope="module")
def fund_up():
    return ode_fundamental_g(1.0)


@pytest.fixture(scope="module")
def fund_down():
    return ode_fundamental_g(-1.0)


class TestParameters:
    @given(heights)
    def test_gamma_product(self, y):
        prm = SymbolParams(0, y)
        assert abs(prm.gamma * prm.gamma_star - LAM ** -2) < 1e-14

    @given(heights)
    def test_gamma_inside_unit_disc(self, y):
        assert abs(SymbolParams(0, y).gamma) < 1

    @given(heights)
    def test_beta(self, y):
        assert SymbolParams(2, y).beta == pytest.approx(math.sqrt(y * y / 2 + 1 / 32))


class TestSymbols:
    @pytest.mark.parametrize("y", [0.1, 1.0, 10.0])
    def test_values_at_origin(self, y):
        sym = symbols(0, y)
        assert abs(sym.Q(0.0)) < 1e-10
        assert abs(sym.Q.d(0.0) - math.pi * 1j) < 1e-10
        assert abs(sym.J(0.0)) < 1e-10

    @pytest.mark.parametrize("xi", [-2.3, -0.7, 0.31, 1.9])
    def test_P_and_P0_match_definitions(self, xi):
        sym = symbols(0, 1.0)
        P_def = (2j * math.pi * xi - 2 - E(xi) / LAM + LAM / E(xi)) / (2j * math.pi)
        P0_def = 2j * math.pi * xi - LAM * (E(xi) - 1) - (1 - 1 / E(xi)) / LAM
        np.testing.assert_allclose(sym.P(xi), P_def, rtol=1e-12)
        np.testing.assert_allclose(sym.P0(xi), P0_def, rtol=1e-12)

    def test_small_xi_coefficients(self):
        sym = symbols(0, 1.0)
        np.testing.assert_allclose(small_xi_coefficient(sym.P), math.pi * 1j / 4, rtol=1e-5)
        np.testing.assert_allclose(small_xi_coefficient(sym.P0), math.pi ** 2 / 2, rtol=1e-5)

    @given(st.floats(0.01, 8.0), st.sampled_from([-1, 1]))
    def test_P0_nonzero_off_origin(self, xi, sign):
        assert abs(symbols(0, 1.0, xi_max=1.0).P0(sign * xi)) > 0

    @pytest.mark.parametrize("y", [-3.0, -0.5, 0.5, 3.0])
    def test_J_zeros_on_lattice(self, y):
        zeros = np.array(symbols(0, y, xi_max=12.0).Q1.singular_set)
        expected = 2 * SQRT2 * np.arange(-4, 5)
        np.testing.assert_allclose(zeros, expected, atol=1e-8)
        Jt = symbols(0, y, xi_max=1.0).Jt  # J without its exponential factor
        scale = np.max(np.abs(Jt(np.linspace(-12, 12, 241))))
        assert np.max(np.abs(Jt(zeros))) < 1e-12 * scale

    def test_J_is_derivative_of_K(self):
        sym = symbols(0, 0.7)
        h = 1e-5
        for xi in (-0.9, 0.4, 1.7):
            fd = (sym.K(xi + h) - sym.K(xi - h)) / (2 * h)
            np.testing.assert_allclose(fd, sym.J(xi), rtol=1e-7)


class TestTransforms:
    def test_simple_pole_against_quadrature(self):
        a1, a2 = 0.3, 0.6
        for branch, sgn in (("upper", 1), ("lower", -1)):
            F = ft_simple_pole(a1, a2, branch)
            ref = fourier_quadrature(lambda x: 1 / (x + a1 + sgn * 1j * a2), XI)
            np.testing.assert_allclose(F(XI), ref, atol=1e-8)

    def test_rational_against_quadrature(self):
        a1, a2, a3 = -0.2, 0.8, 0.5 + 0.3j
        F = ft_rational(a1, a2, a3)
        ref = fourier_quadrature(lambda x: ((x + a1) + a3) / ((x + a1) ** 2 + a2 ** 2), XI)
        np.testing.assert_allclose(F(XI), ref, atol=1e-8)

    def test_branch_needs_positive_width(self):
        with pytest.raises(ValueError):
            ft_simple_pole(0.0, 0.0, "upper")

    def test_theta_quotients(self):
        y = 1.0
        tr = ft_theta_ratios(0, y)

        def th(m, x):
            return eval_tau(TauFamily.THETA, SitePoint(m, x, y))

        refs = [lambda x: th(0, x).d_s / th(0, x).value,
                lambda x: th(-1, x).d_t / th(-1, x).value,
                lambda x: th(-1, x).value / th(0, x).value - 1,
                lambda x: th(0, x).value / th(-1, x).value - 1]
        for F, f in zip(tr, refs):
            np.testing.assert_allclose(F(XI), fourier_quadrature(f, XI), atol=1e-4)
        assert tr.theta_prev_ratio.delta == 1.0

    @pytest.mark.parametrize("y", [1.0, -1.0])
    def test_omega_quotients(self, y):
        tr = ft_omega_ratios(0, y)

        def w(m, x):
            return eval_tau(TauFamily.OMEGA, SitePoint(m, x, y)).value

        refs = [lambda x: w(-1, x) / w(0, x) - 1, lambda x: w(0, x) / w(-1, x) - 1]
        for F, f in zip(tr, refs):
            np.testing.assert_allclose(F(XI), fourier_quadrature(f, XI), atol=1e-4)

    def test_omega_quotients_reject_real_pole(self):
        with pytest.raises(ValueError):
            ft_omega_ratios(0, 0.0)

    def test_quadrature_needs_nonzero_frequency(self):
        with pytest.raises(ValueError):
            fourier_quadrature(lambda x: 1 / (1 + x * x), [0.0])

    def test_grid_transform_gaussian(self):
        ft = GridFT(512, 0.05, -12.8)
        vals = ft.forward(np.exp(-math.pi * ft.x ** 2))
        np.testing.assert_allclose(vals, np.exp(-math.pi * ft.xi ** 2), atol=1e-12)
        np.testing.assert_allclose(ft.inverse(vals), np.exp(-math.pi * ft.x ** 2), atol=1e-12)


class TestRho:
    def test_normalization(self):
        assert abs(1e-6 * rho(1e-3) - 1) < 1e-2

    @given(st.floats(0.05, 3.0))
    @settings(max_examples=15)
    def test_negative_side_finite_nonzero(self, xi):
        v = rho(-xi)
        assert np.isfinite(v) and abs(v) > 0

    def test_plug_back(self):
        side = np.linspace(0.05, 3.0, 12)
        xi = np.concatenate([-side[::-1], side])
        assert np.max(rho_equation_residual(xi)) < 1e-7

    def test_origin_rejected(self):
        with pytest.raises(ValueError):
            rho(0.0)


class TestFundamentalSolutions:
    @pytest.mark.parametrize("name", ["fund_up", "fund_down"])
    def test_plug_back(self, request, name):
        fund = request.getfixturevalue(name)
        side = np.linspace(0.05, 2.0, 40)
        xi = np.concatenate([-side[::-1], side])
        for r in fund.equation_residual(xi):
            assert np.max(r) < 1e-7

    @given(st.floats(-5, 5).filter(lambda y: abs(y) > 0.05))
    @settings(max_examples=4)
    def test_wronskian_blows_up_like_cube(self, y):
        # xi^3 W = -2 + O(xi); one Richardson step removes the linear term
        fund = ode_fundamental_g(y, xi=np.array([-2e-4, -1e-4, 1e-4, 2e-4]), xi_max=0.1)
        s3w = fund.xi ** 3 * fund.W
        limit = 2 * s3w[[1, 2]] - s3w[[0, 3]]
        np.testing.assert_allclose(limit, -2.0, rtol=1e-3)

    def test_normalization_near_origin(self, fund_up):
        g1, g2, _, _ = fund_up.evaluate(np.array([1e-4]))
        np.testing.assert_allclose(g1, 1.0, atol=1e-3)
        np.testing.assert_allclose(1e-8 * g2, 1.0, atol=1e-3)

    def test_passes_through_J_zero(self):
        fund = ode_fundamental_g(1.0, xi_max=3.5)
        g1, *_ = fund.evaluate(np.array([2 * SQRT2 - 1e-3, 2 * SQRT2 + 1e-3]))
        assert np.all(np.isfinite(g1))
        assert abs(g1[1] - g1[0]) < 1e-2 * max(abs(g1[0]), 1e-30) + 1e-12

    def test_origin_rejected(self, fund_up):
        with pytest.raises(ValueError):
            fund_up.evaluate(0.0)


def _manufactured(fund, width=0.12, centre=1.0):
    """g = exp(-((xi - c)/w)^2) and the forcing B = P1 g'' + Q1 g' + R1 g."""
    sym = fund.symbols

    def g(x):
        return np.exp(-((x - centre) / width) ** 2)

    def B(x):
        t = (x - centre) / width
        d1 = -2 * t / width * g(x)
        d2 = (4 * t * t - 2) / width ** 2 * g(x)
        return sym.P1(x) * d2 + sym.Q1(x) * d1 + sym.R1(x) * g(x)

    return g, B


class TestVariationOfParameters:
    @pytest.mark.parametrize("name", ["fund_up", "fund_down"])
    def test_recovers_manufactured_solution(self, request, name):
        fund = request.getfixturevalue(name)
        g, B = _manufactured(fund)
        res = variation_of_parameters(fund, B)
        assert res.residual < 1e-7
        # near xi = 0.05 the xi^-2 growth of g2 amplifies rounding in the tail
        inside = np.abs(res.xi - 1.0) < 0.5
        np.testing.assert_allclose(res.g[inside], g(res.xi[inside]), atol=1e-8)

    def test_zero_forcing(self, fund_up):
        res = variation_of_parameters(fund_up, lambda x: np.zeros_like(x), points=2001)
        np.testing.assert_array_equal(res.g, 0)

    def test_zero_anchor(self, fund_down):
        res = variation_of_parameters(fund_down, lambda x: x ** 2 * np.exp(-x ** 2), anchor="zero")
        assert res.residual < 1e-7

    def test_constant_forcing_not_integrable_at_zero(self, fund_up):
        with pytest.raises(NonIntegrableSingularity):
            variation_of_parameters(fund_up, lambda x: np.ones_like(x), anchor="zero")

    def test_bad_anchor(self, fund_up):
        with pytest.raises(ValueError):
            variation_of_parameters(fund_up, np.sin, anchor="left")

    def test_grid_must_be_one_sided(self, fund_up):
        with pytest.raises(ValueError):
            variation_of_parameters(fund_up, np.sin, xi=np.linspace(-1, 1, 101))


class TestTransformedOperators:
    def test_F1_corrected_form(self):
        chk = verify_transformed_F1(0, 1.0)
        assert chk.max_rel < 1e-6
        assert chk.uncorrected_rel > 1e-2

    @pytest.mark.parametrize("y", [1.0, -1.0])
    def test_F0_forms(self, y):
        chk = verify_transformed_F0(0, y)
        assert chk.max_rel < 1e-6
        if y < 0:
            assert chk.uncorrected_rel > 1e-2

    def test_F0_needs_nonzero_height(self):
        with pytest.raises(ValueError):
            verify_transformed_F0(0, 0.0)

    def test_bump_support(self):
        b = bump(0.5, 1.5)
        np.testing.assert_array_equal(b(np.array([0.4, 0.5, 1.5, 1.6])), 0)
        assert b(1.0) == pytest.approx(math.exp(-1))


class TestMultiplier:
    def test_grid_snapped_to_shift(self):
        g = multiplier_grid(512, 20.0)
        assert g.nx == 513
        assert g.L <= 20.0
        assert g.refine == 5

    def test_symbol_vanishes_only_at_zero_mode(self):
        D = multiplier_symbol(GridSpec(4.0, 2))
        assert D[0, 0] == 0
        assert np.all(D.ravel()[1:] < 0)

    def test_kernel_mode_small_grid(self):
        res = multiplier_solve_eta_tilde(kernel_field("x"), multiplier_grid(128, 10.0), tol=1e-3)
        assert abs(res.f_integral) < 1e-3
        assert res.eta_tilde.samples.shape == res.grid.shape

    def test_negative_control(self):
        with pytest.raises(MeanZeroViolation) as info:
            multiplier_solve_eta_tilde(random_traveling_field(1), multiplier_grid(128, 10.0))
        assert info.value.integral > 1e-6

    def test_misaligned_grid(self):
        with pytest.raises(GridMisalignment):
            multiplier_solve_eta_tilde(kernel_field("x"), GridSpec(4.0, 2.5))
