import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import chebyshev as C

from stringspec import (
    Density,
    FourierCosine,
    ScaleTooLarge,
    SpectralRadiusExceeded,
    analytic_spectrum,
    assemble_basis_matrices,
    assemble_model_matrix,
    choose_scale,
    compute_trace_targets,
    estimate_L,
    model_traces_and_jacobian,
    power_traces,
    scaled_cheb_scalar,
    solve_forward,
)
from stringspec.presets import RHO1_COEFFICIENTS, rho1, rho2


def tilde_cheb_oracle(x, n):
    """x * T_{n-1}(2x - 1) through numpy's Chebyshev series evaluation."""
    coef = np.zeros(n)
    coef[-1] = 1.0
    return x * C.chebval(2 * x - 1, coef)


class TestScaledCheb:
    def test_zero(self):
        np.testing.assert_array_equal(scaled_cheb_scalar(0.0, 30), np.zeros(30))

    def test_one(self):
        np.testing.assert_allclose(scaled_cheb_scalar(1.0, 30), np.ones(30), atol=1e-12)

    def test_half(self):
        np.testing.assert_allclose(scaled_cheb_scalar(0.5, 3), [0.5, 0.0, -0.5], atol=1e-15)

    def test_matches_chebval(self):
        x = np.linspace(0, 1, 37)
        vals = scaled_cheb_scalar(x, 60)
        for n in (1, 2, 3, 17, 60):
            np.testing.assert_allclose(vals[n - 1], tilde_cheb_oracle(x, n), atol=1e-12)

    def test_high_degree_stays_bounded(self):
        v = scaled_cheb_scalar(0.99, 200)[-1]
        assert np.isfinite(v) and abs(v) <= 1.0

    def test_subset(self):
        full = scaled_cheb_scalar(0.3, 50)
        np.testing.assert_array_equal(scaled_cheb_scalar(0.3, 50, [1, 16, 31, 46]), full[[0, 15, 30, 45]])

    @settings(max_examples=50)
    @given(st.floats(0.0, 1.0), st.integers(1, 400))
    def test_bounded_on_unit_interval(self, x, n):
        assert abs(scaled_cheb_scalar(x, n)[-1]) <= 1.0 + 1e-9


class TestScaleAndAsymptotics:
    def test_choose_scale(self):
        assert choose_scale(analytic_spectrum(1.0, 5)) == pytest.approx(0.95 * np.pi ** 2)

    def test_choose_scale_theta(self):
        from stringspec import Spectrum
        s = Spectrum(np.array([10.0, 20.0]), "file", 2)
        assert choose_scale(s, 0.5) == pytest.approx(5.0)
        assert choose_scale(s, 0.5) / s.lambdas[0] < 1

    def test_estimate_L_unit(self):
        assert estimate_L(analytic_spectrum(1.0, 10)) == pytest.approx(1.0, abs=1e-15)

    def test_estimate_L_constant(self):
        assert estimate_L(analytic_spectrum(2.25, 10)) == pytest.approx(1.5, abs=1e-14)

    def test_estimate_L_rho2(self):
        # int_0^1 sqrt(1 + (x - 1/2)^2) dx in closed form
        exact = 2 * (0.25 * np.sqrt(1.25) + 0.5 * np.arcsinh(0.5))
        assert estimate_L(solve_forward(rho2()), 15) == pytest.approx(exact, abs=2e-2)
        assert exact == pytest.approx(1.0402, abs=1e-4)


class TestTraceTargets:
    def test_partial_basel(self):
        J = 12
        s = analytic_spectrum(1.0, J)
        tt = compute_trace_targets(s, 1, J, J, 1.0)
        k = np.arange(1, J + 1)
        assert tt.r_true[0] == pytest.approx(np.sum(1 / (k ** 2 * np.pi ** 2)), rel=1e-14)

    def test_no_tail_when_k1_equals_k(self):
        s = solve_forward(rho1())
        t = choose_scale(s)
        tt = compute_trace_targets(s, 40, 7, 7, t)
        direct = scaled_cheb_scalar(t / s.lambdas[:7], 40).sum(axis=1)
        np.testing.assert_allclose(tt.r_true, direct, rtol=0, atol=1e-12)

    def test_first_trace_identity(self):
        s = analytic_spectrum(1.0, 10)
        t = choose_scale(s)
        tt = compute_trace_targets(s, 1, 10, 1000, t)
        assert tt.r_true[0] / t == pytest.approx(1 / 6, abs=1e-3)

    def test_tail_uses_asymptote(self):
        s = analytic_spectrum(1.0, 10)
        tt = compute_trace_targets(s, 5, 5, 10, 1.0)
        full = compute_trace_targets(s, 5, 10, 10, 1.0)
        np.testing.assert_allclose(tt.r_true, full.r_true, rtol=1e-14)

    def test_bounded_by_count(self):
        s = solve_forward(rho1())
        tt = compute_trace_targets(s, 300, 7, 15, choose_scale(s))
        assert np.all(np.abs(tt.r_true) <= 15)

    def test_scale_too_large(self):
        s = analytic_spectrum(1.0, 5)
        with pytest.raises(ScaleTooLarge):
            compute_trace_targets(s, 5, 5, 5, np.pi ** 2)


def _fd_jacobian(a, mats, N, t, h=1e-6):
    cols = []
    for m in range(a.size):
        e = np.zeros(a.size)
        e[m] = h
        rp, _ = model_traces_and_jacobian(a + e, mats, N, t)
        rm, _ = model_traces_and_jacobian(a - e, mats, N, t)
        cols.append((rp - rm) / (2 * h))
    return np.array(cols).T


class TestModelTraces:
    def test_consistency_with_exact_data(self):
        J, N = 10, 60
        s = analytic_spectrum(1.0, J)
        t = choose_scale(s)
        tt = compute_trace_targets(s, N, J, J, t)
        mats = assemble_basis_matrices(FourierCosine(3), J)
        r, _ = model_traces_and_jacobian([1.0, 0, 0], mats, N, t)
        np.testing.assert_allclose(r, tt.r_true, atol=1e-10, rtol=0)

    def test_first_jacobian_row(self):
        J = 9
        t = 0.95 * np.pi ** 2
        mats = assemble_basis_matrices(FourierCosine(4), J)
        _, jac = model_traces_and_jacobian([1.0, 0.1, 0, 0], mats, 5, t)
        i = np.arange(1, J + 1)
        assert jac[0, 0] == pytest.approx(t / np.pi ** 2 * np.sum(1 / i ** 2), rel=1e-13)
        np.testing.assert_allclose(jac[0], [2 * t * np.trace(b.entries) for b in mats], rtol=1e-13)

    def test_zero_coefficients(self):
        mats = assemble_basis_matrices(FourierCosine(3), 6)
        r, _ = model_traces_and_jacobian(np.zeros(3), mats, 25, 5.0)
        np.testing.assert_array_equal(r, np.zeros(25))

    def test_matches_eigen_decomposition(self):
        rng = np.random.default_rng(5)
        mats = assemble_basis_matrices(FourierCosine(5), 12)
        for _ in range(5):
            a = np.r_[1.0, 0.15 * rng.standard_normal(4)]
            Mm = assemble_model_matrix(a, mats).entries
            t = 0.95 / np.max(np.linalg.eigvalsh(Mm))
            r, _ = model_traces_and_jacobian(a, mats, 100, t)
            kappa = np.linalg.eigvalsh(t * Mm)
            oracle = sum(tilde_cheb_oracle(kappa, n).sum() for n in [100])
            assert r[-1] == pytest.approx(oracle, abs=1e-9)
            np.testing.assert_allclose(r, scaled_cheb_scalar(kappa, 100).sum(axis=1), atol=1e-9)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        mats = assemble_basis_matrices(FourierCosine(4), 10)
        a = np.r_[1.0, 0.1 * rng.standard_normal(3)]
        t = 0.9 * np.pi ** 2
        _, jac = model_traces_and_jacobian(a, mats, 40, t)
        fd = _fd_jacobian(a, mats, 40, t)
        np.testing.assert_allclose(jac, fd, rtol=1e-6, atol=1e-10 * np.max(np.abs(jac)))

    def test_subset_rows(self):
        mats = assemble_basis_matrices(FourierCosine(3), 8)
        a = [1.0, 0.2, -0.1]
        r, jac = model_traces_and_jacobian(a, mats, 46, 8.0)
        rs, jacs = model_traces_and_jacobian(a, mats, 46, 8.0, [1, 16, 31, 46])
        np.testing.assert_allclose(rs, r[[0, 15, 30, 45]], rtol=1e-13)
        np.testing.assert_allclose(jacs, jac[[0, 15, 30, 45]], rtol=1e-12)

    def test_bounded_at_truth(self):
        s = solve_forward(rho1())
        t = choose_scale(s)
        J = 15
        mats = assemble_basis_matrices(FourierCosine(7), J)
        r, _ = model_traces_and_jacobian(RHO1_COEFFICIENTS, mats, 300, t)
        assert np.all(np.abs(r) <= J)

    def test_spectral_radius_guard(self):
        mats = assemble_basis_matrices(FourierCosine(2), 5)
        with pytest.raises(SpectralRadiusExceeded):
            model_traces_and_jacobian([1.0, 0.0], mats, 10, 2.0 * np.pi ** 2)


class TestPowerTraces:
    def test_basel(self):
        J = 400
        mats = assemble_basis_matrices(FourierCosine(1), J)
        tau = power_traces([1.0], mats, 2)
        i = np.arange(1, J + 1)
        assert tau[0] == pytest.approx(np.sum(1 / (np.pi * i) ** 2), abs=1e-14)
        assert tau[0] == pytest.approx(1 / 6, abs=1 / (np.pi ** 2 * J))
        assert tau[1] == pytest.approx(1 / 90, abs=1e-9)

    def test_second_power_nonnegative(self):
        rng = np.random.default_rng(2)
        mats = assemble_basis_matrices(FourierCosine(4), 8)
        for _ in range(10):
            assert power_traces(rng.standard_normal(4), mats, 2)[1] >= 0

    def test_leading_eigenvalue_from_high_power(self):
        # lambda_1 = lim tau_s^{-1/s}, multiplicity = lim lambda_1^s tau_s
        s = analytic_spectrum(1.0, 200)
        tau50 = np.sum(s.lambdas ** -50.0)
        assert tau50 ** (-1 / 50) == pytest.approx(np.pi ** 2, abs=1e-8)
        assert np.pi ** 100 * tau50 == pytest.approx(1.0, abs=1e-8)
        mats = assemble_basis_matrices(FourierCosine(1), 200)
        tau_model = power_traces([1.0], mats, 50)[-1]
        assert tau_model ** (-1 / 50) == pytest.approx(np.pi ** 2, abs=1e-8)
