import numpy as np
import pytest
from scipy.linalg import toeplitz

from conftest import PHI, X_REF, Y_REF, random_ma2_pair
from robustfilter import (
    FactorizationDomainError,
    FactorizationError,
    SpectralDensity,
    ValidationError,
    build_operator,
    evaluate_density,
    factor_product,
    spectral_factorize,
    triangular_operator,
)
from robustfilter.factorization import gram_from_factor, reconstruction_error
from robustfilter.filtering import factors_for
from robustfilter.oracle import bauer_factor

G = 4096


class TestSpectralFactorize:
    def test_constant(self):
        h = spectral_factorize(np.full(256, 4.0), 8)
        np.testing.assert_allclose(h.coeffs, [2.0] + [0.0] * 7, atol=1e-14)

    def test_example_total(self, example_pair):
        f, g = example_pair
        s = evaluate_density(f, G) + evaluate_density(g, G)
        theta = spectral_factorize(s, 16)
        ref = np.zeros(16)
        ref[:2] = np.sqrt(X_REF) * np.array([1.0, -Y_REF])
        np.testing.assert_allclose(theta.coeffs, ref, atol=1e-13)

    def test_example_reciprocal(self, example_pair):
        f, g = example_pair
        s = evaluate_density(f, G) + evaluate_density(g, G)
        psi = spectral_factorize(1.0 / s, 16)
        np.testing.assert_allclose(psi.coeffs, Y_REF ** np.arange(16) / np.sqrt(X_REF), atol=1e-14)

    def test_phase_convention_and_minimum_phase(self):
        d = SpectralDensity.moving_average([0.4, 1.0])  # maximum-phase input coefficients
        h = spectral_factorize(d, 32, G=1024)
        assert h.coeffs[0] > 0
        np.testing.assert_allclose(h.coeffs[:2], [1.0, 0.4], atol=1e-12)
        assert h.min_modulus > 0

    def test_complex_coefficients(self):
        d = SpectralDensity.moving_average([1.0, 0.5j, -0.2 + 0.1j])
        s = evaluate_density(d, 1024)
        h = spectral_factorize(s, 64)
        assert h.residual <= 1e-12
        assert abs(h.coeffs[0].imag) == 0 and h.coeffs[0].real > 0

    def test_nonpositive_raises_domain_error(self):
        s = np.ones(64)
        s[10] = 0.0
        with pytest.raises(FactorizationDomainError):
            spectral_factorize(s, 8)

    def test_short_factor_reports_residual(self):
        d = SpectralDensity.moving_average([1.0, -0.95])
        s = 1.0 / evaluate_density(d, 1024)
        with pytest.raises(FactorizationError) as exc:
            spectral_factorize(s, 4)
        assert exc.value.residual > 1e-8

    def test_length_bounds(self):
        with pytest.raises(ValidationError):
            spectral_factorize(np.ones(64), 40)

    def test_bauer_cross_check(self):
        d = SpectralDensity.moving_average([1.0, 0.5, -0.3])
        h = spectral_factorize(d, 16, G=1024)
        np.testing.assert_allclose(bauer_factor(d, 8, n=256, G=1024), h.coeffs[:8], atol=1e-10)

    def test_reconstruction_for_random_pairs(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            f, g = random_ma2_pair(rng)
            fac = factors_for(f, g, L=128, G=G)
            for name in ("psi", "theta", "phi"):
                assert fac[name].residual <= 1e-8, name


class TestFactorProduct:
    def test_identity_factor(self, example_pair):
        f, _ = example_pair
        phi = spectral_factorize(evaluate_density(f, G), 16)
        one = spectral_factorize(np.ones(G), 16)
        np.testing.assert_allclose(factor_product(one, phi).coeffs, phi.coeffs, atol=1e-15)

    def test_example_upsilon(self, example_pair):
        fac = factors_for(*example_pair, L=32, G=G)
        k = np.arange(1, 32)
        ref = np.concatenate([[1.0], Y_REF ** (k - 1) * (Y_REF - PHI)]) / np.sqrt(X_REF)
        np.testing.assert_allclose(fac["upsilon"].coeffs, ref, atol=1e-14)
        assert fac["upsilon"].residual <= 1e-12

    def test_commutes(self, example_pair):
        fac = factors_for(*example_pair, L=32, G=G)
        np.testing.assert_allclose(
            factor_product(fac["psi"], fac["phi"]).coeffs, factor_product(fac["phi"], fac["psi"]).coeffs, atol=1e-15
        )

    def test_length_mismatch(self):
        a = spectral_factorize(np.ones(64), 8)
        b = spectral_factorize(np.ones(64), 4)
        with pytest.raises(ValidationError):
            factor_product(a, b)


class TestTriangularOperator:
    def test_identity(self):
        np.testing.assert_array_equal(triangular_operator(np.array([1.0]), 5).entries, np.eye(5))

    def test_bidiagonal(self):
        T = triangular_operator(np.sqrt(X_REF) * np.array([1.0, -Y_REF]), 4).entries
        ref = np.sqrt(X_REF) * (np.eye(4) - Y_REF * np.eye(4, k=-1))
        np.testing.assert_allclose(T, ref, atol=1e-15)

    def test_psi_theta_identity(self, example_pair):
        fac = factors_for(*example_pair, L=64, G=G)
        Psi = triangular_operator(fac["psi"], 64).entries
        Theta = triangular_operator(fac["theta"], 64).entries
        assert np.max(np.abs(Psi @ Theta - np.eye(64))) <= 1e-8


class TestOperatorIdentities:
    L = 128

    @pytest.fixture(params=range(5))
    def factored(self, request):
        f, g = random_ma2_pair(np.random.default_rng(100 + request.param))
        return f, g, factors_for(f, g, L=self.L, G=G)

    def test_P_from_psi(self, factored):
        f, g, fac = factored
        P = build_operator("P", f, g, L=self.L, G=G).entries
        n = self.L // 2
        assert np.max(np.abs(gram_from_factor(fac["psi"], self.L).entries - P)[:n, :n]) <= 1e-6

    def test_inverse_from_theta(self, factored):
        f, g, fac = factored
        P = build_operator("P", f, g, L=self.L, G=G).entries
        Theta = triangular_operator(fac["theta"], self.L).entries
        V = np.conj(Theta) @ Theta.T
        n = self.L // 2
        assert np.max(np.abs(V - np.linalg.inv(P))[:n, :n]) <= 1e-6
        assert np.max(np.abs(triangular_operator(fac["psi"], self.L).entries @ Theta - np.eye(self.L))) <= 1e-6

    def test_T_and_G_from_upsilon_and_phi(self, factored):
        f, g, fac = factored
        fs = evaluate_density(f, G)
        s = fs / (fs + evaluate_density(g, G))
        n = self.L // 2
        for d, h in ((s, fac["upsilon"]), (fs, fac["phi"])):
            c = np.fft.fft(d) * np.where(np.arange(G) % 2 == 0, 1.0, -1.0) / G
            T = toeplitz(c[np.arange(self.L)].real, c[(-np.arange(self.L)) % G].real)
            assert np.max(np.abs(gram_from_factor(h, self.L).entries - T)[:n, :n]) <= 1e-6

    def test_reconstruction_error_helper(self):
        assert reconstruction_error(np.array([2.0]), np.full(64, 4.0)) == 0.0
