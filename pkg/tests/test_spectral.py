import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PHI, PSI, X_REF, Y_REF
from robustfilter import MinimalityError, SpectralDensity, ValidationError, evaluate_density, fourier_coefficients, minimality_check
from robustfilter.spectral import frequency_grid, inverse_lag_transform, lag_transform, trig_series

ma_coeffs = st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=5)


class TestEvaluateDensity:
    def test_white_is_constant(self):
        np.testing.assert_array_equal(evaluate_density(SpectralDensity.white(1.0), 64), np.ones(64))

    def test_ma1_at_zero(self):
        s = evaluate_density(SpectralDensity.moving_average([1, -0.5]), 64)
        j = int(np.flatnonzero(frequency_grid(64) == 0)[0])
        assert s[j] == pytest.approx(0.25, abs=1e-15)

    def test_ma1_round_trip(self):
        s = evaluate_density(SpectralDensity.moving_average([1, -0.5]), 256)
        c = fourier_coefficients(s, K=8)
        assert c[0] == pytest.approx(1.25, abs=1e-14)
        assert c[1] == pytest.approx(-0.5, abs=1e-14)
        assert c[-1] == pytest.approx(-0.5, abs=1e-14)
        np.testing.assert_allclose(c.coeffs[np.abs(c.lags) > 1], 0, atol=1e-14)

    def test_grid_rejects_negative_samples(self):
        s = np.ones(32)
        s[5] = -1e-3
        with pytest.raises(ValidationError, match="negative"):
            SpectralDensity.from_samples(s)

    def test_grid_size_must_be_power_of_two(self):
        with pytest.raises(ValidationError):
            evaluate_density(SpectralDensity.white(), 100)

    def test_grid_density_cannot_be_refined(self):
        d = SpectralDensity.from_samples(np.ones(64))
        with pytest.raises(ValidationError):
            evaluate_density(d, 128)
        np.testing.assert_array_equal(evaluate_density(d, 32), np.ones(32))

    @given(ma_coeffs)
    @settings(max_examples=40, deadline=None)
    def test_real_coefficients_give_even_density(self, b):
        s = evaluate_density(SpectralDensity.moving_average(b), 128)
        assert np.all(s >= 0)
        np.testing.assert_allclose(s, s[(-np.arange(128)) % 128], atol=1e-12 * max(1.0, s.max()))


class TestLagTransform:
    def test_inverse(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=64) + 1j * rng.normal(size=64)
        np.testing.assert_allclose(inverse_lag_transform(lag_transform(x)), x, atol=1e-13)

    def test_trig_series_matches_direct_sum(self):
        lam = frequency_grid(64)
        c = np.array([0.3, -1.0, 2.0 + 1j])
        direct = sum(c[k] * np.exp(-1j * lam * k) for k in range(3))
        np.testing.assert_allclose(trig_series(c, 64), direct, atol=1e-13)
        shifted = sum(c[k] * np.exp(1j * lam * (k + 1)) for k in range(3))
        np.testing.assert_allclose(trig_series(c, 64, power=1, offset=1), shifted, atol=1e-13)


class TestFourierCoefficients:
    def test_constant(self):
        c = fourier_coefficients(np.ones(64), K=10)
        assert c[0] == pytest.approx(1.0)
        np.testing.assert_allclose(c.coeffs[c.lags != 0], 0, atol=1e-15)

    def test_reciprocal_of_example_total(self, example_pair):
        f, g = example_pair
        s = evaluate_density(f, 4096) + evaluate_density(g, 4096)
        c = fourier_coefficients(1.0 / s, K=20)
        m = np.abs(c.lags)
        np.testing.assert_allclose(c.coeffs.real, Y_REF**m / (X_REF * (1 - Y_REF**2)), atol=1e-14)

    def test_ratio_matches_geometric_form(self, example_pair):
        f, g = example_pair
        fs, gs = evaluate_density(f, 4096), evaluate_density(g, 4096)
        c = fourier_coefficients(fs / (fs + gs), K=10)
        x, y = X_REF, Y_REF
        # f/(f+g) = |upsilon|^2 with upsilon(0) = 1/sqrt(x), upsilon(k) = y^{k-1}(y - phi)/sqrt(x)
        ups = np.concatenate([[1.0], y ** np.arange(80) * (y - PHI)]) / np.sqrt(x)
        ref = [np.sum(ups[: ups.size - k] * ups[k:]) for k in range(11)]
        np.testing.assert_allclose(c.coeffs[10:].real, ref, atol=1e-14)

    def test_non_finite_is_minimality_error(self):
        F = np.ones(32)
        F[3] = np.inf
        with pytest.raises(MinimalityError) as exc:
            fourier_coefficients(F, K=4)
        assert exc.value.frequency == pytest.approx(frequency_grid(32)[3])

    def test_callable_input(self):
        c = fourier_coefficients(lambda lam: 2 + np.cos(lam), K=3, G=64)
        assert c[0] == pytest.approx(2.0)
        assert c[1] == pytest.approx(0.5)

    def test_max_lag_bound(self):
        with pytest.raises(ValidationError):
            fourier_coefficients(np.ones(32), K=16)

    @given(ma_coeffs)
    @settings(max_examples=30, deadline=None)
    def test_hermitian_and_parseval(self, b):
        s = evaluate_density(SpectralDensity.moving_average(b), 256)
        c = fourier_coefficients(s, K=20)
        assert c.hermitian_defect() <= 1e-12 * max(1.0, s.max())
        assert np.mean(s**2) == pytest.approx(c.energy() + c.tail_energy, rel=1e-10, abs=1e-12)

    def test_refinement_stability(self):
        d = SpectralDensity.moving_average([1.0, 0.3, -0.2])
        c1 = fourier_coefficients(evaluate_density(d, 256), K=10)
        c2 = fourier_coefficients(evaluate_density(d, 512), K=10)
        assert np.max(np.abs(c1.coeffs - c2.coeffs)) <= max(c1.residual, 1e-14)


class TestMinimality:
    def test_white_signal_no_noise(self):
        r = minimality_check(SpectralDensity.white(1.0), SpectralDensity.white(0.0), G=256)
        assert r.passes
        assert r.integral == pytest.approx(1.0)

    def test_example_passes(self, example_pair):
        assert minimality_check(*example_pair, G=1024).passes

    def test_unit_root_pair_fails(self):
        d = SpectralDensity.moving_average([1.0, -1.0])
        r = minimality_check(d, d, G=1024)
        assert not r.passes
        assert r.offending_frequency == pytest.approx(0.0)

    def test_sampled_densities_compare_coarser_grid(self):
        s = SpectralDensity.from_samples(np.ones(128))
        r = minimality_check(s, s, G=128)
        assert r.passes and r.grid_sizes == (64, 128)
