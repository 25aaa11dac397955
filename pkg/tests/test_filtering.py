import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DELTA_REF, PHI, PSI, example_delta, example_weights, random_ma2_pair, root_pair
from robustfilter import (
    ConsistencyError,
    FunctionalSpec,
    SpectralDensity,
    ValidationError,
    estimate_point,
    evaluate_density,
    mse,
    smoothing,
    solve_filter,
    solve_filter_factorized,
    solve_filter_finite,
    time_weights,
)
from robustfilter.filtering import error_functional
from robustfilter.oracle import toeplitz_projection

L, G = 64, 4096


class TestFunctionalSpec:
    def test_norms(self):
        a = FunctionalSpec(np.array([1.0, -2.0, 0.5]))
        assert a.N == 2
        assert a.l1_norm == pytest.approx(3.5)
        assert a.weighted_l2 == pytest.approx(1 + 2 * 4 + 3 * 0.25)

    def test_rejects_bad_input(self):
        with pytest.raises(ValidationError):
            FunctionalSpec(np.array([]))
        with pytest.raises(ValidationError):
            FunctionalSpec(np.array([1.0, np.nan]))
        with pytest.raises(ValidationError):
            FunctionalSpec(np.array([1.0]), tail_bound=-1.0)

    def test_padded(self):
        np.testing.assert_array_equal(FunctionalSpec(np.array([1.0, 2.0])).padded(4), [1, 2, 0, 0])
        with pytest.raises(ValidationError):
            FunctionalSpec(np.ones(5)).padded(3)


class TestSymmetricWhite:
    @pytest.mark.parametrize("solver", [solve_filter, solve_filter_finite, solve_filter_factorized])
    def test_half(self, white_pair, solver):
        sol = solver(*white_pair, a=(1.0,), L=16, G=256)
        np.testing.assert_allclose(sol.h, 0.5, atol=1e-12)
        assert sol.mse == pytest.approx(0.5, abs=1e-12)

    def test_smoothing(self, white_pair):
        sol = smoothing(*white_pair, L=16, G=256)
        np.testing.assert_allclose(sol.h, 0.5, atol=1e-12)
        assert sol.mse == pytest.approx(0.5, abs=1e-12)

    def test_factorized_terms(self, white_pair):
        d = solve_filter_factorized(*white_pair, a=(1.0,), L=16, G=256).diagnostics
        assert d["energy_term"] == pytest.approx(1.0)
        assert d["correction_term"] == pytest.approx(0.5)


class TestNoNoise:
    def test_perfect_recovery(self):
        f = SpectralDensity.moving_average([1.0, 0.4])
        sol = solve_filter(f, SpectralDensity.white(0.0), a=(1.0, -0.3), L=16, G=256)
        np.testing.assert_allclose(sol.weights[:2], [1.0, -0.3], atol=1e-13)
        assert sol.mse == pytest.approx(0.0, abs=1e-14)
        assert mse(f, SpectralDensity.white(0.0), a=(1.0, -0.3), solution=sol) == pytest.approx(0.0, abs=1e-14)

    def test_smoothing_weights(self):
        sol = smoothing(SpectralDensity.moving_average([1.0, 0.4]), SpectralDensity.white(0.0), L=16, G=256)
        np.testing.assert_allclose(sol.weights, np.eye(17)[0], atol=1e-13)
        assert sol.mse == pytest.approx(0.0, abs=1e-14)


class TestExample:
    @pytest.mark.parametrize("ab", [(1.0, 1.0), (0.0, 1.0), (1.0, 0.0), (0.7, -1.3)])
    @pytest.mark.parametrize("solver", [solve_filter, solve_filter_finite, solve_filter_factorized])
    def test_weights_and_error(self, example_pair, ab, solver):
        sol = solver(*example_pair, a=ab, L=L, G=G)
        np.testing.assert_allclose(sol.weights[:11], example_weights(*ab, PHI, PSI, 11), atol=1e-12)
        assert sol.mse == pytest.approx(example_delta(*ab, PHI, PSI), abs=1e-12)

    @pytest.mark.parametrize("ab", list(DELTA_REF))
    def test_frozen_errors(self, example_pair, ab):
        assert solve_filter(*example_pair, a=ab, L=L, G=G).mse == pytest.approx(DELTA_REF[ab], abs=1e-13)

    def test_smoothing_closed_form(self, example_pair):
        sol = smoothing(*example_pair, L=L, G=G)
        x, y = root_pair(PHI, PSI)
        k = np.arange(1, 12)
        np.testing.assert_allclose(sol.weights[0], (1 - PHI * y + PHI**2) / x, atol=1e-13)
        np.testing.assert_allclose(sol.weights[1:12], y ** (k - 1) * (y - PHI) * (1 - PHI * y) / x, atol=1e-13)
        assert sol.mse == pytest.approx(DELTA_REF[(1.0, 0.0)], abs=1e-12)

    def test_lag_one_point_estimate(self, example_pair):
        sol = estimate_point(*example_pair, p=-1, L=L, G=G)
        x, y = root_pair(PHI, PSI)
        assert sol.weights[0] == pytest.approx((y - PHI) * (1 - PHI * y) / x, abs=1e-13)
        assert sol.mse == pytest.approx(DELTA_REF[(0.0, 1.0)], abs=1e-12)

    def test_lagged_and_current_errors_differ(self, example_pair):
        d0 = smoothing(*example_pair, L=L, G=G).mse
        d1 = estimate_point(*example_pair, p=-1, L=L, G=G).mse
        assert d0 - d1 > 0.09

    @pytest.mark.parametrize("M", [4, 8, 32])
    def test_not_worse_than_finite_window(self, example_pair, M):
        sol = solve_filter(*example_pair, a=(1.0, 1.0), L=L, G=G)
        assert sol.mse <= toeplitz_projection(*example_pair, (1.0, 1.0), M=M, G=G).mse + 1e-12


class TestPathEquivalence:
    def test_point_smoothing_finite_agree(self):
        f, g = random_ma2_pair(np.random.default_rng(3))
        p0 = estimate_point(f, g, p=0, L=L, G=G)
        sm = smoothing(f, g, L=L, G=G)
        fin = solve_filter_finite(f, g, a=(1.0,), L=L, G=G)
        assert abs(p0.mse - sm.mse) <= 1e-10 and abs(p0.mse - fin.mse) <= 1e-10
        np.testing.assert_allclose(p0.weights, sm.weights, atol=1e-10)
        np.testing.assert_allclose(p0.weights, fin.weights, atol=1e-10)

    @pytest.mark.parametrize("p", [-1, -3])
    def test_point_matches_unit_functional(self, p):
        f, g = random_ma2_pair(np.random.default_rng(5))
        a = np.zeros(-p + 1)
        a[-p] = 1.0
        pt = estimate_point(f, g, p=p, L=L, G=G)
        fin = solve_filter_finite(f, g, a=a, L=L, G=G)
        assert pt.mse == pytest.approx(fin.mse, abs=1e-12)
        np.testing.assert_allclose(pt.h, fin.h, atol=1e-12)

    def test_finite_equals_general(self):
        f, g = random_ma2_pair(np.random.default_rng(8))
        a = (1.0, 0.3, -0.8)
        s1, s2 = solve_filter(f, g, a=a, L=L, G=G), solve_filter_finite(f, g, a=a, L=L, G=G)
        np.testing.assert_allclose(s1.c, s2.c, atol=1e-12)
        assert s1.mse == pytest.approx(s2.mse, abs=1e-12)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=15, deadline=None)
    def test_direct_vs_factorized(self, seed):
        rng = np.random.default_rng(seed)
        f, g = random_ma2_pair(rng)
        a = rng.normal(size=int(rng.integers(1, 6)))
        s1 = solve_filter(f, g, a=a, L=L, G=G)
        s2 = solve_filter_factorized(f, g, a=a, L=L, G=G)
        assert np.max(np.abs(s1.h - s2.h)) <= 1e-8
        assert abs(s1.mse - s2.mse) <= 1e-10

    def test_complex_functional(self):
        f, g = random_ma2_pair(np.random.default_rng(9))
        a = np.array([1.0, 0.5j, -0.2 + 0.3j])
        s1 = solve_filter(f, g, a=a, L=L, G=G)
        s2 = solve_filter_factorized(f, g, a=a, L=L, G=G)
        assert abs(s1.mse - s2.mse) <= 1e-10
        assert s1.mse == pytest.approx(s1.diagnostics["mse_integral"], abs=1e-10)


class TestInvariants:
    @pytest.fixture
    def solution(self):
        f, g = random_ma2_pair(np.random.default_rng(21))
        return f, g, solve_filter(f, g, a=(1.0, -0.4, 0.2), L=L, G=G)

    def test_defects(self, solution):
        _, _, sol = solution
        assert sol.diagnostics["causality_defect"] <= 1e-8
        assert sol.diagnostics["orthogonality_defect"] <= 1e-8
        assert sol.mse >= 0

    def test_bilinear_equals_integral(self, solution):
        f, g, sol = solution
        A = sol.functional.transfer(G)
        val = error_functional(sol.h, evaluate_density(f, G), evaluate_density(g, G), A)
        assert sol.mse == pytest.approx(val, abs=1e-10)

    def test_truncation_stability(self):
        f, g = random_ma2_pair(np.random.default_rng(22))
        d = [solve_filter(f, g, a=(1.0, 0.5), L=n, G=G).mse for n in (16, 32, 64, 128)]
        assert all(b <= a + 1e-12 for a, b in zip(d, d[1:]))
        assert abs(d[-1] - d[-2]) <= 1e-8

    def test_raw_weights_parseval(self, solution):
        _, _, sol = solution
        w, tail = time_weights(sol.h, G // 2 - 1)
        assert np.sum(np.abs(w) ** 2) == pytest.approx(np.mean(np.abs(sol.h) ** 2), abs=1e-10)
        assert tail == 0.0


class TestTimeWeights:
    def test_constant(self):
        w, tail = time_weights(np.full(64, 0.5), 5)
        np.testing.assert_allclose(w, [0.5, 0, 0, 0, 0, 0], atol=1e-16)
        assert tail == 0.0

    def test_rejects_anticausal(self):
        lam = -np.pi + 2 * np.pi * np.arange(64) / 64
        with pytest.raises(ConsistencyError):
            time_weights(np.exp(1j * lam), 5)

    def test_default_length(self, example_pair):
        sol = solve_filter(*example_pair, a=(1.0, 1.0), L=L, G=G)
        w, tail = time_weights(sol)
        assert w.size == L + 1
        assert tail <= 1e-20


class TestErrors:
    def test_prediction_rejected(self, example_pair):
        with pytest.raises(ValidationError, match="p <= 0"):
            estimate_point(*example_pair, p=1, L=8, G=256)

    def test_finite_functional_too_long(self, example_pair):
        with pytest.raises(ValidationError):
            solve_filter_finite(*example_pair, a=np.ones(10), L=8, G=256)

    def test_minimality_propagates(self):
        d = SpectralDensity.moving_average([1.0, -1.0])
        from robustfilter import MinimalityError

        with pytest.raises(MinimalityError):
            solve_filter(d, d, a=(1.0,), L=8, G=256)
