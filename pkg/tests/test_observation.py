import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as scipy_integrate
from scipy import stats

import seeiirfit as sf
from seeiirfit.observation import DelayKernel, ObsParams


class TestDelayKernel:
    def test_validation(self):
        DelayKernel(np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            DelayKernel(np.array([0.6, 0.6]))
        with pytest.raises(ValueError):
            DelayKernel(np.array([-0.1, 1.1]))
        with pytest.raises(ValueError):
            DelayKernel(np.full(10, 0.1))  # spans more than eight weeks
        with pytest.raises(ValueError):
            DelayKernel(np.array([]))

    def test_from_file(self, tmp_path):
        path = tmp_path / "kernel.txt"
        path.write_text("# infection-to-admission delay\n0.4\n0.4\n0.2\n")
        kernel = DelayKernel.from_file(path)
        np.testing.assert_array_equal(kernel.probs, [0.4, 0.4, 0.2])
        path.write_text("0.4\nnope\n")
        with pytest.raises(ValueError, match=":2"):
            DelayKernel.from_file(path)

    def test_obs_params_validation(self):
        ObsParams(p_icu=0.001, eta=3.0)
        ObsParams(p_icu=0.0, eta=3.0)  # degenerate: observation off
        with pytest.raises(ValueError):
            ObsParams(p_icu=1.0, eta=3.0)
        with pytest.raises(ValueError):
            ObsParams(p_icu=0.5, eta=1.0)


class TestDefaultDelayKernel:
    def test_near_delta_at_week_zero(self):
        kernel = sf.default_delay_kernel(mean_days=0.5, shape=50.0)
        assert kernel.probs[0] > 0.999

    @settings(max_examples=100, deadline=None)
    @given(mean=st.floats(0.2, 40.0), shape=st.floats(0.3, 60.0),
           max_weeks=st.integers(0, 8))
    def test_always_normalized(self, mean, shape, max_weeks):
        kernel = sf.default_delay_kernel(mean, shape, max_weeks)
        assert kernel.probs.size == max_weeks + 1
        assert np.all(kernel.probs >= 0.0)
        assert abs(kernel.probs.sum() - 1.0) <= 1e-12

    def test_matches_density_quadrature(self):
        mean, shape, max_weeks = 10.0, 4.0, 4
        kernel = sf.default_delay_kernel(mean, shape, max_weeks)
        scale = mean / shape
        masses = []
        for w in range(max_weeks + 1):
            mass, _ = scipy_integrate.quad(
                lambda x: stats.gamma.pdf(x, a=shape, scale=scale),
                7.0 * w, 7.0 * (w + 1), epsabs=1e-13, epsrel=1e-13)
            masses.append(mass)
        oracle = np.array(masses) / np.sum(masses)
        np.testing.assert_allclose(kernel.probs, oracle, atol=1e-8)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            sf.default_delay_kernel(mean_days=0.0)
        with pytest.raises(ValueError):
            sf.default_delay_kernel(shape=-1.0)
        with pytest.raises(ValueError):
            sf.default_delay_kernel(max_weeks=9)


class TestExpectedAdmissions:
    def test_identity_kernel(self):
        inc = np.array([5.0, 10.0, 2.0])
        mu = sf.expected_admissions(inc, DelayKernel(np.array([1.0])), 1.0)
        np.testing.assert_array_equal(mu, inc)

    def test_single_impulse(self):
        mu = sf.expected_admissions(np.array([100.0, 0, 0, 0]),
                                    DelayKernel(np.array([0.5, 0.5])), 0.01)
        np.testing.assert_allclose(mu, [0.5, 0.5, 0.0, 0.0])

    def test_matches_double_loop(self):
        rng = np.random.default_rng(3)
        inc = rng.random(30) * 1e4
        probs = rng.random(5)
        kernel = DelayKernel(probs / probs.sum())
        p = 0.004
        expected = np.zeros(30)
        for w in range(30):
            for v in range(w + 1):
                if w - v < kernel.probs.size:
                    expected[w] += kernel.probs[w - v] * inc[v] * p
        mu = sf.expected_admissions(inc, kernel, p)
        np.testing.assert_allclose(mu, expected, rtol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(scale=st.floats(0.1, 10.0), p=st.floats(0.001, 0.9))
    def test_linearity_and_mass_bound(self, scale, p):
        rng = np.random.default_rng(7)
        inc = rng.random(12) * 100
        kernel = sf.default_delay_kernel()
        base = sf.expected_admissions(inc, kernel, p)
        np.testing.assert_allclose(
            sf.expected_admissions(inc * scale, kernel, p), base * scale,
            rtol=1e-12)
        assert base.sum() <= p * inc.sum() + 1e-9

    def test_negative_incidence_rejected(self):
        with pytest.raises(ValueError):
            sf.expected_admissions(np.array([-1.0]), sf.default_delay_kernel(), 0.5)


class TestNegbinLogpmf:
    def test_closed_form_point(self):
        assert sf.negbin_logpmf(0, 2.0, 2.0) == pytest.approx(np.log(0.25), rel=1e-12)

    def test_poisson_limit(self):
        diff = abs(sf.negbin_logpmf(3, 3.0, 1.0001) - stats.poisson.logpmf(3, 3.0))
        assert diff < 1e-3

    @pytest.mark.parametrize("mu", [0.1, 1.0, 2.0, 10.0, 100.0])
    @pytest.mark.parametrize("eta", [1.01, 2.0, 17.9, 99.0])
    def test_pmf_sums_to_one(self, mu, eta):
        xs = np.arange(0, 10_001)
        total = np.exp(sf.negbin_logpmf(xs, mu, eta)).sum()
        assert abs(total - 1.0) <= 1e-9

    def test_zero_mean_cases(self):
        assert sf.negbin_logpmf(0, 0.0, 2.0) == 0.0
        assert sf.negbin_logpmf(3, 0.0, 2.0) == -np.inf

    def test_no_overflow_at_large_counts(self):
        assert np.isfinite(sf.negbin_logpmf(1_000_000, 10.0, 2.0))

    def test_input_validation(self):
        with pytest.raises(ValueError):
            sf.negbin_logpmf(3, 1.0, 1.0)
        with pytest.raises(ValueError):
            sf.negbin_logpmf(-1, 1.0, 2.0)
        with pytest.raises(ValueError):
            sf.negbin_logpmf(1.5, 1.0, 2.0)
        with pytest.raises(ValueError):
            sf.negbin_logpmf(1, -0.5, 2.0)

    def test_moments_against_monte_carlo(self):
        mu, eta, n = 5.0, 4.0, 1_000_000
        rng = np.random.default_rng(17)
        x = sf.negbin_sample(np.full(n, mu), eta, rng)
        # moment oracle: brute-force sums over the pmf
        grid = np.arange(0, 4000)
        pmf = np.exp(sf.negbin_logpmf(grid, mu, eta))
        m1 = float(np.sum(grid * pmf))
        var = float(np.sum((grid - m1) ** 2 * pmf))
        m4 = float(np.sum((grid - m1) ** 4 * pmf))
        assert m1 == pytest.approx(mu, abs=1e-9)
        assert var == pytest.approx(eta * mu, abs=1e-9)
        se_mean = np.sqrt(var / n)
        se_var = np.sqrt((m4 - var ** 2) / n)
        assert abs(x.mean() - mu) <= 3 * se_mean
        assert abs(x.var(ddof=1) - eta * mu) <= 3 * se_var


class TestSeriesLoglik:
    def test_single_week_reduces_to_logpmf(self):
        assert sf.series_loglik(np.array([4.0]), np.array([3.0]), 2.5) == \
            pytest.approx(float(sf.negbin_logpmf(4, 3.0, 2.5)))

    def test_additivity(self):
        obs = np.array([4.0, 7.0])
        mu = np.array([3.0, 6.0])
        total = sf.series_loglik(obs, mu, 2.5)
        parts = sum(float(sf.negbin_logpmf(o, m, 2.5)) for o, m in zip(obs, mu))
        assert total == pytest.approx(parts, rel=1e-12)

    def test_missing_weeks_skipped(self):
        obs = np.array([4.0, np.nan, 7.0, np.nan])
        mu = np.array([3.0, 100.0, 6.0, 50.0])
        assert sf.series_loglik(obs, mu, 2.5) == pytest.approx(
            sf.series_loglik(np.array([4.0, 7.0]), np.array([3.0, 6.0]), 2.5))

    def test_all_missing_is_zero(self):
        assert sf.series_loglik(np.array([np.nan, np.nan]),
                                np.array([3.0, 4.0]), 2.0) == 0.0

    def test_length_mismatch_is_error(self):
        with pytest.raises(ValueError):
            sf.series_loglik(np.array([1.0]), np.array([1.0, 2.0]), 2.0)


class TestNegbinSample:
    def test_zero_mean_draws_zero(self):
        rng = np.random.default_rng(0)
        assert sf.negbin_sample(0.0, 3.0, rng) == 0
        out = sf.negbin_sample(np.array([0.0, 0.0, 5.0]), 3.0, rng)
        assert out[0] == out[1] == 0

    def test_deterministic_given_seed(self):
        a = sf.negbin_sample(np.full(100, 4.0), 3.0, np.random.default_rng(5))
        b = sf.negbin_sample(np.full(100, 4.0), 3.0, np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)

    def test_chi_square_against_pmf(self):
        mu, eta, n = 5.0, 4.0, 100_000
        rng = np.random.default_rng(23)
        x = sf.negbin_sample(np.full(n, mu), eta, rng)
        grid = np.arange(0, 2000)
        pmf = np.exp(sf.negbin_logpmf(grid, mu, eta))
        # merge the tail so every expected bin count is at least 5
        edges = [0]
        acc = 0.0
        for k, p in enumerate(pmf):
            acc += p * n
            if acc >= 5.0:
                edges.append(k + 1)
                acc = 0.0
        edges[-1] = grid.size
        expected = np.array([pmf[a:b].sum() * n for a, b in zip(edges, edges[1:])])
        observed = np.array([np.sum((x >= a) & (x < b))
                             for a, b in zip(edges, edges[1:])])
        chi2 = float(np.sum((observed - expected) ** 2 / expected))
        dof = len(expected) - 1
        assert chi2 < stats.chi2.ppf(0.999, dof)

    def test_eta_validation(self):
        with pytest.raises(ValueError):
            sf.negbin_sample(1.0, 1.0, np.random.default_rng(0))
