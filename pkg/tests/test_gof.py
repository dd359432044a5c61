import numpy as np
import pytest
from scipy import special

from splinehawkes import (
    ConstantBackground,
    DomainError,
    EventSequence,
    ExponentialKernel,
    ObservationWindow,
    ks_test_uniform,
    rescaled_intervals,
    second_level_ks,
    simulate,
)
from splinehawkes.gof import kolmogorov_sf


class TestRescaledIntervals:
    def test_exact_transform_constant_rate(self):
        # alpha = 0 at the true constant rate: tau_i = 1 - exp(-mu dt_i)
        mu = 0.8
        times = np.array([1.0, 1.7, 3.1, 3.2, 6.0, 9.5])
        seq = EventSequence(times, ObservationWindow(0.0, 10.0))
        k = ExponentialKernel([0.0], [1.0])
        taus = rescaled_intervals(seq, k, ConstantBackground(mu))
        expected = 1.0 - np.exp(-mu * np.diff(times))
        np.testing.assert_allclose(taus, expected, rtol=0, atol=1e-12)

    def test_log_two_compensator_gives_half(self):
        mu = 0.5
        gap = np.log(2.0) / mu
        times = np.array([1.0, 1.0 + gap])
        seq = EventSequence(times, ObservationWindow(0.0, 10.0))
        k = ExponentialKernel([0.0], [1.0])
        taus = rescaled_intervals(seq, k, ConstantBackground(mu))
        assert taus[0] == pytest.approx(0.5, rel=1e-12)

    def test_too_few_events_warns_empty(self):
        seq = EventSequence([3.0], ObservationWindow(0.0, 10.0))
        k = ExponentialKernel([0.0], [1.0])
        with pytest.warns(UserWarning):
            taus = rescaled_intervals(seq, k, ConstantBackground(1.0))
        assert taus.size == 0

    def test_uniform_under_true_model(self):
        # Poisson data at the true rate: p > 0.05 in about 95% of replicates
        w = ObservationWindow(0.0, 100.0)
        k = ExponentialKernel([0.0], [1.0])
        bg = ConstantBackground(0.8)
        hits = 0
        reps = 1000
        for r in range(reps):
            seq = simulate(w, bg, k, seed=[600, r])
            if seq.n < 7:
                continue
            p = ks_test_uniform(rescaled_intervals(seq, k, bg)).p_value
            hits += p > 0.05
        assert hits / reps == pytest.approx(0.95, abs=0.02)


class TestKsTest:
    def test_nine_equally_spaced_points(self):
        # hand computation: empirical CDF jumps to i/9 at i/10, so the sup
        # deviation is max(i/9 - i/10, i/10 - (i-1)/9) = 0.1
        values = np.arange(1, 10) / 10.0
        stat, _ = ks_test_uniform(values)
        assert stat == pytest.approx(0.1, rel=1e-12)

    def test_degenerate_point_mass(self):
        values = np.full(1000, 0.5)
        stat, p = ks_test_uniform(values)
        assert stat == pytest.approx(0.5)
        assert p < 1e-100

    def test_statistic_permutation_invariant(self, rng):
        values = rng.uniform(0, 1, size=50)
        d1 = ks_test_uniform(values).statistic
        d2 = ks_test_uniform(rng.permutation(values)).statistic
        assert d1 == d2

    def test_matches_scipy_asymptotic(self, rng):
        for x in [0.3, 0.6, 1.0, 1.5, 2.2]:
            assert kolmogorov_sf(x) == pytest.approx(float(special.kolmogorov(x)), abs=1e-10)

    def test_small_argument_is_one(self):
        assert kolmogorov_sf(0.01) == 1.0

    def test_matches_scipy_kstest(self, rng):
        from scipy import stats

        values = rng.uniform(0, 1, size=400)
        mine = ks_test_uniform(values)
        ref = stats.kstest(values, "uniform", mode="asymp")
        assert mine.statistic == pytest.approx(ref.statistic, rel=1e-12)
        assert mine.p_value == pytest.approx(ref.pvalue, abs=1e-9)

    def test_input_validation(self):
        with pytest.raises(DomainError):
            ks_test_uniform([0.1, 0.2, 0.3])
        with pytest.raises(DomainError):
            ks_test_uniform([0.1, 0.2, 0.3, 0.4, 1.2])


class TestSecondLevel:
    def test_uniform_p_values_pass(self, rng):
        p = rng.uniform(0, 1, size=200)
        assert second_level_ks(p).passed

    def test_small_p_values_fail(self, rng):
        p = rng.uniform(0, 0.01, size=200)
        result = second_level_ks(p)
        assert not result.passed
        assert result.p_value < 1e-10

    def test_needs_ten_sessions(self, rng):
        with pytest.raises(DomainError):
            second_level_ks(rng.uniform(0, 1, size=9))

    def test_p_values_of_uniform_samples_are_uniform(self, rng):
        # distributional closure of the first-level test
        pvals = []
        for _ in range(200):
            sample = rng.uniform(0, 1, size=1000)
            pvals.append(ks_test_uniform(sample).p_value)
        assert second_level_ks(pvals).passed

    def test_rejection_rate_calibration(self, rng):
        # 5% level on true-null data rejects 5% +- 1.5% of the time
        rejections = 0
        reps = 2000
        for _ in range(reps):
            sample = rng.uniform(0, 1, size=120)
            rejections += ks_test_uniform(sample).p_value <= 0.05
        assert rejections / reps == pytest.approx(0.05, abs=0.015)
