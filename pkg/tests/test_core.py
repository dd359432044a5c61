import numpy as np
import pytest
from scipy.integrate import quad

from splinehawkes import (
    ConstantBackground,
    DomainError,
    EventSequence,
    ExponentialKernel,
    ObservationWindow,
    PiecewiseLinearBackground,
    SplineBackground,
    background_eval,
    background_integral,
    branching_ratio,
    build_basis,
    kernel_eval,
    kernel_integral,
)
from conftest import random_background, random_kernel, random_sequence


class TestKernel:
    def test_eval_at_zero(self):
        k = ExponentialKernel([0.5], [2.0])
        assert kernel_eval(k, 0.0) == pytest.approx(1.0)

    def test_eval_zero_weights(self):
        k = ExponentialKernel([0.0, 0.0], [1.0, 5.0])
        for s in (0.0, 0.3, 7.0):
            assert kernel_eval(k, s) == 0.0

    def test_eval_closed_form(self):
        k = ExponentialKernel([0.3, 0.2], [1.0, 10.0])
        expected = 0.3 * 1.0 * np.exp(-0.5) + 0.2 * 10.0 * np.exp(-5.0)
        assert kernel_eval(k, 0.5) == pytest.approx(expected, rel=1e-14)

    def test_eval_negative_lag_rejected(self):
        k = ExponentialKernel([0.5], [2.0])
        with pytest.raises(DomainError):
            kernel_eval(k, -0.1)
        with pytest.raises(DomainError):
            kernel_integral(k, -0.1)

    def test_integral_at_zero(self):
        k = ExponentialKernel([0.4, 0.1], [0.5, 3.0])
        assert kernel_integral(k, 0.0) == 0.0

    def test_integral_limit_is_branching_ratio(self):
        k = ExponentialKernel([0.5], [2.0])
        assert kernel_integral(k, 50.0 / 2.0) == pytest.approx(0.5, abs=1e-6)

    def test_integral_closed_form(self):
        k = ExponentialKernel([0.3, 0.2], [1.0, 10.0])
        expected = 0.3 * (1 - np.exp(-1.0)) + 0.2 * (1 - np.exp(-10.0))
        assert kernel_integral(k, 1.0) == pytest.approx(expected, rel=1e-14)
        oracle, _ = quad(lambda s: kernel_eval(k, s), 0.0, 1.0, epsabs=1e-13, epsrel=1e-12)
        assert kernel_integral(k, 1.0) == pytest.approx(oracle, rel=1e-10)

    def test_integral_matches_quadrature_randomized(self, rng):
        for _ in range(100):
            k = random_kernel(rng)
            s = float(rng.uniform(0.01, 30.0))
            oracle, _ = quad(lambda u: kernel_eval(k, u), 0.0, s, epsabs=1e-13, epsrel=1e-12, limit=200)
            assert kernel_integral(k, s) == pytest.approx(oracle, rel=1e-8)

    def test_integral_limit_randomized(self, rng):
        for _ in range(20):
            k = random_kernel(rng)
            s = 50.0 / float(np.min(k.betas))
            assert kernel_integral(k, s) == pytest.approx(branching_ratio(k), abs=1e-6)

    def test_branching_examples(self):
        assert branching_ratio(ExponentialKernel([0.41], [1.0])) == pytest.approx(0.41)
        assert branching_ratio(ExponentialKernel([], [])) == 0.0
        assert branching_ratio(ExponentialKernel([0.2, 0.3, 0.1], [1, 2, 3])) == pytest.approx(0.6)

    def test_invalid_kernels(self):
        with pytest.raises(DomainError):
            ExponentialKernel([0.5, 0.2], [1.0])
        with pytest.raises(DomainError):
            ExponentialKernel([-0.1], [1.0])
        with pytest.raises(DomainError):
            ExponentialKernel([0.1], [0.0])

    def test_supercritical_weights_allowed(self):
        # fitting may traverse branching ratios at or above one
        k = ExponentialKernel([0.9, 0.4], [1.0, 2.0])
        assert branching_ratio(k) == pytest.approx(1.3)


class TestBackgrounds:
    def test_constant_eval(self):
        bg = ConstantBackground(2.0)
        assert background_eval(bg, -3.0) == 2.0
        assert background_eval(bg, 17.5) == 2.0

    def test_pl_midpoint(self):
        bg = PiecewiseLinearBackground([0.0, 10.0], [1.0, 3.0])
        assert background_eval(bg, 5.0) == pytest.approx(2.0)

    def test_pl_outside_knots(self):
        bg = PiecewiseLinearBackground([0.0, 10.0], [1.0, 3.0])
        with pytest.raises(DomainError):
            background_eval(bg, 10.5)

    def test_spline_zero_coeffs_is_unit_rate(self, rng):
        seq = random_sequence(rng, n=40)
        basis = build_basis(seq.n, k=10)
        bg = SplineBackground(np.zeros(basis.m), basis, seq)
        grid = np.linspace(seq.window.start, seq.window.end, 23)
        np.testing.assert_allclose(background_eval(bg, grid), 1.0, rtol=1e-12)

    def test_spline_outside_window(self, rng):
        seq = random_sequence(rng, n=10)
        basis = build_basis(seq.n, k=5)
        bg = SplineBackground(np.zeros(basis.m), basis, seq)
        with pytest.raises(DomainError):
            background_eval(bg, seq.window.end + 1.0)

    def test_constant_integral(self):
        seq = EventSequence([], ObservationWindow(2.0, 7.0))
        assert background_integral(ConstantBackground(2.0), seq) == pytest.approx(10.0)

    def test_pl_integral_trapezoid(self):
        seq = EventSequence([], ObservationWindow(0.0, 10.0))
        bg = PiecewiseLinearBackground([0.0, 10.0], [1.0, 3.0])
        assert background_integral(bg, seq) == pytest.approx(20.0)

    def test_spline_unit_integral(self, rng):
        window = ObservationWindow(1.0, 8.0)
        times = np.sort(rng.uniform(1.0, 8.0, size=12))
        seq = EventSequence(times, window)
        basis = build_basis(seq.n, k=6)
        bg = SplineBackground(np.zeros(basis.m), basis, seq)
        assert background_integral(bg, seq) == pytest.approx(7.0, rel=1e-12)

    @pytest.mark.parametrize("family", ["const", "pl", "spline"])
    def test_integral_matches_quadrature(self, rng, family):
        for _ in range(5):
            seq = random_sequence(rng, n=25)
            bg = random_background(rng, seq, family)
            if family == "spline":
                # quadrature must respect the piecewise-constant segments
                bounds = seq.segment_bounds()
                oracle = sum(
                    quad(lambda t: background_eval(bg, t), a, b, epsabs=1e-12)[0]
                    for a, b in zip(bounds[:-1], bounds[1:])
                )
            else:
                oracle, _ = quad(
                    lambda t: background_eval(bg, t),
                    seq.window.start,
                    seq.window.end,
                    points=getattr(bg, "knot_times", None),
                    limit=300,
                    epsabs=1e-12,
                )
            assert background_integral(bg, seq) == pytest.approx(oracle, rel=1e-8)

    def test_invalid_backgrounds(self):
        with pytest.raises(DomainError):
            ConstantBackground(0.0)
        with pytest.raises(DomainError):
            PiecewiseLinearBackground([0.0], [1.0])
        with pytest.raises(DomainError):
            PiecewiseLinearBackground([0.0, 1.0], [1.0, -2.0])


class TestEventSequence:
    def test_window_invariant(self):
        with pytest.raises(DomainError):
            ObservationWindow(3.0, 3.0)

    def test_strictly_increasing(self):
        with pytest.raises(DomainError):
            EventSequence([1.0, 1.0, 2.0], ObservationWindow(0.0, 5.0))

    def test_inside_window(self):
        with pytest.raises(DomainError):
            EventSequence([0.5, 6.0], ObservationWindow(0.0, 5.0))

    def test_boundary_events_allowed(self):
        seq = EventSequence([0.0, 5.0], ObservationWindow(0.0, 5.0))
        assert seq.n == 2

    def test_empty_sequence(self):
        seq = EventSequence([], ObservationWindow(0.0, 5.0))
        assert seq.n == 0
        np.testing.assert_allclose(seq.gaps(), [5.0])

    def test_csv_roundtrip_exact(self, rng, tmp_path):
        times = np.sort(rng.uniform(0.0, 100.0, size=57))
        seq = EventSequence(times, ObservationWindow(-0.25, 101.7))
        path = tmp_path / "events.csv"
        seq.to_csv(path)
        back = EventSequence.from_csv(path)
        assert np.array_equal(back.times, seq.times)  # bitwise
        assert back.window == seq.window

    def test_csv_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("start,0.0\nend,1.0\n0.5\n")
        with pytest.raises(DomainError):
            EventSequence.from_csv(path)
