import numpy as np
import pytest

from splinehawkes import (
    ConfigurationError,
    DomainError,
    EventSequence,
    ObservationWindow,
    SplineBackground,
    background_eval,
    basis_count,
    bspline_base,
    bspline_base_deriv,
    build_basis,
)


class TestBsplineBase:
    def test_outside_support(self):
        assert bspline_base(-1.0) == 0.0
        assert bspline_base(5.0) == 0.0
        assert bspline_base(4.0) == 0.0

    def test_knot_values(self):
        assert bspline_base(2.0) == pytest.approx(2.0 / 3.0, rel=1e-15)
        assert bspline_base(1.0) == pytest.approx(1.0 / 6.0, rel=1e-15)
        assert bspline_base(3.0) == pytest.approx(1.0 / 6.0, rel=1e-15)

    def test_symmetry(self, rng):
        x = rng.uniform(0.0, 4.0, size=200)
        np.testing.assert_allclose(bspline_base(x), bspline_base(4.0 - x), rtol=0, atol=1e-14)

    def test_nonnegative_and_bounded(self, rng):
        x = rng.uniform(-1.0, 5.0, size=500)
        v = bspline_base(x)
        assert np.all(v >= 0.0)
        assert np.all(v <= 2.0 / 3.0 + 1e-15)

    def test_c2_continuity_at_junctions(self):
        h = 1e-7
        for x0 in (0.0, 1.0, 2.0, 3.0, 4.0):
            left = bspline_base(x0 - h)
            right = bspline_base(x0 + h)
            assert right == pytest.approx(left, abs=5e-7)
            dleft = bspline_base_deriv(x0 - h)
            dright = bspline_base_deriv(x0 + h)
            assert dright == pytest.approx(dleft, abs=5e-7)


class TestBsplineDeriv:
    def test_special_points(self):
        assert bspline_base_deriv(2.0) == 0.0
        assert bspline_base_deriv(0.0) == 0.0
        assert bspline_base_deriv(0.5) == pytest.approx(0.125, rel=1e-15)

    def test_antisymmetry(self, rng):
        x = rng.uniform(0.0, 4.0, size=200)
        np.testing.assert_allclose(
            bspline_base_deriv(x), -bspline_base_deriv(4.0 - x), rtol=0, atol=1e-14
        )

    def test_matches_central_differences(self, rng):
        x = rng.uniform(-0.5, 4.5, size=400)
        h = 1e-6
        fd = (bspline_base(x + h) - bspline_base(x - h)) / (2 * h)
        np.testing.assert_allclose(bspline_base_deriv(x), fd, atol=1e-8)


class TestBuildBasis:
    def test_count_rule(self):
        assert build_basis(100, 50).m == 5
        assert build_basis(100, 25).m == 7

    def test_count_floor(self):
        b = build_basis(1, 50)
        assert b.m == 4
        assert b.values.shape == (3, 4)
        np.testing.assert_allclose(b.values.sum(axis=1), 1.0, atol=1e-12)

    def test_count_half_rounds_away_from_zero(self):
        # 75/50 = 1.5 rounds to 2
        assert basis_count(75, 50) == 5

    def test_partition_of_unity(self, rng):
        for n, k in [(7, 3), (50, 25), (321, 50), (1000, 100)]:
            b = build_basis(n, k)
            np.testing.assert_allclose(b.values.sum(axis=1), 1.0, rtol=0, atol=1e-12)

    def test_row_sparsity(self):
        b = build_basis(200, 20)
        for row in b.values:
            nz = np.flatnonzero(row)
            assert nz.size <= 4
            if nz.size > 1:
                assert nz[-1] - nz[0] <= 3  # consecutive block

    def test_values_in_unit_interval(self):
        b = build_basis(137, 13)
        assert np.all(b.values >= 0.0)
        assert np.all(b.values <= 1.0)

    def test_derivs_match_finite_differences(self, rng):
        n, k = 60, 10
        b = build_basis(n, k)
        h = 1e-5
        for i in rng.integers(1, n + 1, size=12):
            tp = float(i)
            for j in range(b.m):
                f = lambda t: bspline_base(t / b.w - j + 3.0)
                fd = (f(tp + h) - f(tp - h)) / (2 * h)
                assert b.derivs[i - 1, j] == pytest.approx(fd, abs=1e-6)

    def test_deriv_rows_sum_to_zero(self):
        b = build_basis(80, 8)
        np.testing.assert_allclose(b.derivs.sum(axis=1), 0.0, atol=1e-12)

    def test_shift_identity(self, rng):
        times = np.sort(rng.uniform(0.0, 50.0, size=30))
        seq = EventSequence(times, ObservationWindow(0.0, 50.0))
        b = build_basis(seq.n, k=7)
        coeffs = rng.normal(size=b.m)
        c = 0.7
        bg0 = SplineBackground(coeffs, b, seq)
        bg1 = SplineBackground(coeffs + c, b, seq)
        grid = np.linspace(0.0, 50.0, 40)
        np.testing.assert_allclose(
            background_eval(bg1, grid), np.exp(c) * background_eval(bg0, grid), rtol=1e-10
        )

    def test_errors(self):
        with pytest.raises(DomainError):
            build_basis(0, 50)
        with pytest.raises(DomainError):
            build_basis(10, 0)
        with pytest.raises(ConfigurationError):
            build_basis(10, 5, m=3)

    def test_csv_export(self, tmp_path):
        b = build_basis(9, 3)
        path = tmp_path / "basis.csv"
        b.to_csv(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        np.testing.assert_allclose(data, b.values, rtol=1e-12)
