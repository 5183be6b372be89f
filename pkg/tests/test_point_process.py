import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from d2dpcp.point_process import (
    AnnulusWindow,
    EmptyRegionWarning,
    PointPattern,
    RectWindow,
    intensity_measure,
    sample_cox,
    sample_mh_fixed_n,
    sample_sppp,
)
from d2dpcp.random_field import FieldRealization, GridSpec, SquaredExponentialKernel, sample_chi2_field


def const_field(grid, c):
    return FieldRealization(grid, np.full(grid.shape, float(c)), "chi_square", 2)


class TestWindows:
    def test_rect_invalid(self):
        with pytest.raises(ValueError):
            RectWindow(0, 0, 0, 1)

    def test_annulus_invalid(self):
        with pytest.raises(ValueError):
            AnnulusWindow(R=1.0, R0=1.0)

    def test_annulus_radius_law(self):
        w = AnnulusWindow(100.0, 10.0)
        r = w.radii(w.sample_uniform(np.random.default_rng(0), 200_000))
        # P(r <= 60) = (60^2 - 10^2) / (100^2 - 10^2)
        assert np.mean(r <= 60) == pytest.approx((3600 - 100) / (10000 - 100), abs=0.005)


class TestSPPP:
    def test_zero_intensity(self):
        assert sample_sppp(RectWindow.square(200), 0.0, 1).n == 0

    def test_negative_intensity(self):
        with pytest.raises(ValueError):
            sample_sppp(RectWindow.square(10), -1.0, 1)

    def test_mean_count(self):
        w = RectWindow.square(200)
        counts = [sample_sppp(w, 0.01, s).n for s in range(10_000)]
        assert np.mean(counts) == pytest.approx(400, rel=0.02)

    def test_annulus_radii(self):
        w = AnnulusWindow(R=100.0, R0=1.0)
        p = sample_sppp(w, 0.05, 3)
        r = w.radii(p.points)
        assert p.n > 0 and r.min() >= 1.0 - 1e-9 and r.max() <= 100.0 + 1e-9

    def test_deterministic(self):
        w = RectWindow.square(50)
        assert np.array_equal(sample_sppp(w, 0.1, 7).points, sample_sppp(w, 0.1, 7).points)


class TestCox:
    def test_zero_field(self):
        assert sample_cox(const_field(GridSpec(10, 10), 0.0), 1).n == 0

    def test_needs_chi_square(self):
        f = FieldRealization(GridSpec(2, 2), np.zeros((2, 2)), "gaussian")
        with pytest.raises(ValueError):
            sample_cox(f, 1)

    def test_constant_field_mean_count(self):
        f = const_field(GridSpec(20, 20, 2.0), 0.25)
        counts = [sample_cox(f, s).n for s in range(10_000)]
        assert np.mean(counts) == pytest.approx(0.25 * 40 * 40, rel=0.02)

    def test_points_inside_their_cells(self):
        g = GridSpec(10, 8, 3.0)
        f = sample_chi2_field(g, SquaredExponentialKernel(5.0), 2, 4)
        p = sample_cox(f, 5, scale=0.5)
        assert p.n > 0
        assert np.all(RectWindow.from_grid(g).contains(p.points))

    def test_matches_sppp_counts(self):
        # constant field c is a homogeneous Poisson process with intensity c
        g = GridSpec(15, 15)
        f = const_field(g, 0.4)
        w = RectWindow.from_grid(g)
        a = [sample_cox(f, s).n for s in range(1000)]
        b = [sample_sppp(w, 0.4, 10_000 + s).n for s in range(1000)]
        assert stats.mannwhitneyu(a, b).pvalue > 0.01
        assert stats.ks_2samp(a, b).pvalue > 0.01


class TestMH:
    def test_constant_field_uniform(self):
        g = GridSpec(8, 8)
        p = sample_mh_fixed_n(const_field(g, 1.0), 10_000, seed=1)
        h, _, _ = np.histogram2d(p.points[:, 0], p.points[:, 1], bins=4, range=[[-0.5, 7.5], [-0.5, 7.5]])
        assert stats.chisquare(h.ravel()).pvalue > 0.01

    def test_absorbing_cell(self):
        g = GridSpec(5, 5)
        v = np.zeros(g.shape)
        v[2, 3] = 5.0
        p = sample_mh_fixed_n(FieldRealization(g, v, "chi_square", 2), 500, seed=2)
        i, j = g.cell_index(p.points)
        assert np.all(i == 3) and np.all(j == 2)

    def test_two_cell_ratio(self):
        g = GridSpec(2, 1)
        f = FieldRealization(g, np.array([[2.0, 1.0]]), "chi_square", 2)
        p = sample_mh_fixed_n(f, 100_000, seed=3)
        left = np.count_nonzero(p.points[:, 0] < 0.5)
        assert left / (p.n - left) == pytest.approx(2.0, abs=0.05)

    def test_scale_invariance(self):
        g = GridSpec(6, 4)
        f = sample_chi2_field(g, SquaredExponentialKernel(2.0), 2, 9)
        f3 = FieldRealization(g, 3.0 * f.values, "chi_square", 2)
        a = sample_mh_fixed_n(f, 300, seed=4)
        b = sample_mh_fixed_n(f3, 300, seed=4)
        assert np.array_equal(a.points, b.points)

    def test_defaults_recorded(self):
        p = sample_mh_fixed_n(const_field(GridSpec(3, 3, 2.0), 1.0), 20, seed=0)
        assert p.meta["burn_in"] == 200 and p.meta["thin"] == 10 and p.meta["proposal_sigma"] == 4.0
        assert p.label == "pcp_mh" and p.n == 20

    def test_rejects_zero_field(self):
        with pytest.raises(ValueError):
            sample_mh_fixed_n(const_field(GridSpec(3, 3), 0.0), 10, seed=0)

    def test_rejects_bad_n(self):
        with pytest.raises(ValueError):
            sample_mh_fixed_n(const_field(GridSpec(3, 3), 1.0), 0, seed=0)


class TestIntensityMeasure:
    def test_zero_field(self):
        assert intensity_measure(const_field(GridSpec(4, 4), 0.0), RectWindow(-1, 2, -1, 2)) == 0.0

    def test_constant_field(self):
        g = GridSpec(10, 10, 2.0)
        # cells with centers in [0, 8] x [0, 8]: 5 x 5 cells of area 4
        assert intensity_measure(const_field(g, 1.5), RectWindow(-1, 9, -1, 9)) == pytest.approx(1.5 * 100)

    def test_full_window_sum_order(self):
        g = GridSpec(12, 9, 0.5)
        f = sample_chi2_field(g, SquaredExponentialKernel(1.0), 2, 1)
        total = intensity_measure(f, RectWindow.from_grid(g))
        alt = math.fsum(np.random.default_rng(0).permutation(f.values.ravel())) * g.cell_area
        assert total == pytest.approx(alt, rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.5, 10.5))
    def test_additive(self, cut):
        g = GridSpec(12, 6)
        f = sample_chi2_field(g, SquaredExponentialKernel(2.0), 2, 2)
        left = lambda c: c[:, 0] < cut
        right = lambda c: c[:, 0] >= cut
        whole = intensity_measure(f, RectWindow.from_grid(g))
        assert intensity_measure(f, left) + intensity_measure(f, right) == pytest.approx(whole, rel=1e-12)

    def test_empty_region_warns(self):
        with pytest.warns(EmptyRegionWarning):
            assert intensity_measure(const_field(GridSpec(3, 3), 1.0), RectWindow(50, 60, 50, 60)) == 0.0


class TestPattern:
    def test_points_must_be_inside(self):
        with pytest.raises(ValueError):
            PointPattern(np.array([[5.0, 5.0]]), RectWindow.square(1), "sppp")

    def test_label(self):
        with pytest.raises(ValueError):
            PointPattern(np.zeros((0, 2)), RectWindow.square(1), "thomas")

    def test_csv_round_trip(self, tmp_path):
        p = sample_sppp(AnnulusWindow(10.0, 1.0), 0.5, 5)
        p.to_csv(tmp_path / "p.csv")
        q = PointPattern.read_csv(tmp_path / "p.csv")
        assert q.label == "sppp" and q.window == p.window and q.seed_record == 5
        assert np.allclose(q.points, p.points, rtol=1e-11)
        assert (tmp_path / "p.csv").read_text().splitlines()[1] == "x,y"
