import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage, stats
from scipy.special import gamma as G

from d2dpcp.ec_geometry import (
    DomainGeometry,
    ec_densities,
    ec_density_chi2,
    ec_density_chi2_j0,
    empirical_ec,
    expected_ec,
    flag_coefficient,
    lk_ball,
    lk_disk_gamma_form,
    lk_rectangle,
    validity_floor,
)
from d2dpcp.random_field import GridSpec, SquaredExponentialKernel, sample_chi2_batch, sample_chi2_field


def rho2_general(u, k):
    """Second EC density of a chi-square field, independent closed form."""
    return u ** ((k - 2) / 2) * np.exp(-u / 2) * (u - (k - 1)) / (2 * np.pi * G(k / 2) * 2 ** ((k - 2) / 2))


def rho1_general(u, k):
    return u ** ((k - 1) / 2) * np.exp(-u / 2) / (np.sqrt(2 * np.pi) * G(k / 2) * 2 ** ((k - 2) / 2))


class TestFlag:
    @pytest.mark.parametrize("a", [0, 1, 2, 3, 5])
    def test_diagonal(self, a):
        assert flag_coefficient(a, a) == pytest.approx(1.0, rel=1e-14)

    def test_small_values(self):
        assert flag_coefficient(1, 0) == pytest.approx(1.0, rel=1e-14)
        assert flag_coefficient(2, 1) == pytest.approx(math.pi / 2, rel=1e-14)

    @pytest.mark.parametrize("ab", [(1, 2), (-1, 0), (2, -1), (2.5, 1)])
    def test_invalid(self, ab):
        with pytest.raises(ValueError):
            flag_coefficient(*ab)


class TestCurvatures:
    def test_disk(self):
        assert lk_ball(2, 0.0) == [1.0, 0.0, 0.0]
        assert np.allclose(lk_ball(2, 1.0), [1, math.pi, math.pi], rtol=1e-15)
        assert np.allclose(lk_ball(2, 3.0), [1, 3 * math.pi, 9 * math.pi], rtol=1e-15)

    @given(st.floats(0, 1e4, allow_subnormal=False))
    def test_two_disk_formulas_agree(self, r):
        assert np.allclose(lk_ball(2, r), lk_disk_gamma_form(r), rtol=1e-12, atol=0)
        assert np.allclose(lk_ball(2, r), [1, math.pi * r, math.pi * r * r], rtol=1e-12, atol=0)

    def test_other_dimensions(self):
        assert np.allclose(lk_ball(1, 2.0), [1, 4.0])
        assert np.allclose(lk_ball(3, 1.0), [1, 4, 2 * math.pi, 4 * math.pi / 3])
        with pytest.raises(ValueError):
            lk_ball(4, 1.0)

    def test_rectangle(self):
        assert lk_rectangle(1, 1) == [1.0, 2.0, 1.0]
        assert lk_rectangle(200, 200) == [1.0, 400.0, 40000.0]
        assert lk_rectangle(0, 5) == [1.0, 5.0, 0.0]

    def test_spectral_scaling(self):
        d = DomainGeometry.rectangle(100, 100).scaled(50.0)
        assert d.lk == (1.0, 4.0, 4.0)


class TestDensities:
    def test_rho0(self):
        assert ec_density_chi2_j0(0.0, 2) == 1.0
        assert ec_density_chi2_j0(2.0, 2) == pytest.approx(math.exp(-1), rel=1e-14)
        assert ec_density_chi2_j0(31.0, 2) == pytest.approx(math.exp(-15.5), rel=1e-12)

    @given(st.floats(0, 80), st.integers(1, 8))
    def test_rho0_is_chi2_tail(self, u, k):
        assert ec_density_chi2_j0(u, k) == pytest.approx(stats.chi2.sf(u, k), rel=1e-10, abs=1e-300)

    def test_rho1_k2(self):
        u = 2.0
        assert ec_density_chi2(1, u, 2) == pytest.approx(math.sqrt(u) * math.exp(-u / 2) / math.sqrt(2 * math.pi), rel=1e-14)

    @settings(max_examples=200)
    @given(st.floats(0.01, 100), st.integers(1, 10))
    def test_rho1_rho2_match_closed_forms(self, u, k):
        assert ec_density_chi2(1, u, k) == pytest.approx(rho1_general(u, k), rel=1e-10, abs=1e-300)
        assert ec_density_chi2(2, u, k) == pytest.approx(rho2_general(u, k), rel=1e-9, abs=1e-14)

    def test_rho3_k2_polynomial(self):
        # general form u^((k-3)/2) e^(-u/2) [u^2 - (2k-1)u + (k-1)(k-2)] / ((2pi)^(3/2) Gamma(k/2) 2^((k-2)/2)) at k = 2
        u = np.array([0.5, 2.0, 7.0])
        pref = np.exp(-u / 2) * u ** (-0.5) / (2 * np.pi) ** 1.5
        assert np.allclose(ec_density_chi2(3, u, 2), pref * (u**2 - 3 * u), rtol=1e-12)

    @pytest.mark.parametrize("j", [1, 2, 3])
    def test_decay(self, j):
        assert abs(ec_density_chi2(j, 2000.0, 2)) < 1e-300

    def test_u_zero_limits(self):
        # k = 2: rho1(0) = 0, rho2(0) = -1/(2 pi)
        assert ec_density_chi2(1, 0.0, 2) == 0.0
        assert ec_density_chi2(2, 0.0, 2) == pytest.approx(-1 / (2 * math.pi), rel=1e-14)
        assert expected_ec(0.0, 2, DomainGeometry.point()) == 1.0
        assert expected_ec(0.0, 2, DomainGeometry.rectangle(2, 3)) == pytest.approx(1 - 6 / (2 * math.pi), rel=1e-14)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ec_density_chi2(0, 1.0, 2)
        with pytest.raises(ValueError):
            ec_density_chi2(1, 1.0, 0)
        with pytest.raises(ValueError):
            ec_density_chi2(1, -1.0, 2)

    @pytest.mark.parametrize("k", [1, 2, 3, 5, 8])
    def test_nonnegative_above_floor(self, k):
        floor = validity_floor(k)
        assert floor == pytest.approx(max(k - 1, 0), abs=1e-9)
        u = np.linspace(floor, floor + 60, 601)
        rho = ec_densities(u, k, 2)
        assert np.all(rho >= -1e-15)

    def test_floor_k2(self):
        assert validity_floor(2) == pytest.approx(1.0)


class TestExpectedEC:
    def test_point_domain(self):
        for u in (0.5, 3.0, 31.0):
            assert expected_ec(u, 2, DomainGeometry.point()) == ec_density_chi2_j0(u, 2)

    @given(st.floats(0.5, 40), st.floats(0, 500), st.floats(0, 500))
    def test_linear_in_curvatures(self, u, l1, l2):
        rho = ec_densities(u, 2, 2)
        base = DomainGeometry("rectangle", (), (1.0, l1, l2))
        bumped = DomainGeometry("rectangle", (), (1.0, l1 + 1.0, l2 + 2.0))
        diff = expected_ec(u, 2, bumped) - expected_ec(u, 2, base)
        assert diff == pytest.approx(rho[1] + 2 * rho[2], rel=1e-8, abs=1e-12)

    @pytest.mark.parametrize("scaling", ["none", "spectral"])
    def test_unimodal_peak(self, scaling):
        u = np.linspace(0, 40, 4001)
        psi = expected_ec(u, 2, DomainGeometry.rectangle(200, 200), scaling, 50.0)
        d = np.diff(psi)
        turns = np.count_nonzero(np.diff(np.sign(d[d != 0])))
        assert turns == 1
        assert 1.0 <= u[np.argmax(psi)] <= 4.0

    def test_vector_u(self):
        u = np.array([1.0, 4.0])
        dom = DomainGeometry.ball(2, 3.0)
        assert np.allclose(expected_ec(u, 2, dom), [expected_ec(x, 2, dom) for x in u])

    def test_spectral_requires_length(self):
        with pytest.raises(ValueError):
            expected_ec(1.0, 2, DomainGeometry.rectangle(1, 1), "spectral")


def chi_by_labeling(mask):
    """Components minus holes for a union of closed unit squares."""
    full8 = np.ones((3, 3), bool)
    _, comps = ndimage.label(mask, structure=full8)
    padded = np.pad(~mask, 1, constant_values=True)
    lab, nbg = ndimage.label(padded)
    holes = nbg - 1 if padded.any() else 0
    return comps - holes


class TestEmpiricalEC:
    def test_all_below(self):
        assert empirical_ec(np.zeros((5, 5)), 1.0) == 0

    def test_single_cell(self):
        a = np.zeros((4, 4))
        a[1, 2] = 5
        assert empirical_ec(a, 1.0) == 1

    def test_ring(self):
        a = np.ones((3, 3))
        a[1, 1] = 0
        assert empirical_ec(a, 0.5) == 0

    def test_corner_touch_is_one_component(self):
        assert empirical_ec(np.eye(3), 0.5) == 1

    def test_two_blobs(self):
        a = np.zeros((3, 5))
        a[:, 0] = a[:, 4] = 1
        assert empirical_ec(a, 0.5) == 2

    @settings(max_examples=200)
    @given(arrays(np.bool_, st.tuples(st.integers(1, 9), st.integers(1, 9))))
    def test_matches_component_labeling(self, mask):
        assert empirical_ec(mask.astype(float), 0.5) == chi_by_labeling(mask)

    def test_batch_and_realization(self):
        g = GridSpec(30, 20)
        kern = SquaredExponentialKernel(4.0)
        batch = sample_chi2_batch(g, kern, 2, 6, 1)
        out = empirical_ec(batch, 3.0)
        assert out.shape == (6,)
        assert all(out[i] == empirical_ec(batch[i], 3.0) for i in range(6))
        f = sample_chi2_field(g, kern, 2, 2)
        assert isinstance(empirical_ec(f, 3.0), int)

    def test_rho2_by_finite_difference(self):
        # two rectangles with the same half perimeter isolate the area coefficient
        kern = SquaredExponentialKernel(10.0)
        means = []
        for w, h in ((100, 100), (180, 20)):
            means.append(empirical_ec(sample_chi2_batch(GridSpec(w, h), kern, 2, 1000, 1), 2.0).mean())
        d_area = (100 * 100 - 180 * 20) / 10.0**2
        slope = (means[0] - means[1]) / d_area
        assert slope == pytest.approx(ec_density_chi2(2, 2.0, 2), rel=0.15)
