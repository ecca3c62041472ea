"""Grids, masks, coefficient sampling, and closed-form effective limits."""

import json
import math

import numpy as np
import pytest

from frachom import domain


SQRT3 = math.sqrt(3.0)  # harmonic mean of 2+sin(2*pi*y): integral dy/(2+sin) = 1/sqrt(3)


class TestGrid:
    def test_periodic_example(self):
        g = domain.build_grid(1, 4.0, 8, "periodic")
        assert g.h == 1.0
        np.testing.assert_allclose(g.axis, np.arange(-4.0, 4.0))

    def test_2d_node_count(self):
        g = domain.build_grid(2, 1.0, 4, "zero-exterior")
        assert g.n_nodes == 16
        assert g.h == 0.5

    def test_fine_spacing(self):
        g = domain.build_grid(1, 4.0, 512, "periodic")
        assert g.h == 0.015625

    def test_rejects_odd_n(self):
        with pytest.raises(ValueError):
            domain.build_grid(1, 4.0, 9, "periodic")

    def test_rejects_bad_dim(self):
        with pytest.raises(ValueError):
            domain.build_grid(3, 4.0, 8, "periodic")

    def test_json_roundtrip(self):
        g = domain.build_grid(2, 2.0, 16, "periodic")
        assert domain.CartesianGrid.from_dict(json.loads(domain.to_json(g))) == g


class TestCoefficient:
    def test_constant_identity(self):
        g = domain.build_grid(1, 4.0, 64, "periodic")
        c = domain.periodic_coefficient(domain.constant_profile(1.0), 0.5, g)
        assert np.all(c.diag == 1.0)
        assert c.lam == 1.0

    def test_sin1d_samples_and_certificate(self):
        g = domain.build_grid(1, 4.0, 512, "periodic")
        c = domain.periodic_coefficient(domain.sin_profile(2.0), 0.1, g)
        np.testing.assert_allclose(c.diag, 2.0 + np.sin(20.0 * np.pi * g.axis), atol=1e-12)
        assert c.lam == 3.0
        lo, hi = c.eigen_range()
        assert lo >= 1.0 / c.lam - 1e-12 and hi <= c.lam + 1e-12

    def test_rejects_non_elliptic(self):
        with pytest.raises(ValueError):
            domain.sin_profile(1.0)

    def test_periodicity_at_translate_nodes(self):
        g = domain.build_grid(1, 4.0, 64, "periodic")
        eps = 0.5  # eps/h = 4, integer
        c = domain.periodic_coefficient(domain.sin_profile(2.0), eps, g)
        k = round(eps / g.h)
        np.testing.assert_allclose(c.diag[k:], c.diag[:-k], atol=1e-12)

    def test_laminate_field(self):
        g = domain.build_grid(2, 4.0, 8, "periodic")
        c = domain.periodic_coefficient(
            (domain.sin_profile(2.0), domain.constant_profile(1.0)), 0.5, g)
        assert c.diag.shape == (8, 8, 2)
        # varies in x1 only
        assert np.all(c.diag[:, 0, 0] == c.diag[:, 5, 0])
        assert np.all(c.diag[..., 1] == 1.0)


class TestMask:
    def test_interior_iff_inside(self):
        g = domain.build_grid(1, 4.0, 64, "zero-exterior")
        m = domain.mask_domain(g, (-1.0, 1.0))
        inside = np.abs(g.axis) < 1.0
        np.testing.assert_array_equal(m.labels == domain.INTERIOR, inside)

    def test_hole_center_count(self):
        holes = domain.HoleFamily(1, 0.25, ("power", 1.0, 3.0))
        centers = holes.centers((-1.0, 1.0))
        assert len(centers) == 8
        expect = np.array([-0.875, -0.625, -0.375, -0.125, 0.125, 0.375, 0.625, 0.875])
        np.testing.assert_allclose(np.sort(centers[:, 0]), expect, atol=1e-12)

    def test_snapping_to_single_nodes(self):
        g = domain.build_grid(1, 4.0, 128, "zero-exterior")  # h = 1/16
        holes = domain.HoleFamily(1, 0.25, ("power", 1.0, 3.0))  # a = 1/64 < h/2
        m = domain.mask_domain(g, (-1.0, 1.0), holes)
        assert len(m.hole_idx) == 8
        # each hole node is the grid node nearest its center
        pts = g.axis[m.hole_idx]
        for c in holes.centers((-1.0, 1.0))[:, 0]:
            assert np.min(np.abs(pts - c)) <= g.h / 2 + 1e-12

    def test_interior_touching_box_rejected(self):
        g = domain.build_grid(1, 4.0, 64, "zero-exterior")
        with pytest.raises(ValueError):
            domain.mask_domain(g, (-4.0, 1.0))

    def test_mask_json_roundtrip(self):
        g = domain.build_grid(1, 4.0, 128, "zero-exterior")
        holes = domain.HoleFamily(1, 0.125, ("power", 1.0, 3.0))
        m = domain.mask_domain(g, (-1.0, 1.0), holes)
        m2 = domain.DomainMask.from_dict(json.loads(domain.to_json(m)))
        np.testing.assert_array_equal(m.labels, m2.labels)


class TestHoleMeasure:
    def test_empty(self):
        g = domain.build_grid(1, 4.0, 64, "zero-exterior")
        assert domain.hole_measure(domain.mask_domain(g, (-1.0, 1.0))) == 0.0

    def test_snapped_count_times_h(self):
        # 8 point-snapped holes at h = 1/64: radius must sit below h/2
        g = domain.build_grid(1, 4.0, 512, "zero-exterior")
        holes = domain.HoleFamily(1, 0.25, ("power", 1.0, 4.0))  # a = 1/256
        m = domain.mask_domain(g, (-1.0, 1.0), holes)
        assert domain.hole_measure(m) == pytest.approx(8.0 / 64.0)

    def test_sweep_decreasing_on_resolving_grid(self):
        # resolve a = eps^3 down to eps = 1/16: h <= 2 a  ->  N = 16384
        g = domain.build_grid(1, 4.0, 16384, "zero-exterior")
        measures = []
        for eps in (0.25, 0.125, 0.0625):
            holes = domain.HoleFamily(1, eps, ("power", 1.0, 3.0))
            measures.append(domain.hole_measure(domain.mask_domain(g, (-1.0, 1.0), holes)))
        assert measures[0] > measures[1] > measures[2]

    def test_monotone_under_radius_shrinkage(self):
        g = domain.build_grid(1, 4.0, 16384, "zero-exterior")
        big = domain.HoleFamily(1, 0.25, ("power", 1.0, 2.0))
        small = domain.HoleFamily(1, 0.25, ("power", 1.0, 3.0))
        m_big = domain.hole_measure(domain.mask_domain(g, (-1.0, 1.0), big))
        m_small = domain.hole_measure(domain.mask_domain(g, (-1.0, 1.0), small))
        assert m_big >= m_small

    def test_exponential_rule(self):
        holes = domain.HoleFamily(1, 0.25, ("exponential", 1.0, 2.0))
        assert holes.radius() == pytest.approx(math.exp(-16.0))


class TestEffectiveLimits:
    def test_constant(self):
        assert domain.h_limit_1d(domain.constant_profile(2.5)) == pytest.approx(2.5, abs=1e-12)

    def test_sin_harmonic_mean_is_sqrt3(self):
        a_star = domain.h_limit_1d(domain.sin_profile(2.0))
        assert a_star == pytest.approx(SQRT3, abs=1e-10)

    def test_piecewise(self):
        a = lambda y: 1.0 if y < 0.5 else 3.0
        assert domain.h_limit_1d(a, breakpoints=(0.5,)) == pytest.approx(1.5, abs=1e-12)

    @pytest.mark.parametrize("m", [1.5, 2.0, 3.0])
    def test_harmonic_below_arithmetic(self, m):
        p = domain.sin_profile(m)
        harm = domain.h_limit_1d(p)
        arith = domain.arithmetic_mean(p)
        assert harm <= arith <= p.bounds[1]

    def test_laminate_identity(self):
        np.testing.assert_allclose(
            domain.h_limit_laminate(domain.constant_profile(1.0), domain.constant_profile(1.0)),
            np.eye(2), atol=1e-12)

    def test_laminate_sin_by_one(self):
        A = domain.h_limit_laminate(domain.sin_profile(2.0), domain.constant_profile(1.0))
        np.testing.assert_allclose(A, np.diag([SQRT3, 1.0]), atol=1e-10)

    def test_laminate_one_by_sin(self):
        A = domain.h_limit_laminate(domain.constant_profile(1.0), domain.sin_profile(2.0))
        np.testing.assert_allclose(A, np.diag([1.0, 2.0]), atol=1e-10)
