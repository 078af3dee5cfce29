import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axisym_fbp.profiles import (
    STOKES_HI,
    STOKES_LO,
    BlowupProfile,
    ConjugatePotential,
    PolarPoint,
    axis_parabolic_eval,
    conjugate_check,
    determine_garabedian_constant,
    from_polar,
    laplacian_5pt,
    to_polar,
    weighted_divergence,
)
from axisym_fbp.special_functions import cone_angle

C0 = 0.29806621335372396
STEPS = (1 / 64, 1 / 128, 1 / 256)


def _box(x_lo, x_hi, y_lo, y_hi, h):
    x = np.arange(x_lo - h, x_hi + 1.5 * h, h)
    y = np.arange(y_lo - h, y_hi + 1.5 * h, h)
    return x, y, *np.meshgrid(x, y, indexing="ij")


def _orders(errs):
    e = np.asarray(errs)
    return np.log2(e[:-1] / e[1:])


@given(r=st.floats(1e-3, 10.0), th=st.floats(0.0, 2 * math.pi - 1e-9))
def test_polar_round_trip(r, th):
    x, y = from_polar(r, th)
    r2, th2 = to_polar(x, y)
    assert r2 == pytest.approx(r, rel=1e-12)
    assert th2 == pytest.approx(th, abs=1e-9)
    p = PolarPoint.from_xy(x, y)
    assert p.to_xy() == pytest.approx((x, y), abs=1e-12)


def test_polar_convention_theta_from_plus_y():
    assert to_polar(0.0, 1.0)[1] == pytest.approx(0.0)
    assert to_polar(1.0, 0.0)[1] == pytest.approx(math.pi / 2)
    assert to_polar(0.0, -1.0)[1] == pytest.approx(math.pi)


class TestStokes:
    prof = BlowupProfile.stokes(1.0)

    def test_harmonic_second_order(self):
        errs = []
        for h in STEPS:
            x, y, X, Y = _box(0.95, 1.05, -0.5, -0.3, h)
            errs.append(np.max(np.abs(laplacian_5pt(self.prof.values(X, Y), h))))
        assert all(o > 1.9 for o in _orders(errs)), errs

    @pytest.mark.parametrize("theta", [STOKES_LO, STOKES_HI])
    def test_bernoulli_on_free_rays(self, theta):
        r = np.linspace(0.01, 0.5, 50)
        x, y = 1.0 + r * np.sin(theta), r * np.cos(theta)
        gx, gy = self.prof.gradients(x, y)
        ratio = (gx * gx + gy * gy) / (-1.0 * y)
        assert np.max(np.abs(ratio - 1.0)) <= 1e-8

    def test_support_is_the_120_degree_cone(self):
        th = np.linspace(0, 2 * math.pi, 721)[:-1]
        x, y = 1.0 + 0.3 * np.sin(th), 0.3 * np.cos(th)
        v = self.prof.values(x, y)
        inside = (th > STOKES_LO + 1e-9) & (th < STOKES_HI - 1e-9)
        assert np.all(v[inside] > 0)
        assert np.all(np.abs(v[~inside]) <= 1e-15)
        assert self.prof.support_rays() == (STOKES_LO, STOKES_HI)

    def test_homogeneity_and_scaling_in_x0(self):
        p2 = BlowupProfile.stokes(2.0)
        x, y = 0.1, -0.2
        v1 = self.prof.values(1.0 + x, y)
        assert self.prof.values(1.0 + 4 * x, 4 * y) == pytest.approx(8.0 * v1, rel=1e-13)
        assert p2.values(2.0 + x, y) == pytest.approx(2.0 * v1, rel=1e-13)

    def test_gradient_matches_differences(self):
        x, y, h = 1.03, -0.2, 1e-6
        gx, gy = self.prof.gradients(x, y)
        v = self.prof.values
        assert float(gx) == pytest.approx((v(x + h, y) - v(x - h, y)) / (2 * h), rel=1e-7)
        assert float(gy) == pytest.approx((v(x, y + h) - v(x, y - h)) / (2 * h), rel=1e-7)

    def test_rejects_bad_x0(self):
        with pytest.raises(ValueError):
            BlowupProfile.stokes(0.0)


class TestGarabedian:
    prof = BlowupProfile.garabedian()

    def test_derived_constant(self):
        assert determine_garabedian_constant() == pytest.approx(C0, rel=1e-13)
        assert self.prof.C0 == pytest.approx(C0, rel=1e-13)

    def test_weighted_equation_second_order(self):
        errs = []
        for h in STEPS:
            x, y, X, Y = _box(0.2, 0.4, 0.1, 0.4, h)
            errs.append(np.max(np.abs(weighted_divergence(self.prof.values(X, Y), x, h))))
        assert all(o > 1.9 for o in _orders(errs)), errs

    def test_bernoulli_on_cone(self):
        ts = cone_angle().theta_star
        r = np.linspace(0.01, 1.0, 60)
        x, y = r * math.sin(ts), r * math.cos(ts)
        gx, gy = self.prof.gradients(x, y)
        assert np.all(np.abs(gx * gx + gy * gy + x * x * y) <= 1e-8 * r**3)

    def test_nonnegative_and_supported_inside_cone(self):
        ts = cone_angle().theta_star
        th = np.linspace(0.0, math.pi, 181)
        v = self.prof.values(0.5 * np.sin(th), 0.5 * np.cos(th))
        assert np.all(v >= 0)
        assert np.all(v[(th > 1e-6) & (th < ts - 1e-6)] > 0)
        assert np.all(v[th > ts + 1e-6] == 0)

    def test_conjugate_potential_second_order(self):
        errs = [conjugate_check(self.prof, h) for h in (1e-2, 5e-3, 2.5e-3)]
        assert all(o > 1.9 for o in _orders(errs))
        assert ConjugatePotential(self.prof).amplitude == pytest.approx(2.5 * C0)


class TestAxis:
    def test_exact_relations(self):
        p = BlowupProfile.axis(C=1.7, y0=-1.0)
        x = np.linspace(0.0, 1.0, 11)
        y = np.linspace(-2.0, 0.0, 11)
        X, Y = np.meshgrid(x, y, indexing="ij")
        assert np.array_equal(p.values(X, Y), 1.7 * X * X)
        gx, gy = p.gradients(X, Y)
        assert np.array_equal(gx, 3.4 * X)
        assert np.all(gy == 0)
        # div((1/x) grad psi) = d/dx (2 C) = 0, exactly on the discrete level too
        h = 0.1
        xi = np.arange(1, 12) * h
        U = 1.7 * xi[:, None] ** 2 + 0 * y[None, :]
        assert np.max(np.abs(weighted_divergence(U, xi, h))) < 1e-12
        phi = ConjugatePotential(p)
        assert phi.values(0.3, -0.2) == pytest.approx(2 * 1.7 * (-0.2 + 1.0))
        assert axis_parabolic_eval(1.7, 0.5) == pytest.approx(1.7 * 0.25)
        assert p.center == (0.0, -1.0)
        assert p.kappa == 2.0

    def test_rejects_nonpositive_c(self):
        with pytest.raises(ValueError):
            BlowupProfile.axis(C=0.0)


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(0.1, 8.0), r=st.floats(0.05, 0.5), th=st.floats(0.05, 3.0))
def test_bubble_homogeneity(lam, r, th):
    p = BlowupProfile.garabedian()
    x, y = r * math.sin(th), r * math.cos(th)
    assert p.values(lam * x, lam * y) == pytest.approx(lam**2.5 * p.values(x, y), rel=1e-10, abs=1e-300)
