import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, special

from ibmdiff.analytics import (
    EarlyTimeUnsupported,
    bessel_j0,
    bessel_j0_j1,
    bessel_j1,
    c_bounded,
    c_free,
    diffusion_length,
    find_j1_roots,
    null_period,
)
from ibmdiff.errors import RootCountUnreachable

UM, US, D = 1e-6, 1e-6, 1e-10
R = 0.5 * UM


def test_bessel_at_zero():
    assert bessel_j0(0.0) == 1.0 and bessel_j1(0.0) == 0.0


def test_bessel_against_mpmath():
    xs = np.concatenate([np.linspace(0, 30, 601), np.geomspace(30, 1e4, 300)])
    j0, j1 = bessel_j0_j1(xs)
    ref0 = np.array([float(mpmath.besselj(0, x)) for x in xs])
    ref1 = np.array([float(mpmath.besselj(1, x)) for x in xs])
    assert np.max(np.abs(j0 - ref0)) <= 1e-14
    assert np.max(np.abs(j1 - ref1)) <= 1e-14


def test_bessel_region_seams():
    for x in (4.0, 25.0):
        for dx in (-1e-12, 0.0, 1e-12):
            assert abs(bessel_j0(x + dx) - special.j0(x + dx)) < 1e-14
            assert abs(bessel_j1(x + dx) - special.j1(x + dx)) < 1e-14


def _bisect(f, lo, hi, n=200):
    flo = f(lo)
    for _ in range(n):
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0) == (flo > 0):
            lo, flo = mid, f(mid)
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_first_j0_zero():
    z = _bisect(lambda x: float(mpmath.besselj(0, x)), 2.0, 3.0, 60)
    assert abs(bessel_j0(z)) < 1e-12
    assert z == pytest.approx(2.404825557695773, abs=1e-12)


def test_derivative_identity():
    x = np.linspace(0.5, 20, 200)
    h = 1e-5
    d = (bessel_j0(x + h) - bessel_j0(x - h)) / (2 * h)
    assert np.max(np.abs(d + bessel_j1(x))) < 1e-8


def test_negative_argument_rejected():
    with pytest.raises(ValueError):
        bessel_j0(-1.0)


def test_j1_roots():
    oracle = _bisect(lambda x: float(mpmath.besselj(1, x)), 3.5, 4.0, 80)
    t = find_j1_roots(1.0, 60)
    assert t.roots[0] == pytest.approx(3.8317059702, abs=1e-8)
    assert abs(t.roots[0] - oracle) < 1e-12
    ref = np.array([float(mpmath.besseljzero(1, n)) for n in range(1, 61)])
    np.testing.assert_allclose(t.roots, ref, rtol=1e-14)
    assert np.all(np.abs(bessel_j1(t.roots)) < 1e-12)
    assert np.all(np.diff(t.roots) > 0)
    assert abs((t.roots[50] - t.roots[49]) - math.pi) < 1e-3
    scaled = find_j1_roots(R, 60)
    np.testing.assert_allclose(scaled.roots, t.roots / R, rtol=1e-12)
    assert 3.8 < R * scaled.roots[0] < 3.9


def test_root_cap():
    with pytest.raises(RootCountUnreachable):
        find_j1_roots(1.0, 10_001)


def test_steady_state():
    r = np.linspace(0, R, 11)
    res = c_bounded(r, 1.0, R, D)
    np.testing.assert_allclose(res.value, 1 / (math.pi * R * R), rtol=1e-12)
    assert not np.any(res.cancellation_flag)


@pytest.mark.parametrize("t", [30 * US, 100 * US])
def test_mass_conservation(t):
    f = lambda r: 2 * math.pi * r * float(c_bounded(r, t, R, D).value)  # noqa: E731
    mass, _ = integrate.quad(f, 0, R, limit=400, epsabs=0, epsrel=1e-12, points=[0.9 * R])
    assert mass == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("t", [60 * US, 100 * US])
def test_wall_flux(t):
    h = 1e-4 * R
    c = c_bounded(R - h * np.arange(5), t, R, D).value
    # fourth-order one-sided difference at r = R
    grad = (25 * c[0] - 48 * c[1] + 36 * c[2] - 16 * c[3] + 3 * c[4]) / (12 * h)
    assert abs(grad) < 1e-6 * c[0] / R


def test_wall_flux_series_at_30us():
    # term-wise radial derivative: -alpha * J1(r alpha) * exp(-D alpha^2 t) / J0(R alpha)^2
    t = 30 * US
    a = find_j1_roots(R, 400).roots
    terms = a * bessel_j1(R * a) * np.exp(-D * a * a * t) / bessel_j0(R * a) ** 2
    grad = -math.fsum(terms) / (math.pi * R * R)
    wall = c_bounded(R, t, R, D).value
    assert abs(grad) < 1e-6 * wall / R


def test_image_source_oracle():
    t = 30 * US
    res = c_bounded(R, t, R, D)
    assert not res.cancellation_flag
    approx = 2 * c_free(R, t, D)
    assert abs(res.value - approx) / approx < 0.10


@pytest.mark.parametrize("t", np.linspace(20, 100, 9) * US)
def test_reflection_adds_mass_at_wall(t):
    assert c_bounded(R, t, R, D).value >= c_free(R, t, D)


def test_early_time_flag():
    res = c_bounded(R, 5 * US, R, D)
    assert res.cancellation_flag
    with pytest.raises(EarlyTimeUnsupported):
        c_bounded(R, 5 * US, R, D, strict=True)
    assert not c_bounded(R, 30 * US, R, D).cancellation_flag


def test_center_value_matches_free_plane_early():
    t = 5 * US
    res = c_bounded(0.0, t, R, D)
    assert not res.cancellation_flag
    assert res.value == pytest.approx(c_free(0.0, t, D), rel=1e-12)


def test_bounded_rejects_outside_radius():
    with pytest.raises(ValueError):
        c_bounded(1.1 * R, 30 * US, R, D)
    with pytest.raises(ValueError):
        c_bounded(0.0, 0.0, R, D)


def test_c_free():
    t = 30 * US
    peak = 1 / (4 * math.pi * D * t)
    assert c_free(0.0, t, D) == pytest.approx(peak)
    L = diffusion_length(t, D)
    assert c_free(L, t, D) == pytest.approx(peak / math.e)
    mass, _ = integrate.quad(lambda r: 2 * math.pi * r * c_free(r, t, D), 0, 10 * L, epsrel=1e-12)
    assert mass == pytest.approx(1.0, abs=1e-8)


def test_diffusion_length():
    assert diffusion_length(1 * US, D) == pytest.approx(0.02 * UM)
    assert diffusion_length(0.0, D) == 0.0
    assert diffusion_length(4 * US, D) == pytest.approx(2 * diffusion_length(1 * US, D))
    with pytest.raises(ValueError):
        diffusion_length(-1.0, D)


def test_null_period():
    assert null_period(0.5 * UM, 0.01 * UM, 0.1 * US) == pytest.approx(5 * US)
    assert null_period(0.0, 0.01 * UM, 0.1 * US) == 0.0
    assert null_period(0.5 * UM, 0.01 * UM, 0.05 * US) == pytest.approx(2.5 * US)
