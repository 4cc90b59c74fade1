import numpy as np
import pytest

from ibmdiff.errors import ZeroDistancePower
from ibmdiff.kernels import BasisFamily, Cosine, CubicSpline, PowerOfDistance, eval_basis, eval_weight

SIZES = {"linear": 3, "bilinear": 4, "quadratic": 6, "incomplete_quartic": 9, "cubic": 10, "quartic": 15, "bicubic": 16}


@pytest.mark.parametrize("family", list(BasisFamily))
def test_rank(family):
    assert family.m == SIZES[family.value]
    assert len(set(family.exponents)) == family.m
    assert eval_basis(family, 0.3, -0.7)[0] == 1.0


def test_basis_examples():
    np.testing.assert_array_equal(eval_basis(BasisFamily.LINEAR, 0.0, 0.0), [1, 0, 0])
    np.testing.assert_array_equal(eval_basis(BasisFamily.QUADRATIC, 1.0, 1.0), np.ones(6))
    np.testing.assert_array_equal(
        eval_basis(BasisFamily.INCOMPLETE_QUARTIC, 2.0, 3.0), [1, 2, 4, 3, 6, 12, 9, 18, 36]
    )


def test_basis_nesting(rng):
    x, y = rng.normal(size=2)
    lin = eval_basis(BasisFamily.LINEAR, x, y)
    np.testing.assert_array_equal(eval_basis(BasisFamily.BILINEAR, x, y)[:3], lin)
    np.testing.assert_array_equal(eval_basis(BasisFamily.CUBIC, x, y)[:6], eval_basis(BasisFamily.QUADRATIC, x, y))


def test_basis_vectorized(rng):
    x, y = rng.normal(size=(2, 7, 3))
    out = eval_basis(BasisFamily.BICUBIC, x, y)
    assert out.shape == (7, 3, 16)
    np.testing.assert_array_equal(out[2, 1], eval_basis(BasisFamily.BICUBIC, x[2, 1], y[2, 1]))


def test_parse_aliases():
    assert BasisFamily.parse("IQ") is BasisFamily.INCOMPLETE_QUARTIC
    assert BasisFamily.parse("Incomplete-Quartic") is BasisFamily.INCOMPLETE_QUARTIC
    with pytest.raises(ValueError):
        BasisFamily.parse("sextic")


def test_weight_examples():
    assert eval_weight(CubicSpline(2.0), 0.0) == 1.0
    assert eval_weight(Cosine(2.0), 1.0) == pytest.approx(0.5)
    assert eval_weight(Cosine(2.0), 2.0) == pytest.approx(0.0, abs=1e-16)
    assert eval_weight(CubicSpline(2.0), 1.0) == pytest.approx(0.25)
    assert eval_weight(PowerOfDistance(-1.0), 2.0) == pytest.approx(0.5)
    assert eval_weight(CubicSpline(1.0), 1.5) == 0.0 and eval_weight(Cosine(1.0), 1.01) == 0.0


def test_spline_knot_continuity():
    inner = lambda q: 1 - 6 * q**2 + 6 * q**3  # noqa: E731
    outer = lambda q: 2 - 6 * q + 6 * q**2 - 2 * q**3  # noqa: E731
    assert abs(inner(0.5) - outer(0.5)) < 1e-12 and inner(0.5) == pytest.approx(0.25)
    d_inner = -12 * 0.5 + 18 * 0.25
    d_outer = -6 + 12 * 0.5 - 6 * 0.25
    assert abs(d_inner - d_outer) < 1e-12


@pytest.mark.parametrize("spec", [CubicSpline(2.75), Cosine(1.3)])
def test_monotone(spec):
    w = eval_weight(spec, np.linspace(0, spec.beta, 2001))
    assert np.all(np.diff(w) <= 1e-15) and np.all(w >= 0)


def test_power_zero_distance():
    with pytest.raises(ZeroDistancePower):
        eval_weight(PowerOfDistance(-2.0), 0.0)
    capped = eval_weight(PowerOfDistance(-2.0), np.array([0.0, 1.0]), cap_zero=True)
    assert capped[0] == pytest.approx(PowerOfDistance.R_CAP ** -2.0)
    assert capped[1] == 1.0


def test_weight_validation():
    with pytest.raises(ValueError):
        CubicSpline(0.0)
    with pytest.raises(ValueError):
        eval_weight(CubicSpline(1.0), -0.1)
