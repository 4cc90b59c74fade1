"""Polynomial basis families and radial weight functions for the MLS closures."""

from dataclasses import dataclass
import enum

import numpy as np

from .errors import ZeroDistancePower

# Monomials as (x-power, y-power) in the conventional printed order of each family.
_MONOMIALS = {
    "linear": [(0, 0), (1, 0), (0, 1)],
    "bilinear": [(0, 0), (1, 0), (0, 1), (1, 1)],
    "quadratic": [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)],
    "incomplete_quartic": [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1), (0, 2), (1, 2), (2, 2)],
    "cubic": [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)],
    "quartic": [
        (0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3),
        (4, 0), (3, 1), (2, 2), (1, 3), (0, 4),
    ],
    "bicubic": [(i, j) for j in range(4) for i in range(4)],
}


class BasisFamily(enum.Enum):
    LINEAR = "linear"
    BILINEAR = "bilinear"
    QUADRATIC = "quadratic"
    INCOMPLETE_QUARTIC = "incomplete_quartic"
    CUBIC = "cubic"
    QUARTIC = "quartic"
    BICUBIC = "bicubic"

    @property
    def exponents(self):
        return _MONOMIALS[self.value]

    @property
    def m(self):
        return len(_MONOMIALS[self.value])

    @classmethod
    def parse(cls, name):
        key = name.strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"iq": "incomplete_quartic", "incompletequartic": "incomplete_quartic"}
        return cls(aliases.get(key, key))


def eval_basis(family, x, y):
    """Monomial vector of ``family`` at ``(x, y)``.

    Scalar inputs give shape ``(m,)``; array inputs give ``(..., m)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xp = [np.ones_like(x), x, x * x, x * x * x, x * x * x * x]
    yp = [np.ones_like(y), y, y * y, y * y * y, y * y * y * y]
    cols = [xp[a] * yp[b] for a, b in family.exponents]
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


@dataclass(frozen=True)
class CubicSpline:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def support(self):
        return self.beta


@dataclass(frozen=True)
class Cosine:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def support(self):
        return self.beta


@dataclass(frozen=True)
class PowerOfDistance:
    p: float

    # weight at zero distance is replaced by the value at this radius
    R_CAP = 1e-6

    @property
    def support(self):
        return np.inf


WeightSpec = CubicSpline | Cosine | PowerOfDistance


def _spline(q):
    inner = 1.0 - 6.0 * q**2 + 6.0 * q**3
    outer = 2.0 - 6.0 * q + 6.0 * q**2 - 2.0 * q**3
    return np.where(q <= 0.5, inner, np.where(q <= 1.0, outer, 0.0))


def _cosine(q):
    return np.where(q <= 1.0, 0.5 * (1.0 + np.cos(np.pi * np.minimum(q, 1.0))), 0.0)


def eval_weight(spec, r_s, cap_zero=False):
    """Weight at normalized radius ``r_s`` (scalar or array).

    ``PowerOfDistance`` is singular at zero: by default this raises
    :class:`ZeroDistancePower`; with ``cap_zero=True`` zero radii are
    evaluated at ``PowerOfDistance.R_CAP`` instead.
    """
    r = np.asarray(r_s, dtype=float)
    if np.any(r < 0):
        raise ValueError("normalized radius must be non-negative")
    if isinstance(spec, CubicSpline):
        out = _spline(r / spec.beta)
    elif isinstance(spec, Cosine):
        out = _cosine(r / spec.beta)
    elif isinstance(spec, PowerOfDistance):
        if np.any(r == 0):
            if not cap_zero:
                raise ZeroDistancePower("power-of-distance weight is unbounded at r_s = 0")
            r = np.where(r == 0, spec.R_CAP, r)
        out = r**spec.p
    else:
        raise TypeError(f"unknown weight spec {spec!r}")
    return float(out) if out.ndim == 0 else out
