"""Analytical references: Bessel J0/J1, J1 roots, bounded-disc and free-plane solutions.

All evaluation is in double precision.  The bounded-disc eigen-series
cancels catastrophically at early times near the wall, so every series
result carries a ``cancellation_flag`` instead of silently losing digits.
"""

from dataclasses import dataclass
import functools
import math

import numpy as np
from scipy.optimize import brentq

from .errors import EarlyTimeUnsupported, RootCountUnreachable

EPS = np.finfo(float).eps
SERIES_MAX = 4.0
ASYMPTOTIC_MIN = 25.0
MILLER_START = 64
MAX_ROOTS = 10_000


def _series(x):
    q = -0.25 * x * x
    t0 = np.ones_like(x)
    t1 = np.ones_like(x)
    s0 = t0.copy()
    s1 = t1.copy()
    for k in range(1, 30):
        t0 = t0 * q / (k * k)
        t1 = t1 * q / (k * (k + 1))
        s0 = s0 + t0
        s1 = s1 + t1
    return s0, 0.5 * x * s1


def _miller(x):
    # backward recurrence J_{n-1} = (2n/x) J_n - J_{n+1}, normalized by J0 + 2*sum J_2k = 1
    hi = np.zeros_like(x)
    cur = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    j0 = j1 = None
    for n in range(MILLER_START, 0, -1):
        lower = (2.0 * n / x) * cur - hi
        hi, cur = cur, lower
        if (n - 1) % 2 == 0 and n - 1 > 0:
            norm = norm + 2.0 * cur
        if n - 1 == 1:
            j1 = cur
    j0 = cur
    norm = norm + j0
    return j0 / norm, j1 / norm


def _hankel_pq(x, nu):
    mu = 4.0 * nu * nu
    z = 8.0 * x
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    k = 1
    while k < 40:
        term = term * (mu - (2 * k - 1) ** 2) / (k * z)
        if k % 2:
            q = q + term if (k // 2) % 2 == 0 else q - term
        else:
            p = p - term if (k // 2) % 2 == 1 else p + term
        if np.all(np.abs(term) < 1e-18):
            break
        k += 1
    return p, q


def _asymptotic(x):
    c, s = np.cos(x), np.sin(x)
    amp = np.sqrt(2.0 / (np.pi * x)) / math.sqrt(2.0)
    p0, q0 = _hankel_pq(x, 0.0)
    p1, q1 = _hankel_pq(x, 1.0)
    # cos/sin of x - pi/4 and x - 3pi/4 expanded to avoid reducing a shifted argument
    j0 = amp * (p0 * (c + s) - q0 * (s - c))
    j1 = amp * (p1 * (s - c) + q1 * (s + c))
    return j0, j1


def bessel_j0_j1(x):
    """``(J0(x), J1(x))`` for ``x >= 0`` (scalar or array)."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("bessel evaluation implemented for x >= 0")
    flat = xa.reshape(-1)
    j0 = np.empty_like(flat)
    j1 = np.empty_like(flat)
    small = flat <= SERIES_MAX
    large = flat >= ASYMPTOTIC_MIN
    mid = ~(small | large)
    if small.any():
        j0[small], j1[small] = _series(flat[small])
    if mid.any():
        j0[mid], j1[mid] = _miller(flat[mid])
    if large.any():
        j0[large], j1[large] = _asymptotic(flat[large])
    if xa.ndim == 0:
        return float(j0[0]), float(j1[0])
    return j0.reshape(xa.shape), j1.reshape(xa.shape)


def bessel_j0(x):
    return bessel_j0_j1(x)[0]


def bessel_j1(x):
    return bessel_j0_j1(x)[1]


@dataclass(frozen=True)
class BesselRootTable:
    R: float
    roots: np.ndarray
    count: int


@functools.lru_cache(maxsize=None)
def _unit_j1_roots(n_roots):
    roots = np.empty(n_roots)
    for n in range(1, n_roots + 1):
        guess = (n + 0.25) * math.pi
        guess -= 3.0 / (8.0 * guess)
        lo, hi = guess - 0.5, guess + 0.5
        flo, fhi = bessel_j1(lo), bessel_j1(hi)
        if flo * fhi > 0:
            raise RootCountUnreachable(f"J1 root {n} not bracketed in [{lo}, {hi}]")
        x = brentq(bessel_j1, lo, hi, xtol=1e-15, rtol=4 * EPS, maxiter=200)
        # Newton polish: J1'(x) = J0(x) - J1(x)/x
        for _ in range(3):
            j0, j1 = bessel_j0_j1(x)
            if j1 == 0.0:
                break
            x -= j1 / (j0 - j1 / x)
        if abs(bessel_j1(x)) >= 1e-12:
            raise RootCountUnreachable(f"J1 root {n} did not converge (|J1| = {abs(bessel_j1(x)):.2e})")
        roots[n - 1] = x
    roots.setflags(write=False)
    return roots


def find_j1_roots(R, n_roots):
    """First ``n_roots`` positive ``alpha`` with ``J1(R * alpha) = 0``."""
    if n_roots < 1:
        raise ValueError("n_roots must be >= 1")
    if n_roots > MAX_ROOTS:
        raise RootCountUnreachable(f"{n_roots} roots requested; cap is {MAX_ROOTS}")
    if not R > 0:
        raise ValueError("R must be positive")
    # tables are built in power-of-two sizes so nearby requests share one cache entry
    size = min(MAX_ROOTS, 1 << max(0, n_roots - 1).bit_length())
    return BesselRootTable(R=R, roots=_unit_j1_roots(size)[:n_roots] / R, count=n_roots)


@dataclass(frozen=True)
class SeriesResult:
    value: object
    terms_used: int
    cancellation_flag: object
    max_term: object = None


def _roots_needed(R, D, t):
    target = math.log(1e3 / EPS) + 10.0
    return max(4, math.ceil(R / math.pi * math.sqrt(target / (D * t))) + 4)


def c_bounded(r, t, R, D, tol=1e-6, strict=False):
    """Delta-release concentration on a disc of radius ``R`` with a reflecting wall.

    Returns a :class:`SeriesResult`; ``value`` and ``cancellation_flag``
    have the shape of ``r``.  The flag is set where the largest summed term
    times machine epsilon exceeds ``tol`` times the bracketed sum.  With
    ``strict=True`` a flagged result raises :class:`EarlyTimeUnsupported`.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    ra = np.asarray(r, dtype=float)
    if np.any(ra < 0) or np.any(ra > R * (1 + 1e-12)):
        raise ValueError("r must lie in [0, R]")
    flat = ra.reshape(-1)
    n_roots = _roots_needed(R, D, t)
    if n_roots > MAX_ROOTS:
        raise RootCountUnreachable(f"t = {t} needs {n_roots} roots; cap is {MAX_ROOTS}")
    alphas = find_j1_roots(R, n_roots).roots

    # Neumaier-compensated accumulation, vectorized over r
    total = np.ones_like(flat)
    comp = np.zeros_like(flat)
    biggest = np.ones_like(flat)
    used = 0
    for a in alphas:
        decay = math.exp(-D * a * a * t)
        if decay < 1e-3 * EPS * float(biggest.max()):
            break
        j0_wall = bessel_j0(R * a)
        term = decay * bessel_j0(flat * a) / (j0_wall * j0_wall)
        biggest = np.maximum(biggest, np.abs(term))
        s = total + term
        comp += np.where(np.abs(total) >= np.abs(term), (total - s) + term, (term - s) + total)
        total = s
        used += 1
    else:
        raise RootCountUnreachable("series did not meet its truncation rule within the root table")
    bracket = total + comp
    flag = biggest * EPS > tol * np.abs(bracket)
    value = bracket / (math.pi * R * R)
    if strict and np.any(flag):
        raise EarlyTimeUnsupported(f"c_bounded at t = {t} loses more than tol = {tol} to cancellation")
    if ra.ndim == 0:
        return SeriesResult(float(value[0]), used, bool(flag[0]), float(biggest[0]))
    return SeriesResult(value.reshape(ra.shape), used, flag.reshape(ra.shape), biggest.reshape(ra.shape))


def c_free(r, t, D):
    """Delta-release concentration on an unbounded plane."""
    if not t > 0:
        raise ValueError("t must be positive")
    r = np.asarray(r, dtype=float)
    out = np.exp(-(r * r) / (4.0 * D * t)) / (4.0 * math.pi * D * t)
    return float(out) if out.ndim == 0 else out


def diffusion_length(t, D):
    if t < 0:
        raise ValueError("t must be non-negative")
    return math.sqrt(4.0 * D * t)


def null_period(d, dx, dt):
    """Time for the one-cell-per-step lattice wavefront to travel ``d``."""
    if not (dx > 0 and dt > 0):
        raise ValueError("dx and dt must be positive")
    return d / (dx / dt)
