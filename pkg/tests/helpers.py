"""Shared numerical oracles for the test suite.

These deliberately avoid the code paths they are used to check: Bessel
values come from a high-precision series, derivatives from central finite
differences, and the Helmholtz test from a 7-point finite-difference
Laplacian.
"""

import numpy as np


def series_spherical_j(nu: int, x: float, terms: int = 50, dps: int = 50) -> float:
    """Taylor series of j_nu evaluated in mpmath arbitrary precision."""
    import mpmath as mp

    with mp.workdps(dps):
        x = mp.mpf(x)
        total = mp.mpf(0)
        for s in range(terms):
            num = (-(x * x) / 2) ** s
            den = mp.factorial(s) * mp.fac2(2 * nu + 2 * s + 1)
            total += num / den
        return float(total * x**nu)


def central_diff(fn, x0, step=1e-5):
    return (fn(x0 + step) - fn(x0 - step)) / (2.0 * step)


def fd_helmholtz_residual(field, k, points, h=1e-3):
    """Relative residual |lap(u) + k^2 u| / |k^2 u| by 7-point differences."""
    points = np.atleast_2d(points)
    u0 = field(points)
    lap = -6.0 * u0
    for axis in range(3):
        for sign in (+1.0, -1.0):
            shifted = points.copy()
            shifted[:, axis] += sign * h
            lap += field(shifted)
    lap /= h * h
    return np.abs(lap + k * k * u0) / np.abs(k * k * u0)


def uniform_sphere_angles(n, seed):
    rng = np.random.default_rng(seed)
    theta = np.arccos(1.0 - 2.0 * rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    return theta, phi
