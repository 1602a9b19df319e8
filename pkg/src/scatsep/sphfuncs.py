"""Spherical Bessel/Hankel functions and complex spherical harmonics.

Conventions used throughout the package:

* Spherical harmonics are orthonormal over the unit sphere, include the
  Condon-Shortley phase and use the e^{i mu phi} azimuthal factor, i.e.
  Y_{1,1}(theta, phi) = -sqrt(3/(8 pi)) sin(theta) e^{i phi}.
* theta is the zenith (polar) angle in [0, pi], phi the azimuth.
* The Hankel function is of the second kind, h2 = j - i*y, which is the
  outgoing radial function under the e^{+i omega t} time convention.

Angular derivatives of the harmonics are evaluated with the recurrence

    dY_{nu,mu}/dtheta = mu*cot(theta)*Y_{nu,mu}
                        + sqrt((nu-mu)(nu+mu+1)) e^{-i phi} Y_{nu,mu+1},

where the second term is dropped for mu = nu (its factor vanishes), and

    dY_{nu,mu}/dphi = i*mu*Y_{nu,mu}.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import special

__all__ = [
    "EPS_POLE",
    "ModeIndex",
    "mode_orders_degrees",
    "num_modes",
    "spherical_j",
    "spherical_y",
    "spherical_h2",
    "sph_harmonic",
    "sph_harmonic_dtheta",
    "sph_harmonic_dphi",
]

# cot(theta) in the dtheta recurrence is a 0*inf limit at the poles; below
# this sin(theta) threshold the naive formula is meaningless.
EPS_POLE = 1e-9


class ModeIndex(NamedTuple):
    """Order/degree pair (nu, mu) of a spherical-harmonic mode.

    Modes are stored flat in order nu**2 + nu + mu, which enumerates
    (0,0), (1,-1), (1,0), (1,1), (2,-2), ... bijectively.
    """

    nu: int
    mu: int

    @property
    def flat(self) -> int:
        return self.nu * self.nu + self.nu + self.mu

    @classmethod
    def from_flat(cls, n: int) -> "ModeIndex":
        nu = math.isqrt(n)
        return cls(nu, n - nu * nu - nu)

    def validate(self) -> "ModeIndex":
        if self.nu < 0 or abs(self.mu) > self.nu:
            raise ValueError(f"invalid mode index (nu={self.nu}, mu={self.mu})")
        return self


def num_modes(max_order: int) -> int:
    """Number of modes with nu <= max_order, i.e. (max_order + 1)**2."""
    return (max_order + 1) ** 2


def mode_orders_degrees(max_order: int) -> tuple[np.ndarray, np.ndarray]:
    """Arrays of orders and degrees for all modes up to max_order, flat-ordered."""
    orders = []
    degrees = []
    for nu in range(max_order + 1):
        mus = np.arange(-nu, nu + 1)
        degrees.append(mus)
        orders.append(np.full_like(mus, nu))
    return np.concatenate(orders), np.concatenate(degrees)


def spherical_j(nu, x, derivative: bool = False):
    """Spherical Bessel function j_nu(x) (or its derivative) for x >= 0.

    Finite for every nu >= 0 and x >= 0; scipy evaluates the small-x /
    large-order regime through a stable downward recurrence.
    """
    return special.spherical_jn(nu, x, derivative=derivative)


def spherical_y(nu, x, derivative: bool = False):
    """Spherical Bessel function of the second kind y_nu(x), x > 0."""
    return special.spherical_yn(nu, x, derivative=derivative)


def spherical_h2(nu, x, derivative: bool = False):
    """Spherical Hankel function of the second kind, h2 = j - i*y.

    Diverges at x = 0; a zero argument raises rather than returning inf.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("spherical_h2 requires x > 0 (divergent at the origin)")
    return special.spherical_jn(nu, x, derivative) - 1j * special.spherical_yn(
        nu, x, derivative
    )


def sph_harmonic(nu: int, mu: int, theta, phi):
    """Orthonormal complex spherical harmonic Y_{nu,mu}(theta, phi).

    Condon-Shortley phase included; satisfies
    Y_{nu,-mu} = (-1)^mu * conj(Y_{nu,mu}).
    """
    ModeIndex(nu, mu).validate()
    return special.sph_harm_y(nu, mu, np.asarray(theta), np.asarray(phi))


def sph_harmonic_dtheta(nu: int, mu: int, theta, phi):
    """Zenith-angle derivative of Y_{nu,mu} via the mu+1 recurrence.

    Raises for angles within the pole guard band (sin(theta) < EPS_POLE).
    """
    ModeIndex(nu, mu).validate()
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    sin_t = np.sin(theta)
    if np.any(np.abs(sin_t) < EPS_POLE):
        raise ValueError(
            "sph_harmonic_dtheta evaluated too close to a pole "
            f"(|sin(theta)| < {EPS_POLE:g})"
        )
    out = mu * (np.cos(theta) / sin_t) * special.sph_harm_y(nu, mu, theta, phi)
    if mu != nu:
        out = out + np.sqrt((nu - mu) * (nu + mu + 1)) * np.exp(
            -1j * phi
        ) * special.sph_harm_y(nu, mu + 1, theta, phi)
    return out


def sph_harmonic_dphi(nu: int, mu: int, theta, phi):
    """Azimuth derivative of Y_{nu,mu}: i * mu * Y_{nu,mu}."""
    ModeIndex(nu, mu).validate()
    return 1j * mu * special.sph_harm_y(nu, mu, np.asarray(theta), np.asarray(phi))
