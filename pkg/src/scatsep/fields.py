"""Wave-function evaluators, measurement matrices and ground-truth fields.

All evaluators are pure functions of their arguments and vectorize over
positions given as arrays of shape (n, 3). The scattering expansion is
centered at the origin, which is also the center of the (optional) rigid
spherical scatterer used to synthesize experiments.

Sign conventions follow the e^{+i omega t} time dependence: outgoing waves
carry h2 radial factors and the free-field point source is
e^{-i k d} / (4 pi d).
"""

from __future__ import annotations

import numpy as np
from scipy import special

from ._validation import check_positions, check_wavenumber
from .sphfuncs import (
    mode_orders_degrees,
    num_modes,
    spherical_h2,
    spherical_j,
    sph_harmonic,
    sph_harmonic_dphi,
    sph_harmonic_dtheta,
)

__all__ = [
    "cartesian_to_spherical",
    "spherical_to_cartesian",
    "interior_wavefunction",
    "exterior_wavefunction",
    "exterior_wavefunction_dtheta",
    "exterior_wavefunction_dphi",
    "expansion_matrix",
    "expansion_matrix_dtheta",
    "expansion_matrix_dphi",
    "point_source_field",
    "rigid_sphere_scattered_field",
    "rigid_sphere_scattered_field_dr",
    "oracle_truncation_order",
    "synthesize_measurements",
]

SQRT_4PI = np.sqrt(4.0 * np.pi)


# ---------------------------------------------------------------------------
# Coordinate conversions
# ---------------------------------------------------------------------------
def cartesian_to_spherical(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(n,3) Cartesian -> (radius, zenith theta in [0,pi], azimuth phi in [0,2pi)).

    The angles of the origin are returned as zero.
    """
    X = check_positions(X)
    r = np.linalg.norm(X, axis=1)
    safe_r = np.where(r > 0.0, r, 1.0)
    theta = np.arccos(np.clip(X[:, 2] / safe_r, -1.0, 1.0))
    phi = np.mod(np.arctan2(X[:, 1], X[:, 0]), 2.0 * np.pi)
    theta = np.where(r > 0.0, theta, 0.0)
    phi = np.where(r > 0.0, phi, 0.0)
    return r, theta, phi


def spherical_to_cartesian(r, theta, phi) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    sin_t = np.sin(theta)
    return np.stack(
        [r * sin_t * np.cos(phi), r * sin_t * np.sin(phi), r * np.cos(theta)], axis=-1
    )


# ---------------------------------------------------------------------------
# Spherical wave functions
# ---------------------------------------------------------------------------
def interior_wavefunction(nu: int, mu: int, k, X) -> np.ndarray:
    """Interior wave function sqrt(4 pi) j_nu(k r) Y_{nu,mu}(direction).

    Regular everywhere; the origin evaluates to 1 for the (0,0) mode and 0
    otherwise (the sqrt(4 pi) factor makes the (0,0) coefficient equal the
    pressure at the expansion center).
    """
    k = check_wavenumber(k)
    r, theta, phi = cartesian_to_spherical(X)
    return SQRT_4PI * spherical_j(nu, k * r) * sph_harmonic(nu, mu, theta, phi)


def exterior_wavefunction(nu: int, mu: int, k, X) -> np.ndarray:
    """Exterior (outgoing) wave function sqrt(4 pi) h2_nu(k r) Y_{nu,mu}.

    Singular at the origin; evaluation there raises.
    """
    k = check_wavenumber(k)
    r, theta, phi = cartesian_to_spherical(X)
    return SQRT_4PI * spherical_h2(nu, k * r) * sph_harmonic(nu, mu, theta, phi)


def exterior_wavefunction_dtheta(nu: int, mu: int, k, X) -> np.ndarray:
    """Zenith-angle partial derivative of the exterior wave function."""
    k = check_wavenumber(k)
    r, theta, phi = cartesian_to_spherical(X)
    return SQRT_4PI * spherical_h2(nu, k * r) * sph_harmonic_dtheta(nu, mu, theta, phi)


def exterior_wavefunction_dphi(nu: int, mu: int, k, X) -> np.ndarray:
    """Azimuth partial derivative of the exterior wave function."""
    k = check_wavenumber(k)
    r, theta, phi = cartesian_to_spherical(X)
    return SQRT_4PI * spherical_h2(nu, k * r) * sph_harmonic_dphi(nu, mu, theta, phi)


def _assemble_matrix(X, max_order: int, k, radial, angular) -> np.ndarray:
    X = check_positions(X)
    k = check_wavenumber(k)
    r, theta, phi = cartesian_to_spherical(X)
    if np.any(r <= 0.0):
        raise ValueError("positions must not coincide with the expansion center")
    orders, degrees = mode_orders_degrees(max_order)
    out = np.empty((X.shape[0], num_modes(max_order)), dtype=complex)
    radial_by_order = {nu: radial(nu, k * r) for nu in range(max_order + 1)}
    for n, (nu, mu) in enumerate(zip(orders, degrees)):
        out[:, n] = SQRT_4PI * radial_by_order[nu] * angular(int(nu), int(mu), theta, phi)
    return out


def expansion_matrix(mics, max_order: int, k) -> np.ndarray:
    """Measurement matrix of the scattering expansion.

    Entry (m, n) is the exterior wave function of flat mode n evaluated at
    microphone m; shape (M, (max_order+1)**2).
    """
    return _assemble_matrix(mics, max_order, k, spherical_h2, sph_harmonic)


def expansion_matrix_dtheta(mics, max_order: int, k) -> np.ndarray:
    """Entrywise d/dtheta of expansion_matrix (radius held fixed)."""
    return _assemble_matrix(mics, max_order, k, spherical_h2, sph_harmonic_dtheta)


def expansion_matrix_dphi(mics, max_order: int, k) -> np.ndarray:
    """Entrywise d/dphi of expansion_matrix."""
    return _assemble_matrix(mics, max_order, k, spherical_h2, sph_harmonic_dphi)


# ---------------------------------------------------------------------------
# Ground-truth fields
# ---------------------------------------------------------------------------
def point_source_field(source, k, X) -> np.ndarray:
    """Free-field monopole e^{-i k d} / (4 pi d) with d = |X - source|."""
    k = check_wavenumber(k)
    source = check_positions(source, "source")[0]
    X = check_positions(X)
    d = np.linalg.norm(X - source, axis=1)
    if np.any(d == 0.0):
        raise ValueError("field evaluated at the source position")
    return np.exp(-1j * k * d) / (4.0 * np.pi * d)


def point_source_field_gradient(source, k, X) -> np.ndarray:
    """Cartesian gradient of point_source_field, shape (n, 3)."""
    k = check_wavenumber(k)
    source = check_positions(source, "source")[0]
    X = check_positions(X)
    diff = X - source
    d = np.linalg.norm(diff, axis=1)
    if np.any(d == 0.0):
        raise ValueError("gradient evaluated at the source position")
    g = np.exp(-1j * k * d) / (4.0 * np.pi * d)
    return (g * (-1j * k - 1.0 / d) / d)[:, None] * diff


def oracle_truncation_order(k, r_max) -> int:
    """Truncation order ceil(k*r_max) + 20 used by the series oracles."""
    return int(np.ceil(k * float(r_max))) + 20


def _scattered_series(source, radius_a, k, X, derivative: bool, max_order, tail_tol):
    source = check_positions(source, "source")[0]
    X = check_positions(X)
    k = check_wavenumber(k)
    a = float(radius_a)
    if a < 0.0:
        raise ValueError("scatterer radius must be non-negative")
    if a == 0.0:
        return np.zeros(X.shape[0], dtype=complex)
    r_src = np.linalg.norm(source)
    if r_src <= a:
        raise ValueError("source lies inside the scatterer")
    r = np.linalg.norm(X, axis=1)
    if np.any(r < a * (1.0 - 1e-9)):
        raise ValueError("scattered field evaluated inside the scatterer")
    if max_order is None:
        max_order = oracle_truncation_order(k, max(a, r.max()))

    cos_gamma = np.clip((X @ source) / np.where(r > 0, r, 1.0) / r_src, -1.0, 1.0)
    orders = np.arange(max_order + 1)
    # Neumann condition on the sphere surface: j'_nu(ka) + c_nu h2'_nu(ka) = 0
    c = -spherical_j(orders, k * a, derivative=True) / spherical_h2(
        orders, k * a, derivative=True
    )
    h_src = spherical_h2(orders, k * r_src)

    out = np.zeros(X.shape[0], dtype=complex)
    tail = np.inf
    for nu in orders:
        if derivative:
            radial = k * spherical_h2(nu, k * r, derivative=True)
        else:
            radial = spherical_h2(nu, k * r)
        term = (2 * nu + 1) * c[nu] * h_src[nu] * radial * special.eval_legendre(
            nu, cos_gamma
        )
        out += term
        tail = np.max(np.abs(term)) / max(np.max(np.abs(out)), 1e-300)
    if tail > tail_tol:
        raise RuntimeError(
            f"scattered-field series not converged at order {max_order} "
            f"(relative tail {tail:.2e} > {tail_tol:g})"
        )
    return -1j * k / (4.0 * np.pi) * out


def rigid_sphere_scattered_field(
    source, radius_a, k, X, max_order=None, tail_tol: float = 1e-12
) -> np.ndarray:
    """Field scattered by a sound-hard sphere of radius radius_a at the origin.

    The incident field is the point source at `source`; the expansion
    coefficients enforce a vanishing radial derivative of the total field on
    the sphere surface. The series over orders is truncated at `max_order`
    (default: ceil(k*r_max) + 20) and the last term must contribute less
    than `tail_tol` of the partial sum.
    """
    return _scattered_series(source, radius_a, k, X, False, max_order, tail_tol)


def rigid_sphere_scattered_field_dr(
    source, radius_a, k, X, max_order=None, tail_tol: float = 1e-12
) -> np.ndarray:
    """Radial derivative of rigid_sphere_scattered_field (same conventions)."""
    return _scattered_series(source, radius_a, k, X, True, max_order, tail_tol)


def synthesize_measurements(
    mics, source, scatterer_radius, k, snr_db=None, seed=None
) -> np.ndarray:
    """Simulated microphone pressures: incident + scattered + sensor noise.

    Noise is i.i.d. circular complex Gaussian, scaled so that the ratio of
    the array-averaged signal power to the per-microphone noise power equals
    snr_db. snr_db=None (or inf) disables noise. Deterministic for a given
    seed (any value accepted by numpy.random.default_rng).
    """
    mics = check_positions(mics, "mics")
    signal = point_source_field(source, k, mics)
    if scatterer_radius:
        signal = signal + rigid_sphere_scattered_field(source, scatterer_radius, k, mics)
    if snr_db is None or np.isinf(snr_db):
        return signal
    noise_power = np.mean(np.abs(signal) ** 2) / 10.0 ** (float(snr_db) / 10.0)
    rng = np.random.default_rng(seed)
    scale = np.sqrt(noise_power / 2.0)
    noise = scale * (
        rng.standard_normal(len(mics)) + 1j * rng.standard_normal(len(mics))
    )
    return signal + noise
