"""Reproducing kernels constrained to homogeneous-Helmholtz solutions.

The diffuse-field kernel is j0(k |r1 - r2|). The directional variant adds a
prior source direction eta with weight rho and evaluates

    kappa(r1, r2) = j0( sqrt( (i rho eta - k d)^T (i rho eta - k d) ) ),
    d = r1 - r2,

where j0 is extended to complex arguments through sin(z)/z. Because j0 is
even and entire, the square-root branch does not matter; we evaluate it from
the squared argument directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_positions, check_wavenumber

__all__ = [
    "KernelSpec",
    "j0_complex",
    "kernel_eval",
    "kernel_matrix",
    "kernel_cross_vector",
    "gram_matrix",
]


@dataclass(frozen=True)
class KernelSpec:
    """Kernel parameters: wavenumber, prior weight rho and prior direction.

    rho = 0 selects the diffuse kernel; rho > 0 requires a unit prior
    direction vector.
    """

    k: float
    rho: float = 0.0
    eta: tuple[float, float, float] | None = None

    def __post_init__(self):
        check_wavenumber(self.k)
        if self.rho < 0.0:
            raise ValueError("rho must be non-negative")
        if self.rho > 0.0:
            if self.eta is None:
                raise ValueError("a prior direction is required when rho > 0")
            eta = np.asarray(self.eta, dtype=float)
            if eta.shape != (3,) or abs(np.linalg.norm(eta) - 1.0) > 1e-9:
                raise ValueError("eta must be a unit 3-vector")
            object.__setattr__(self, "eta", tuple(eta))


def j0_complex(z2):
    """j0 evaluated from its squared argument: sin(sqrt(z2))/sqrt(z2).

    Small arguments (|z| < 1e-4) switch to the even power series
    1 - z2/6 + z2^2/120 - z2^3/5040 to avoid cancellation.
    """
    z2 = np.asarray(z2, dtype=complex)
    small = np.abs(z2) < 1e-8  # |z| < 1e-4
    out = np.empty_like(z2)
    zs = np.sqrt(np.where(small, 1.0, z2))
    out = np.where(small, 1.0 - z2 / 6.0 + z2 * z2 / 120.0 - z2**3 / 5040.0,
                   np.sin(zs) / zs)
    return out


def kernel_matrix(spec: KernelSpec, X1, X2) -> np.ndarray:
    """Pairwise kernel evaluations, shape (len(X1), len(X2)).

    Diffuse kernels return a real-as-complex matrix; directional kernels are
    genuinely complex with kappa(r1, r2) = conj(kappa(r2, r1)).
    """
    X1 = check_positions(X1, "X1")
    X2 = check_positions(X2, "X2")
    diff = X1[:, None, :] - X2[None, :, :]
    if spec.rho == 0.0:
        kd = spec.k * np.linalg.norm(diff, axis=2)
        return np.sinc(kd / np.pi).astype(complex)
    eta = np.asarray(spec.eta, dtype=float)
    # squared argument of j0: (i rho eta - k d).(i rho eta - k d)
    z2 = (
        -spec.rho**2
        - 2j * spec.rho * spec.k * (diff @ eta)
        + spec.k**2 * np.sum(diff * diff, axis=2)
    )
    return j0_complex(z2)


def kernel_eval(spec: KernelSpec, r1, r2) -> complex:
    """Scalar kernel evaluation kappa(r1, r2)."""
    return complex(kernel_matrix(spec, r1, r2)[0, 0])


def kernel_cross_vector(spec: KernelSpec, r, mics) -> np.ndarray:
    """Vector of kernel evaluations between one point and the microphones."""
    return kernel_matrix(spec, r, mics)[0]


def gram_matrix(spec: KernelSpec, mics) -> np.ndarray:
    """Hermitian M x M Gram matrix of the kernel at the microphone positions."""
    mics = check_positions(mics, "mics")
    K = kernel_matrix(spec, mics, mics)
    return 0.5 * (K + K.conj().T)
