"""Incident-field estimators.

Two estimators are provided, both sklearn-style (fit on microphone positions
and complex pressures, predict complex pressure at new positions):

* KernelRidgeFieldEstimator -- kernel ridge regression in the
  Helmholtz-constrained reproducing kernel space. Its weights solve
  (K + reg*I) alpha = s.

* ScatterSeparatedFieldEstimator -- joint fit of the kernel model for the
  incident field and a truncated exterior spherical-wave expansion for the
  field radiated by a scatterer inside the region. The pair
  (alpha, u) minimizes

      |s - K a - Phi u|^2 + reg_incident * a^H K a + reg_scatter * u^H W u,

  with W either the identity or the angular-smoothness quadratic form built
  from the angle derivatives of the expansion at the microphones.

The joint stationarity system is solved by eliminating alpha: a Cholesky
factorization of the Hermitian K + reg_incident*I reduces the problem to a
Hermitian solve for the scattering coefficients, followed by back
substitution. This yields the same pair as the one-shot block solve of the
coupled equations and remains well defined when W is singular (the
smoothness W always is: the monopole row vanishes). If the reduced system
itself is numerically singular, a small documented diagonal loading is
added to W and reported in the diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from sklearn.base import BaseEstimator

from ._validation import check_measurements, check_positions, check_wavenumber
from .fields import (
    expansion_matrix,
    expansion_matrix_dphi,
    expansion_matrix_dtheta,
)
from .kernels import KernelSpec, gram_matrix, kernel_matrix
from .sphfuncs import num_modes

__all__ = [
    "SingularSystemError",
    "JointDiagnostics",
    "weighting_matrix",
    "solve_kernel_ridge",
    "solve_joint_separation",
    "joint_objective",
    "stationarity_residual",
    "KernelRidgeFieldEstimator",
    "ScatterSeparatedFieldEstimator",
]

# Relative diagonal loading applied to a singular weighting matrix, and the
# squared Cholesky-pivot ratio below which the reduced system is treated as
# numerically singular.
W_LOADING_REL = 1e-10
_PIVOT_RATIO_SQ_MIN = 1e-12


class SingularSystemError(np.linalg.LinAlgError):
    """Joint system could not be solved.

    `reason` distinguishes a degenerate geometry (Gram factorization failed,
    e.g. coincident microphones) from a regularization pair that leaves the
    reduced scattering system singular even after diagonal loading.
    """

    def __init__(self, message: str, reason: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class JointDiagnostics:
    """Numerical bookkeeping of a joint solve."""

    loading_applied: bool
    loading_value: float


def weighting_matrix(mics, max_order: int, k) -> np.ndarray:
    """Angular-smoothness penalty W for the scattering coefficients.

    W = Dth^H Dth + Dph^H Dph, where Dth/Dph hold the theta/phi derivatives
    of the exterior expansion at the microphones, so u^H W u equals the sum
    over microphones of the squared angular-derivative magnitudes of the
    expanded field. Hermitian PSD; the (0,0)-mode row and column are zero.
    """
    d_theta = expansion_matrix_dtheta(mics, max_order, k)
    d_phi = expansion_matrix_dphi(mics, max_order, k)
    W = d_theta.conj().T @ d_theta + d_phi.conj().T @ d_phi
    return 0.5 * (W + W.conj().T)


def solve_kernel_ridge(K, s, reg: float) -> np.ndarray:
    """Solve (K + reg*I) alpha = s for Hermitian PSD K.

    Uses a Cholesky solve plus one step of iterative refinement; falls back
    to LU if the shifted matrix is not numerically positive definite.
    """
    if reg <= 0.0:
        raise ValueError("regularization must be positive")
    K = np.asarray(K)
    s = np.asarray(s, dtype=complex)
    A = K + reg * np.eye(K.shape[0])
    try:
        cf = cho_factor(A)
        alpha = cho_solve(cf, s)
        alpha += cho_solve(cf, s - A @ alpha)
    except np.linalg.LinAlgError:
        alpha = np.linalg.solve(A, s)
        alpha += np.linalg.solve(A, s - A @ alpha)
    return alpha


def _chol_pivots_healthy(cf) -> bool:
    d = np.abs(np.diag(cf[0]))
    dmax = d.max()
    return dmax > 0.0 and (d.min() / dmax) ** 2 > _PIVOT_RATIO_SQ_MIN


def solve_joint_separation(
    K, Phi, W, s, reg_incident: float, reg_scatter: float
) -> tuple[np.ndarray, np.ndarray, JointDiagnostics]:
    """Minimize the joint objective; returns (alpha, scatter_coeffs, diagnostics).

    Stationarity of the objective couples the two coefficient sets:

        (Phi^H Phi + reg_scatter*W) u = Phi^H (s - K alpha)
        (K + reg_incident*I) alpha    = s - Phi u

    Eliminating alpha through the factorization of K + reg_incident*I leaves
    the Hermitian PSD system

        [reg_incident * Phi^H (K + reg_incident*I)^{-1} Phi + reg_scatter*W] u
            = reg_incident * Phi^H (K + reg_incident*I)^{-1} s,

    solved by Cholesky. A numerically singular reduced matrix (possible
    whenever W and Phi share a null direction, e.g. large truncation orders
    with few microphones) triggers a diagonal loading of W by
    1e-10 * trace(W)/Q, reported in the diagnostics.
    """
    if reg_incident <= 0.0 or reg_scatter <= 0.0:
        raise ValueError("regularization parameters must be positive")
    K = np.asarray(K)
    Phi = np.asarray(Phi)
    W = np.asarray(W)
    s = np.asarray(s, dtype=complex)
    n_modes = Phi.shape[1]
    if W.shape != (n_modes, n_modes):
        raise ValueError("weighting matrix does not match the expansion size")

    try:
        cf = cho_factor(K + reg_incident * np.eye(K.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "Gram matrix factorization failed; geometry is degenerate "
            "(coincident microphones?)",
            reason="geometry",
        ) from exc
    B = cho_solve(cf, Phi)
    c = cho_solve(cf, s)
    G = Phi.conj().T @ B
    G = 0.5 * (G + G.conj().T)
    rhs = reg_incident * (Phi.conj().T @ c)

    eps_w = W_LOADING_REL * float(np.trace(W).real) / n_modes
    loading = 0.0
    S = reg_incident * G + reg_scatter * W
    try:
        cs = cho_factor(S)
        if not _chol_pivots_healthy(cs):
            raise np.linalg.LinAlgError("numerically singular")
    except np.linalg.LinAlgError:
        loading = eps_w
        S = S + reg_scatter * eps_w * np.eye(n_modes)
        try:
            cs = cho_factor(S)
            if not _chol_pivots_healthy(cs):
                raise np.linalg.LinAlgError("numerically singular")
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(
                "reduced scattering system is singular even with diagonal "
                "loading; regularization pair is unusable for this geometry",
                reason="regularization",
            ) from exc
    u = cho_solve(cs, rhs)
    u += cho_solve(cs, rhs - S @ u)
    alpha = c - B @ u
    return alpha, u, JointDiagnostics(loading > 0.0, loading)


def joint_objective(K, Phi, W, s, alpha, u, reg_incident, reg_scatter) -> float:
    """Value of the joint objective at (alpha, u)."""
    r = s - K @ alpha - Phi @ u
    return float(
        np.vdot(r, r).real
        + reg_incident * np.vdot(alpha, K @ alpha).real
        + reg_scatter * np.vdot(u, W @ u).real
    )


def stationarity_residual(
    K, Phi, W, s, alpha, u, reg_incident, reg_scatter, loading: float = 0.0
) -> float:
    """Largest relative residual of the two coupled stationarity equations."""
    W_eff = W + loading * np.eye(W.shape[0]) if loading else W
    r1 = (Phi.conj().T @ Phi + reg_scatter * W_eff) @ u - Phi.conj().T @ (
        s - K @ alpha
    )
    r2 = (K + reg_incident * np.eye(K.shape[0])) @ alpha - (s - Phi @ u)
    scale1 = np.linalg.norm(Phi.conj().T @ s)
    scale2 = np.linalg.norm(s)
    return max(
        np.linalg.norm(r1) / max(scale1, 1e-300),
        np.linalg.norm(r2) / max(scale2, 1e-300),
    )


# ---------------------------------------------------------------------------
# sklearn-style estimators
# ---------------------------------------------------------------------------
class _FieldEstimatorBase(BaseEstimator):
    def _kernel_spec(self) -> KernelSpec:
        eta = None if self.prior_direction is None else tuple(self.prior_direction)
        return KernelSpec(k=self.wavenumber, rho=self.prior_weight, eta=eta)

    def _check_fitted(self):
        if not hasattr(self, "alpha_"):
            raise RuntimeError("estimator is not fitted; call fit(X, y) first")

    def predict(self, X) -> np.ndarray:
        """Incident-field estimate at positions X, via the kernel expansion."""
        self._check_fitted()
        X = check_positions(X)
        return kernel_matrix(self._kernel_spec(), X, self.mics_) @ self.alpha_


class KernelRidgeFieldEstimator(_FieldEstimatorBase):
    """Kernel ridge regression of a sound field from microphone pressures.

    Parameters
    ----------
    wavenumber : float
        Wavenumber k = 2 pi f / c of the frequency bin being fitted.
    reg : float
        Ridge regularization (lambda).
    prior_weight, prior_direction : float, unit 3-vector
        Optional directional prior of the kernel; the default is the diffuse
        kernel.
    """

    def __init__(self, wavenumber=1.0, reg=1e-3, prior_weight=0.0, prior_direction=None):
        self.wavenumber = wavenumber
        self.reg = reg
        self.prior_weight = prior_weight
        self.prior_direction = prior_direction

    def fit(self, X, y):
        X = check_positions(X)
        y = check_measurements(y, X.shape[0])
        check_wavenumber(self.wavenumber)
        self.mics_ = X
        self.gram_ = gram_matrix(self._kernel_spec(), X)
        self.alpha_ = solve_kernel_ridge(self.gram_, y, self.reg)
        return self


class ScatterSeparatedFieldEstimator(_FieldEstimatorBase):
    """Joint incident/scattering estimator with truncation order max_order.

    Parameters
    ----------
    wavenumber : float
        Wavenumber of the frequency bin.
    max_order : int
        Truncation order N of the exterior expansion ((N+1)**2 coefficients).
    reg_incident, reg_scatter : float
        Regularization of the kernel weights (lambda_1) and of the scattering
        coefficients (lambda_2).
    weighting : {"smoothness", "identity"}
        Penalty quadratic form for the scattering coefficients.
    prior_weight, prior_direction
        Kernel prior, as in KernelRidgeFieldEstimator.

    Attributes (after fit)
    ----------------------
    alpha_ : kernel weights of the incident model
    scatter_coeffs_ : expansion coefficients of the scattering field
    weighting_matrix_ : the penalty matrix actually used (without loading)
    diagnostics_ : JointDiagnostics of the solve
    """

    def __init__(
        self,
        wavenumber=1.0,
        max_order=0,
        reg_incident=1e-3,
        reg_scatter=1e-3,
        weighting="smoothness",
        prior_weight=0.0,
        prior_direction=None,
    ):
        self.wavenumber = wavenumber
        self.max_order = max_order
        self.reg_incident = reg_incident
        self.reg_scatter = reg_scatter
        self.weighting = weighting
        self.prior_weight = prior_weight
        self.prior_direction = prior_direction

    def fit(self, X, y):
        X = check_positions(X)
        y = check_measurements(y, X.shape[0])
        check_wavenumber(self.wavenumber)
        if self.max_order < 0:
            raise ValueError("max_order must be non-negative")
        if self.weighting not in ("smoothness", "identity"):
            raise ValueError("weighting must be 'smoothness' or 'identity'")
        self.mics_ = X
        self.gram_ = gram_matrix(self._kernel_spec(), X)
        self.expansion_matrix_ = expansion_matrix(X, self.max_order, self.wavenumber)
        if self.weighting == "smoothness":
            self.weighting_matrix_ = weighting_matrix(X, self.max_order, self.wavenumber)
        else:
            self.weighting_matrix_ = np.eye(num_modes(self.max_order), dtype=complex)
        self.alpha_, self.scatter_coeffs_, self.diagnostics_ = solve_joint_separation(
            self.gram_,
            self.expansion_matrix_,
            self.weighting_matrix_,
            y,
            self.reg_incident,
            self.reg_scatter,
        )
        return self

    def predict_scattered(self, X) -> np.ndarray:
        """Scattering-field estimate: the truncated exterior expansion."""
        self._check_fitted()
        Phi = expansion_matrix(X, self.max_order, self.wavenumber)
        return Phi @ self.scatter_coeffs_

    def predict_total(self, X) -> np.ndarray:
        """Incident + scattering estimate."""
        return self.predict(X) + self.predict_scattered(X)
