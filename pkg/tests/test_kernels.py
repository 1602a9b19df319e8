import numpy as np
import pytest

from helpers import fd_helmholtz_residual
from scatsep.kernels import (
    KernelSpec,
    gram_matrix,
    j0_complex,
    kernel_cross_vector,
    kernel_eval,
    kernel_matrix,
)


def j0_power_series(z2, terms=40):
    """Independent oracle: sum (-z2)^n / (2n+1)! for j0(sqrt(z2))."""
    import math

    total = 0j
    for n in range(terms):
        total += (-z2) ** n / math.factorial(2 * n + 1)
    return total


class TestKernelSpec:
    def test_diffuse_default(self):
        spec = KernelSpec(k=5.5)
        assert spec.rho == 0.0

    def test_directional_requires_unit_eta(self):
        with pytest.raises(ValueError):
            KernelSpec(k=5.5, rho=1.0)
        with pytest.raises(ValueError):
            KernelSpec(k=5.5, rho=1.0, eta=(1.0, 1.0, 0.0))
        KernelSpec(k=5.5, rho=1.0, eta=(1.0, 0.0, 0.0))

    def test_invalid_wavenumber(self):
        with pytest.raises(ValueError):
            KernelSpec(k=-1.0)


class TestDiffuseKernel:
    def test_coincident_points(self):
        spec = KernelSpec(k=5.5)
        assert kernel_eval(spec, [0.1, 0.2, 0.3], [0.1, 0.2, 0.3]) == 1.0

    def test_direct_formula(self):
        spec = KernelSpec(k=5.5)
        val = kernel_eval(spec, [0.0, 0.0, 0.0], [0.5, 0.0, 0.0])
        assert abs(val - np.sin(2.75) / 2.75) < 1e-15

    def test_translation_invariance(self, rng):
        spec = KernelSpec(k=3.3)
        for _ in range(20):
            r1, r2, t = rng.uniform(-1, 1, (3, 3))
            a = kernel_eval(spec, r1, r2)
            b = kernel_eval(spec, r1 + t, r2 + t)
            assert abs(a - b) < 1e-12

    def test_reconstruction_satisfies_helmholtz(self, rng, mics):
        # any kernel superposition solves the homogeneous Helmholtz equation
        k = 5.5
        spec = KernelSpec(k=k)
        alpha = rng.standard_normal(len(mics)) + 1j * rng.standard_normal(len(mics))

        def field(X):
            return kernel_matrix(spec, X, mics) @ alpha

        pts = rng.uniform(-0.2, 0.2, (6, 3))
        res = fd_helmholtz_residual(field, k, pts)
        assert np.max(res) < 1e-3


class TestDirectionalKernel:
    SPEC = KernelSpec(k=5.5, rho=2.0, eta=(1.0, 0.0, 0.0))

    def test_hermitian_symmetry(self):
        r1 = np.array([0.1, 0.2, -0.1])
        r2 = np.zeros(3)
        a = kernel_eval(self.SPEC, r1, r2)
        b = kernel_eval(self.SPEC, r2, r1)
        assert abs(a - np.conj(b)) < 1e-14

    def test_against_power_series(self):
        d = np.array([0.1, 0.2, -0.1])
        z2 = -4.0 - 2j * 2.0 * 5.5 * d[0] + 5.5**2 * float(d @ d)
        expected = j0_power_series(z2)
        got = kernel_eval(self.SPEC, d, np.zeros(3))
        assert abs(got - expected) < 1e-12 * abs(expected)

    def test_small_argument_series_branch(self):
        # |z| below the series switch threshold
        for z2 in (1e-10 + 0j, -1e-9 + 1e-10j, 0j):
            got = j0_complex(z2)
            expected = j0_power_series(z2)
            assert abs(got - expected) < 1e-15

    def test_translation_invariance(self, rng):
        for _ in range(10):
            r1, r2, t = rng.uniform(-0.5, 0.5, (3, 3))
            a = kernel_eval(self.SPEC, r1, r2)
            b = kernel_eval(self.SPEC, r1 + t, r2 + t)
            assert abs(a - b) < 1e-12

    def test_reconstruction_satisfies_helmholtz(self, rng, mics):
        alpha = rng.standard_normal(len(mics)) + 1j * rng.standard_normal(len(mics))

        def field(X):
            return kernel_matrix(self.SPEC, X, mics) @ alpha

        pts = rng.uniform(-0.2, 0.2, (5, 3))
        res = fd_helmholtz_residual(field, self.SPEC.k, pts)
        assert np.max(res) < 1e-3


class TestGramMatrix:
    def test_single_mic_diffuse(self):
        K = gram_matrix(KernelSpec(k=2.0), np.array([[0.5, 0.0, 0.0]]))
        np.testing.assert_allclose(K, [[1.0]])

    def test_coincident_mics_rank_deficient(self):
        mics = np.array([[0.5, 0, 0], [0.5, 0, 0], [0, 0.5, 0]])
        K = gram_matrix(KernelSpec(k=2.0), mics)
        assert np.min(np.linalg.eigvalsh(K)) < 1e-12

    def test_study_layout_hermitian_psd(self, mics):
        K = gram_matrix(KernelSpec(k=2 * np.pi * 300 / 343.0), mics)
        assert np.max(np.abs(K - K.conj().T)) < 1e-12
        eig = np.linalg.eigvalsh(K)
        assert eig.min() >= -1e-10 * np.linalg.norm(K, 2)

    def test_diffuse_gram_real_symmetric(self, mics):
        K = gram_matrix(KernelSpec(k=5.5), mics)
        assert np.max(np.abs(K.imag)) == 0.0
        np.testing.assert_allclose(K, K.T)

    def test_directional_gram_hermitian_psd(self, mics):
        K = gram_matrix(KernelSpec(k=5.5, rho=1.5, eta=(0, 0, 1.0)), mics)
        assert np.max(np.abs(K - K.conj().T)) < 1e-12
        eig = np.linalg.eigvalsh(K)
        assert eig.min() >= -1e-10 * np.linalg.norm(K, 2)


class TestCrossVector:
    def test_at_first_mic(self, mics):
        spec = KernelSpec(k=5.5)
        v = kernel_cross_vector(spec, mics[0], mics)
        assert abs(v[0] - 1.0) < 1e-15

    def test_equals_gram_row_at_mic(self, mics):
        spec = KernelSpec(k=5.5)
        K = gram_matrix(spec, mics)
        v = kernel_cross_vector(spec, mics[3], mics)
        np.testing.assert_allclose(v, K[3], atol=1e-14)

    def test_matches_scalar_loop(self, rng, mics):
        spec = KernelSpec(k=5.5, rho=1.0, eta=(0.0, 1.0, 0.0))
        r = rng.uniform(-0.5, 0.5, 3)
        v = kernel_cross_vector(spec, r, mics)
        for m in range(0, len(mics), 7):
            assert abs(v[m] - kernel_eval(spec, r, mics[m])) < 1e-14
