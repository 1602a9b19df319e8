import numpy as np
import pytest
from sklearn.base import clone

from scatsep.estimators import (
    KernelRidgeFieldEstimator,
    ScatterSeparatedFieldEstimator,
    SingularSystemError,
    joint_objective,
    solve_joint_separation,
    solve_kernel_ridge,
    stationarity_residual,
    weighting_matrix,
)
from scatsep.fields import (
    expansion_matrix,
    expansion_matrix_dphi,
    expansion_matrix_dtheta,
    exterior_wavefunction,
    point_source_field,
)
from scatsep.kernels import KernelSpec, gram_matrix
from scatsep.sphfuncs import num_modes

K300 = 2 * np.pi * 300.0 / 343.0


@pytest.fixture(scope="module")
def setup300(scenario, mics):
    s = scenario.synthesize(300.0)
    K = gram_matrix(KernelSpec(k=K300), mics)
    Phi = expansion_matrix(mics, 3, K300)
    W = weighting_matrix(mics, 3, K300)
    return mics, s, K, Phi, W


def random_scenario(seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((20, 3))
    m = m / np.linalg.norm(m, axis=1, keepdims=True) * rng.uniform(0.4, 0.6, (20, 1))
    source = rng.uniform(1.5, 3.0, 3)
    k = rng.uniform(2.0, 12.0)
    s = point_source_field(source, k, m) + 0.01 * (
        rng.standard_normal(20) + 1j * rng.standard_normal(20)
    )
    return m, k, s


class TestSolveKernelRidge:
    def test_zero_measurements(self, setup300):
        _, _, K, _, _ = setup300
        alpha = solve_kernel_ridge(K, np.zeros(len(K), dtype=complex), 1e-3)
        assert np.linalg.norm(alpha) == 0.0

    def test_large_regularization_limit(self, setup300):
        _, s, K, _, _ = setup300
        alpha = solve_kernel_ridge(K, s, 1e9)
        assert np.linalg.norm(alpha) < 1e-6 * np.linalg.norm(s)

    def test_two_by_two_hand_solve(self):
        K = np.array([[1.0, 0.4], [0.4, 1.0]], dtype=complex)
        s = np.array([1.0 + 2.0j, -0.5 + 0.25j])
        lam = 0.1
        A = K + lam * np.eye(2)
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        expected = np.array(
            [A[1, 1] * s[0] - A[0, 1] * s[1], -A[1, 0] * s[0] + A[0, 0] * s[1]]
        ) / det
        np.testing.assert_allclose(solve_kernel_ridge(K, s, lam), expected, rtol=1e-14)

    def test_residual_invariant(self, setup300):
        _, s, K, _, _ = setup300
        for lam in (1e-2, 1e-4, 1e-8):
            alpha = solve_kernel_ridge(K, s, lam)
            r = np.linalg.norm((K + lam * np.eye(len(K))) @ alpha - s)
            assert r < 1e-10 * np.linalg.norm(s)

    def test_nonpositive_regularization_rejected(self, setup300):
        _, s, K, _, _ = setup300
        with pytest.raises(ValueError):
            solve_kernel_ridge(K, s, 0.0)


class TestWeightingMatrix:
    def test_order0_is_zero(self, mics):
        W = weighting_matrix(mics, 0, K300)
        np.testing.assert_array_equal(W, np.zeros((1, 1)))

    def test_monopole_row_and_column_zero(self, setup300):
        _, _, _, _, W = setup300
        assert np.max(np.abs(W[0, :])) == 0.0
        assert np.max(np.abs(W[:, 0])) == 0.0

    def test_quadratic_form_identity(self, rng, setup300):
        # u^H W u equals the direct sum of squared angle-derivatives at mics
        mics, _, _, _, W = setup300
        Dth = expansion_matrix_dtheta(mics, 3, K300)
        Dph = expansion_matrix_dphi(mics, 3, K300)
        for _ in range(5):
            u = rng.standard_normal(16) + 1j * rng.standard_normal(16)
            direct = np.sum(np.abs(Dth @ u) ** 2) + np.sum(np.abs(Dph @ u) ** 2)
            quad = np.vdot(u, W @ u).real
            assert abs(quad - direct) < 1e-10 * direct

    def test_hermitian_psd(self, setup300):
        _, _, _, _, W = setup300
        assert np.max(np.abs(W - W.conj().T)) < 1e-12
        eig = np.linalg.eigvalsh(W)
        assert eig.min() >= -1e-10 * np.linalg.norm(W, 2)


class TestSolveJointSeparation:
    def test_krr_limit_large_lambda2(self, setup300):
        # identity weighting with lambda_2 -> inf crushes the scattering
        # coefficients and reduces the fit to plain kernel ridge regression
        mics, s, K, Phi, _ = setup300
        lam1 = 1e-3
        eye_w = np.eye(Phi.shape[1], dtype=complex)
        alpha_j, u_j, _ = solve_joint_separation(K, Phi, eye_w, s, lam1, 1e12)
        alpha_k = solve_kernel_ridge(K, s, lam1)
        assert np.linalg.norm(alpha_j - alpha_k) < 1e-4 * np.linalg.norm(alpha_k)
        assert np.linalg.norm(u_j) < 1e-6 * np.linalg.norm(s)

    def test_krr_limit_across_random_scenarios(self):
        for seed in range(5):
            m, k, s = random_scenario(100 + seed)
            K = gram_matrix(KernelSpec(k=k), m)
            Phi = expansion_matrix(m, 2, k)
            alpha_j, u_j, _ = solve_joint_separation(
                K, Phi, np.eye(9, dtype=complex), s, 1e-3, 1e12
            )
            alpha_k = solve_kernel_ridge(K, s, 1e-3)
            assert np.linalg.norm(alpha_j - alpha_k) < 1e-4 * np.linalg.norm(alpha_k)

    def test_pure_scattering_input(self, rng, setup300):
        # noiseless s = Phi u: the scattering model explains everything
        mics, _, K, Phi, _ = setup300
        u_true = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        s = Phi @ u_true
        alpha, u, _ = solve_joint_separation(
            K, Phi, np.eye(16, dtype=complex), s, 1e-4, 1e-12
        )
        assert np.linalg.norm(Phi @ u - s) < 1e-3 * np.linalg.norm(s)
        assert np.linalg.norm(K @ alpha) < 1e-3 * np.linalg.norm(s)

    def test_stationarity_residuals(self, setup300):
        mics, s, K, Phi, W = setup300
        for lam1, lam2 in [(1e-3, 1e-3), (1e-4, 1e-5), (1e-2, 1e-6), (1e-1, 1e2)]:
            alpha, u, diag = solve_joint_separation(K, Phi, W, s, lam1, lam2)
            res = stationarity_residual(
                K, Phi, W, s, alpha, u, lam1, lam2, diag.loading_value
            )
            assert res < 1e-8, (lam1, lam2, res)

    def test_objective_descent(self, rng, setup300):
        mics, s, K, Phi, W = setup300
        lam1, lam2 = 1e-3, 1e-3
        alpha, u, _ = solve_joint_separation(K, Phi, W, s, lam1, lam2)
        j0 = joint_objective(K, Phi, W, s, alpha, u, lam1, lam2)
        scale = np.linalg.norm(np.concatenate([alpha, u]))
        for _ in range(100):
            da = rng.standard_normal(len(alpha)) + 1j * rng.standard_normal(len(alpha))
            du = rng.standard_normal(len(u)) + 1j * rng.standard_normal(len(u))
            da *= 1e-3 * scale / np.linalg.norm(da)
            du *= 1e-3 * scale / np.linalg.norm(du)
            assert joint_objective(K, Phi, W, s, alpha + da, u, lam1, lam2) >= j0 - 1e-12 * j0
            assert joint_objective(K, Phi, W, s, alpha, u + du, lam1, lam2) >= j0 - 1e-12 * j0

    def test_equivalence_with_inverse_closed_form(self, setup300):
        # with W made invertible, the alpha of the coupled solve matches the
        # single-matrix closed form (K + l1 I + (l1/l2) Phi W^-1 Phi^H)^-1 s
        mics, s, K, Phi, W = setup300
        W_loaded = W + 1e-8 * np.eye(16)
        W_inv = np.linalg.inv(W_loaded)
        eye_m = np.eye(len(K))
        for lam1, lam2 in [(1e-3, 1e-1), (1e-2, 1e0), (1e-1, 1e1)]:
            alpha_j, _, _ = solve_joint_separation(K, Phi, W_loaded, s, lam1, lam2)
            A = K + lam1 * eye_m + (lam1 / lam2) * (Phi @ W_inv @ Phi.conj().T)
            alpha_c = np.linalg.solve(A, s)
            alpha_c += np.linalg.solve(A, s - A @ alpha_c)
            assert np.linalg.norm(alpha_j - alpha_c) < 1e-6 * np.linalg.norm(alpha_c)

    def test_equivalence_with_block_solve(self, setup300):
        # one-shot solve of the coupled stationarity equations as a single
        # block linear system
        mics, s, K, Phi, W = setup300
        lam1, lam2 = 1e-3, 1e-3
        alpha_j, u_j, _ = solve_joint_separation(K, Phi, W, s, lam1, lam2)
        M, Q = Phi.shape
        block = np.zeros((M + Q, M + Q), dtype=complex)
        block[:M, :M] = K + lam1 * np.eye(M)
        block[:M, M:] = Phi
        block[M:, :M] = Phi.conj().T @ K
        block[M:, M:] = Phi.conj().T @ Phi + lam2 * W
        rhs = np.concatenate([s, Phi.conj().T @ s])
        x = np.linalg.solve(block, rhs)
        assert np.linalg.norm(x[:M] - alpha_j) < 1e-8 * np.linalg.norm(x[:M])
        assert np.linalg.norm(x[M:] - u_j) < 1e-8 * max(np.linalg.norm(x[M:]), 1e-12)

    def test_loading_reported_when_system_singular(self, scenario, mics):
        # (N+1)^2 far beyond the information in 50 mics: W and Phi share
        # null directions and the loading fallback must engage
        k = scenario.wavenumber(1000.0)
        order = scenario.truncation_order(1000.0, 2)
        Phi = expansion_matrix(mics, order, k)
        W = weighting_matrix(mics, order, k)
        K = gram_matrix(KernelSpec(k=k), mics)
        s = scenario.synthesize(1000.0)
        alpha, u, diag = solve_joint_separation(K, Phi, W, s, 1e-3, 1e-3)
        assert diag.loading_applied
        assert diag.loading_value > 0
        res = stationarity_residual(K, Phi, W, s, alpha, u, 1e-3, 1e-3, diag.loading_value)
        assert res < 1e-8

    def test_geometry_error_distinct_from_regularization_error(self, setup300):
        mics, s, K, Phi, W = setup300
        bad_K = np.zeros_like(K)
        bad_K[0, 0] = -1.0
        with pytest.raises(SingularSystemError) as excinfo:
            solve_joint_separation(bad_K, Phi, W, s, 1e-20, 1e-3)
        assert excinfo.value.reason == "geometry"

    def test_invalid_regularization_rejected(self, setup300):
        mics, s, K, Phi, W = setup300
        with pytest.raises(ValueError):
            solve_joint_separation(K, Phi, W, s, 0.0, 1.0)


class TestKernelRidgeFieldEstimator:
    def test_fit_predict_roundtrip(self, scenario, mics):
        s = scenario.synthesize(300.0)
        est = KernelRidgeFieldEstimator(wavenumber=K300, reg=1e-3).fit(mics, s)
        pred = est.predict(mics[:5])
        assert pred.shape == (5,)

    def test_zero_alpha_predicts_zero(self, mics):
        est = KernelRidgeFieldEstimator(wavenumber=K300, reg=1e-3)
        est.fit(mics, np.zeros(len(mics)))
        assert np.all(est.predict(np.array([[0.1, 0.0, 0.0]])) == 0)

    def test_single_mic_prediction_is_kernel(self):
        mic = np.array([[0.5, 0.0, 0.0]])
        est = KernelRidgeFieldEstimator(wavenumber=2.0, reg=1e-12).fit(mic, [1.0 + 1e-12])
        r = np.array([[0.2, 0.1, 0.0]])
        d = np.linalg.norm(r - mic)
        expected = est.alpha_[0] * np.sin(2.0 * d) / (2.0 * d)
        assert abs(est.predict(r)[0] - expected) < 1e-12

    def test_predict_matches_manual_summation(self, rng, scenario, mics):
        s = scenario.synthesize(300.0)
        est = KernelRidgeFieldEstimator(wavenumber=K300, reg=1e-3).fit(mics, s)
        pts = rng.uniform(-0.4, 0.4, (7, 3))
        manual = np.zeros(7, dtype=complex)
        for m in range(len(mics)):
            d = np.linalg.norm(pts - mics[m], axis=1)
            manual += est.alpha_[m] * np.sinc(K300 * d / np.pi)
        np.testing.assert_allclose(est.predict(pts), manual, rtol=1e-12)

    def test_sklearn_params_clone(self):
        est = KernelRidgeFieldEstimator(wavenumber=2.0, reg=1e-4)
        params = est.get_params()
        assert params["reg"] == 1e-4 and params["wavenumber"] == 2.0
        cloned = clone(est)
        assert cloned.get_params() == params

    def test_unfitted_predict_raises(self):
        with pytest.raises(RuntimeError):
            KernelRidgeFieldEstimator().predict(np.zeros((1, 3)))


class TestScatterSeparatedFieldEstimator:
    def test_fit_sets_attributes(self, scenario, mics):
        s = scenario.synthesize(300.0)
        est = ScatterSeparatedFieldEstimator(
            wavenumber=K300, max_order=3, reg_incident=1e-3, reg_scatter=1e-3
        ).fit(mics, s)
        assert est.alpha_.shape == (50,)
        assert est.scatter_coeffs_.shape == (16,)
        assert est.weighting_matrix_.shape == (16, 16)
        assert not est.diagnostics_.loading_applied

    def test_zero_scatter_coeffs_predict_scattered_zero(self, scenario, mics):
        s = scenario.synthesize(300.0)
        est = ScatterSeparatedFieldEstimator(
            wavenumber=K300, max_order=3, weighting="identity", reg_scatter=1e9
        ).fit(mics, s)
        pts = np.array([[0.3, 0.1, 0.0]])
        assert abs(est.predict_scattered(pts)[0]) < 1e-9 * abs(est.predict(pts)[0])

    def test_single_mode_prediction_is_wavefunction(self, scenario, mics):
        s = scenario.synthesize(300.0)
        est = ScatterSeparatedFieldEstimator(wavenumber=K300, max_order=2).fit(mics, s)
        est.scatter_coeffs_ = np.zeros(9, dtype=complex)
        est.scatter_coeffs_[0] = 1.0
        pts = np.array([[0.4, -0.2, 0.1]])
        expected = exterior_wavefunction(0, 0, K300, pts)[0]
        assert abs(est.predict_scattered(pts)[0] - expected) < 1e-13

    def test_predict_scattered_matches_matrix_form(self, scenario, mics):
        s = scenario.synthesize(300.0)
        est = ScatterSeparatedFieldEstimator(wavenumber=K300, max_order=3).fit(mics, s)
        np.testing.assert_allclose(
            est.predict_scattered(mics),
            est.expansion_matrix_ @ est.scatter_coeffs_,
            rtol=1e-12,
        )

    def test_predict_total_is_sum(self, scenario, mics):
        s = scenario.synthesize(300.0)
        est = ScatterSeparatedFieldEstimator(wavenumber=K300, max_order=3).fit(mics, s)
        pts = np.array([[0.45, 0.0, 0.1], [0.0, -0.4, 0.3]])
        np.testing.assert_allclose(
            est.predict_total(pts), est.predict(pts) + est.predict_scattered(pts)
        )

    def test_incident_model_satisfies_helmholtz_inside_scatterer(self, scenario, mics):
        # the kernel model is source-free in the whole region, including
        # inside the scatterer sphere
        from helpers import fd_helmholtz_residual

        s = scenario.synthesize(300.0)
        est = ScatterSeparatedFieldEstimator(
            wavenumber=K300, max_order=3, reg_incident=1e-3, reg_scatter=1e-3
        ).fit(mics, s)
        pts = np.array([[0.0, 0.0, 0.0], [0.1, 0.05, -0.1], [0.0, 0.25, 0.0], [0.4, 0.0, 0.0]])
        res = fd_helmholtz_residual(est.predict, K300, pts)
        assert np.max(res) < 1e-3

    def test_identity_weighting_is_exact_identity(self, scenario, mics):
        s = scenario.synthesize(300.0)
        est = ScatterSeparatedFieldEstimator(
            wavenumber=K300, max_order=2, weighting="identity"
        ).fit(mics, s)
        np.testing.assert_array_equal(est.weighting_matrix_, np.eye(num_modes(2)))

    def test_invalid_weighting_rejected(self, mics):
        est = ScatterSeparatedFieldEstimator(wavenumber=K300, max_order=1, weighting="spam")
        with pytest.raises(ValueError):
            est.fit(mics, np.zeros(len(mics)))

    def test_sklearn_params_clone(self):
        est = ScatterSeparatedFieldEstimator(wavenumber=3.0, max_order=4, weighting="identity")
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()
