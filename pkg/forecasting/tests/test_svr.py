import math

from django.test import SimpleTestCase
import numpy as np
from scipy import optimize

from forecasting.exceptions import KernelError, ModelError
from forecasting.svr import (
    fit_svr_arrays,
    kernel_eval,
    kernel_matrix,
    KernelSpec,
    predict,
    solve_dual,
    standardize,
    SvrModel,
    SvrParams,
)


def qp_oracle(gram, targets, C, epsilon):
    """Maximised dual objective from scipy's SLSQP on the same box- and equality-constrained QP."""
    n = targets.size
    signs = np.concatenate([np.ones(n), -np.ones(n)])
    linear = np.concatenate([epsilon - targets, epsilon + targets])
    Q = np.outer(signs, signs) * np.tile(gram, (2, 2))
    result = optimize.minimize(
        lambda beta: 0.5 * beta @ Q @ beta + linear @ beta,
        np.zeros(2 * n),
        jac=lambda beta: Q @ beta + linear,
        method='SLSQP',
        bounds=[(0.0, C)] * (2 * n),
        constraints=[{'type': 'eq', 'fun': lambda beta: signs @ beta, 'jac': lambda beta: signs}],
        options={'ftol': 1e-14, 'maxiter': 2000},
    )
    return -float(result.fun)


def kkt_residual(solution, gram, targets, C, epsilon):
    """Largest violation of the epsilon-tube optimality conditions by f = K beta - rho."""
    beta = solution.coefficients
    residuals = targets - (gram @ beta - solution.rho)
    bound = 1e-9
    violations = [abs(float(beta.sum()))]
    for coefficient, residual in zip(beta, residuals):
        if abs(coefficient) <= bound:
            violations.append(abs(residual) - epsilon)
        elif coefficient >= C - bound:
            violations.append(epsilon - residual)
        elif coefficient <= -C + bound:
            violations.append(residual + epsilon)
        elif coefficient > 0:
            violations.append(abs(residual - epsilon))
        else:
            violations.append(abs(residual + epsilon))
    return max(0.0, max(violations))


def random_instance(rng, kind):
    n = int(rng.integers(2, 9))
    rows = rng.normal(size=(n, 2))
    if kind == 'rbf':
        kernel = KernelSpec('rbf', gamma=float(rng.uniform(0.1, 2.0)))
    elif kind == 'poly':
        kernel = KernelSpec('poly', degree=int(rng.integers(1, 4)), gamma=float(rng.uniform(0.1, 0.5)),
                            coef0=float(rng.choice([0.0, 1.0])))
    else:
        kernel = KernelSpec('sigmoid', gamma=float(rng.uniform(0.05, 0.5)), coef0=float(rng.choice([0.0, 0.5])))
    gram = kernel_matrix(kernel, rows, rows)
    return gram, rng.normal(size=n), float(rng.choice([0.5, 1.0, 5.0])), float(rng.choice([0.0, 0.05, 0.2]))


class KernelTests(SimpleTestCase):
    def test_rbf_self_similarity(self):
        kernel = KernelSpec('rbf', gamma=0.7)
        for row in np.random.default_rng(0).normal(size=(5, 3)):
            self.assertEqual(kernel_eval(kernel, row, row), 1.0)

    def test_linear_poly_is_dot_product(self):
        kernel = KernelSpec('poly', degree=1, gamma=1.0, coef0=0.0)
        self.assertEqual(kernel_eval(kernel, [1.0, 2.0], [1.0, 2.0]), 5.0)

    def test_sigmoid(self):
        kernel = KernelSpec('sigmoid', gamma=0.5, coef0=1.0)
        self.assertAlmostEqual(kernel_eval(kernel, [1.0, 1.0], [2.0, 0.0]), math.tanh(2.0))

    def test_zero_gamma_is_rejected(self):
        with self.assertRaises(KernelError):
            KernelSpec('sigmoid', gamma=0.0)

    def test_unknown_kernel(self):
        with self.assertRaises(KernelError):
            KernelSpec('linear')

    def test_width_mismatch(self):
        with self.assertRaises(KernelError):
            kernel_eval(KernelSpec('rbf', gamma=1.0), [1.0, 2.0], [1.0])

    def test_auto_gamma(self):
        rows = np.array([[1.0, -1.0], [-1.0, 1.0]])
        self.assertEqual(KernelSpec('rbf').resolve(rows).gamma, 0.5)


class StandardizeTests(SimpleTestCase):
    def test_population_z_scores(self):
        _, rows = standardize(np.array([[1.0, 5.0], [3.0, 5.0]]))
        np.testing.assert_array_equal(rows, [[-1.0, 0.0], [1.0, 0.0]])

    def test_constant_column_is_centred(self):
        _, rows = standardize(np.array([[5.0], [5.0], [5.0]]))
        np.testing.assert_array_equal(rows[:, 0], [0.0, 0.0, 0.0])

    def test_mean_row_maps_to_zero(self):
        data = np.random.default_rng(1).normal(size=(10, 4))
        scaler, _ = standardize(data)
        np.testing.assert_allclose(scaler.transform(data.mean(axis=0)), 0.0, atol=1e-12)


class DualSolverTests(SimpleTestCase):
    def test_matches_qp_oracle(self):
        rng = np.random.default_rng(5)
        compared = 0
        for kind in ('poly', 'rbf', 'sigmoid'):
            for trial in range(50):
                gram, targets, C, epsilon = random_instance(rng, kind)
                solution = solve_dual(gram, targets, C, epsilon, tolerance=1e-9, max_iterations=100000)
                label = f'{kind} trial {trial}'
                self.assertTrue(solution.converged, label)
                self.assertLessEqual(kkt_residual(solution, gram, targets, C, epsilon), 1e-3, label)
                # a non-PSD sigmoid Gram only guarantees a stationary point
                if np.linalg.eigvalsh(gram).min() >= -1e-9 * max(1.0, np.abs(gram).max()):
                    compared += 1
                    objective = qp_oracle(gram, targets, C, epsilon)
                    self.assertAlmostEqual(solution.objective, objective,
                                           delta=1e-4 * max(1.0, abs(objective)), msg=label)
        self.assertGreaterEqual(compared, 100)

    def test_constraints_hold_at_every_step(self):
        rng = np.random.default_rng(6)
        rows = rng.normal(size=(30, 3))
        targets = rows[:, 0] + rng.normal(0, 0.3, 30)
        gram = kernel_matrix(KernelSpec('rbf', gamma=0.3), rows, rows)
        C = 2.0

        def check(iteration, coefficients):
            self.assertLessEqual(np.abs(coefficients).max(), C + 1e-12)
            self.assertAlmostEqual(float(coefficients.sum()), 0.0, delta=1e-8)

        solution = solve_dual(gram, targets, C, 0.1, trace=True, callback=check)
        self.assertGreater(solution.iterations, 0)
        self.assertTrue(np.all(np.diff(solution.trace) >= -1e-10))

    def test_iteration_cap_flags_non_convergence(self):
        rng = np.random.default_rng(7)
        rows = rng.normal(size=(40, 2))
        gram = kernel_matrix(KernelSpec('rbf', gamma=1.0), rows, rows)
        solution = solve_dual(gram, rng.normal(size=40), 100.0, 0.0, tolerance=1e-12, max_iterations=3)
        self.assertFalse(solution.converged)
        self.assertEqual(solution.iterations, 3)
        self.assertGreater(solution.violation, 1e-12)


class SvrFitTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(11)
        self.rows = rng.uniform(-2, 2, size=(60, 2))
        self.targets = np.sin(self.rows[:, 0]) + 0.5 * self.rows[:, 1] + rng.normal(0, 0.2, 60)

    def test_constant_targets(self):
        model = fit_svr_arrays(self.rows, np.full(60, 4.0), SvrParams(kernel='rbf', epsilon=0.1))
        self.assertEqual(model.dual_coefficients.size, 0)
        self.assertAlmostEqual(model.bias, 4.0)
        np.testing.assert_allclose(model.predict(self.rows), 4.0)

    def test_box_constraint_at_lower_c(self):
        model = fit_svr_arrays(self.rows, self.targets, SvrParams(kernel='rbf', C=1.0, epsilon=0.01))
        self.assertTrue(np.all(np.abs(model.dual_coefficients) <= 1.0 + 1e-12))
        self.assertAlmostEqual(float(model.dual_coefficients.sum()), 0.0, delta=1e-8)

    def test_kkt_conditions_after_fit(self):
        epsilon, C = 0.1, 5.0
        params = SvrParams(kernel='rbf', C=C, epsilon=epsilon, tolerance=1e-6)
        model = fit_svr_arrays(self.rows, self.targets, params)
        self.assertTrue(model.report.converged)
        residuals = model.predict(self.rows) - self.targets
        coefficients = np.zeros(len(self.rows))
        scaled = model.scaler.transform(self.rows)
        for vector, coefficient in zip(model.support_vectors, model.dual_coefficients):
            coefficients[np.flatnonzero((scaled == vector).all(axis=1))] = coefficient
        slack = 1e-3
        inside = coefficients == 0
        self.assertTrue(np.all(np.abs(residuals[inside]) <= epsilon + slack))
        free = (coefficients != 0) & (np.abs(coefficients) < C - 1e-9)
        np.testing.assert_allclose(np.abs(residuals[free]), epsilon, atol=slack)

    def test_all_kernels_fit(self):
        for kind in ('poly', 'sigmoid', 'rbf'):
            model = fit_svr_arrays(self.rows, self.targets, SvrParams(kernel=kind, C=10.0, epsilon=0.05))
            self.assertTrue(np.all(np.isfinite(model.predict(self.rows))), kind)

    def test_duplicate_rows_predict_identically(self):
        model = fit_svr_arrays(self.rows, self.targets, SvrParams(kernel='rbf'))
        predictions = predict(model, np.vstack([self.rows[:3], self.rows[:3]]))
        np.testing.assert_array_equal(predictions[:3], predictions[3:])

    def test_no_support_vectors_predicts_bias(self):
        model = SvrModel(np.empty((0, 2)), np.empty(0), 2.5, KernelSpec('rbf', gamma=1.0), feature_names=('a', 'b'))
        np.testing.assert_array_equal(model.predict(self.rows[:4]), 2.5)

    def test_width_mismatch(self):
        model = fit_svr_arrays(self.rows, self.targets, SvrParams(kernel='rbf'))
        with self.assertRaises(ModelError):
            model.predict(self.rows[:, :1])

    def test_json_payload_reloads(self):
        model = fit_svr_arrays(self.rows, self.targets, SvrParams(kernel='poly', C=3.0), feature_names=['a', 'b'])
        reloaded = SvrModel.from_dict(model.to_dict())
        np.testing.assert_allclose(reloaded.predict(self.rows), model.predict(self.rows))
        self.assertEqual(reloaded.kernel, model.kernel)
        self.assertEqual(reloaded.report.iterations, model.report.iterations)

    def test_invalid_params(self):
        with self.assertRaises(ModelError):
            SvrParams(C=0.0)
        with self.assertRaises(ModelError):
            SvrParams(epsilon=-0.1)
