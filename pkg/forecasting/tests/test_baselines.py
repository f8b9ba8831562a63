from django.test import SimpleTestCase
import numpy as np

from forecasting.baselines import (
    brown_forecast,
    fit_smoothing,
    fitted_values,
    forecast_method,
    holt_winters_forecast,
    parameter_grid,
    ses_forecast,
    SmoothingMethod,
    SmoothingParams,
)
from forecasting.exceptions import SmoothingError

CYCLE = np.array([5.0, 7.0, 9.0, 12.0, 15.0, 18.0, 17.0, 14.0, 11.0, 8.0, 6.0, 4.0])


class SesTests(SimpleTestCase):
    def test_alpha_one_repeats_last_value(self):
        np.testing.assert_array_equal(ses_forecast([3.0, 8.0, 5.0], 1.0, 4), [5.0] * 4)

    def test_constant_series(self):
        np.testing.assert_array_equal(ses_forecast([6.0] * 10, 0.3, 3), [6.0] * 3)

    def test_hand_recursion(self):
        np.testing.assert_array_equal(ses_forecast([10.0, 20.0], 0.5, 3), [15.0] * 3)

    def test_alpha_out_of_range(self):
        with self.assertRaises(SmoothingError):
            ses_forecast([1.0, 2.0], 0.0, 1)
        with self.assertRaises(SmoothingError):
            ses_forecast([1.0, 2.0], 1.5, 1)

    def test_forecast_within_observed_range(self):
        x = np.random.default_rng(0).normal(100, 20, 40)
        for alpha in (0.05, 0.5, 0.95):
            forecast = ses_forecast(x, alpha, 2)
            self.assertTrue(x.min() <= forecast[0] <= x.max())


class BrownTests(SimpleTestCase):
    def test_constant_series(self):
        np.testing.assert_allclose(brown_forecast([4.0] * 12, 0.4, 5), [4.0] * 5)

    def test_slope_of_linear_series(self):
        x = 2.0 * np.arange(200.0)
        forecast = brown_forecast(x, 0.2, 3)
        self.assertAlmostEqual(forecast[1] - forecast[0], 2.0, delta=0.1)
        self.assertAlmostEqual(forecast[0], 400.0, delta=0.5)

    def test_alpha_one_is_rejected(self):
        with self.assertRaises(SmoothingError):
            brown_forecast([1.0, 2.0, 3.0], 1.0, 2)

    def test_single_observation(self):
        with self.assertRaises(SmoothingError):
            brown_forecast([1.0], 0.5, 2)


class HoltWintersTests(SimpleTestCase):
    def test_exact_cycle_is_reproduced(self):
        params = SmoothingParams(alpha=0.3, beta=0.1, gamma_s=0.2)
        forecast = holt_winters_forecast(np.tile(CYCLE, 5), params, 'additive', 12)
        self.assertLess(np.abs(forecast - CYCLE).max(), 1e-6)

    def test_constant_positive_series_multiplicative(self):
        params = SmoothingParams(alpha=0.5, beta=0.2, gamma_s=0.3)
        np.testing.assert_allclose(holt_winters_forecast([9.0] * 36, params, 'multiplicative', 12), 9.0)

    def test_too_short(self):
        with self.assertRaises(SmoothingError):
            holt_winters_forecast(np.ones(23), SmoothingParams(alpha=0.5), 'additive', 12)

    def test_multiplicative_rejects_non_positive(self):
        x = np.tile(CYCLE, 3)
        x[5] = 0.0
        with self.assertRaises(SmoothingError):
            holt_winters_forecast(x, SmoothingParams(alpha=0.5), 'multiplicative', 12)

    def test_unknown_mode(self):
        with self.assertRaises(SmoothingError):
            holt_winters_forecast(np.tile(CYCLE, 3), SmoothingParams(alpha=0.5), 'damped', 12)

    def test_additive_shift_equivariance(self):
        x = np.tile(CYCLE, 4) + np.random.default_rng(1).normal(0, 1, 48)
        params = SmoothingParams(alpha=0.4, beta=0.1, gamma_s=0.3)
        np.testing.assert_allclose(holt_winters_forecast(x + 50.0, params, 'additive', 12),
                                   holt_winters_forecast(x, params, 'additive', 12) + 50.0)

    def test_multiplicative_scale_equivariance(self):
        x = np.tile(CYCLE, 4) * np.random.default_rng(2).uniform(0.9, 1.1, 48)
        params = SmoothingParams(alpha=0.4, beta=0.1, gamma_s=0.3)
        np.testing.assert_allclose(holt_winters_forecast(3.0 * x, params, 'multiplicative', 12),
                                   3.0 * holt_winters_forecast(x, params, 'multiplicative', 12))

    def test_every_method_reproduces_a_constant(self):
        for method in SmoothingMethod:
            forecast = forecast_method([8.0] * 30, method, SmoothingParams(alpha=0.35, beta=0.2, gamma_s=0.1), 12)
            np.testing.assert_allclose(forecast, 8.0, err_msg=str(method))


class GridSearchTests(SimpleTestCase):
    def test_recovers_ses_alpha(self):
        rng = np.random.default_rng(4)
        level, values = 100.0, []
        for shock in rng.normal(0, 1, 1000):
            values.append(level + shock)
            level += 0.6 * shock
        params = fit_smoothing(values, SmoothingMethod.SES)
        self.assertAlmostEqual(params.alpha, 0.6, delta=0.1)

    def test_constant_series_takes_smallest_alpha(self):
        self.assertEqual(fit_smoothing([5.0] * 20, SmoothingMethod.SES).alpha, 0.05)

    def test_holt_winters_beats_the_variance(self):
        rng = np.random.default_rng(5)
        x = 50.0 + 0.5 * np.arange(60) + np.tile(CYCLE, 5) + rng.normal(0, 0.5, 60)
        params = fit_smoothing(x, SmoothingMethod.HOLT_WINTERS_ADDITIVE)
        fitted = fitted_values(x, SmoothingMethod.HOLT_WINTERS_ADDITIVE, params)
        self.assertLess(np.mean((fitted[12:] - x[12:]) ** 2), x.var())

    def test_grid_shapes(self):
        alpha, _, _ = parameter_grid(SmoothingMethod.SES)
        self.assertEqual((alpha.size, alpha[0], alpha[-1]), (20, 0.05, 1.0))
        alpha, _, _ = parameter_grid(SmoothingMethod.BROWN)
        self.assertEqual(alpha[-1], 0.95)
        alpha, beta, gamma = parameter_grid(SmoothingMethod.HOLT_WINTERS_MULTIPLICATIVE)
        self.assertEqual(alpha.size, 20 * 21 * 21)
        self.assertEqual((alpha[0], beta[0], gamma[0]), (0.05, 0.0, 0.0))

    def test_invalid_horizon(self):
        with self.assertRaises(SmoothingError):
            fit_smoothing([1.0, 2.0, 3.0], SmoothingMethod.SES, horizon=0)
