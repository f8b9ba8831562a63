from django.test import SimpleTestCase
import numpy as np
from sklearn.metrics import mean_absolute_percentage_error, mean_squared_error

from forecasting.data import join_exogenous
from forecasting.evaluation import (
    baseline_run,
    compare_models,
    evaluate_run,
    FeatureConfig,
    forecast_holdout,
    ForecastRun,
    mape,
    ModelKind,
    mse,
    recursive_forecast,
    rmse,
)
from forecasting.exceptions import DataError, MetricError
from forecasting.forest import ForestParams
from forecasting.models import FeatureKind, MonthlySeries
from forecasting.svr import KernelSpec, SvrParams


class StubModel:
    """Predicts one column of the row it is given."""

    def __init__(self, feature_names, column=-1):
        self.feature_names = tuple(feature_names)
        self.column = column

    def predict(self, rows):
        return np.asarray(rows, dtype=float)[:, self.column]


def run(predictions, actuals, kind='rf', config='with-climate'):
    return ForecastRun(kind, config, len(actuals), predictions, actuals)


class MetricTests(SimpleTestCase):
    def test_identical_vectors(self):
        a = [3.0, 4.0, 5.0]
        self.assertEqual((mape(a, a), rmse(a, a), mse(a, a)), (0.0, 0.0, 0.0))

    def test_hand_computed_mape(self):
        self.assertAlmostEqual(mape([100.0, 200.0], [110.0, 180.0]), 10.0)

    def test_zero_actual(self):
        with self.assertRaises(MetricError):
            mape([0.0, 1.0], [1.0, 1.0])

    def test_hand_computed_rmse(self):
        self.assertAlmostEqual(rmse([1.0, 2.0, 3.0], [2.0, 2.0, 2.0]), 0.81650, places=5)

    def test_empty_vectors(self):
        with self.assertRaises(MetricError):
            rmse([], [])

    def test_against_scikit_learn(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.uniform(200, 1100, 12)
            p = a + rng.normal(0, 50, 12)
            self.assertAlmostEqual(mse(a, p), mean_squared_error(a, p))
            self.assertAlmostEqual(mape(a, p), 100 * mean_absolute_percentage_error(a, p))
            self.assertAlmostEqual(rmse(a, p) ** 2, mse(a, p), delta=1e-9)

    def test_mape_is_scale_invariant(self):
        a, p = np.array([200.0, 300.0, 400.0]), np.array([210.0, 280.0, 430.0])
        self.assertAlmostEqual(mape(7.5 * a, 7.5 * p), mape(a, p))

    def test_fitness_and_rmse_agree(self):
        self.assertAlmostEqual(np.sqrt(33336.08), 182.58, delta=0.01)
        actuals = np.full(12, 500.0)
        report = evaluate_run(run(actuals + np.sqrt(33336.08), actuals))
        self.assertAlmostEqual(report.mse, 33336.08, places=6)
        self.assertAlmostEqual(report.rmse, 182.58, delta=0.01)

    def test_run_length_must_match_horizon(self):
        with self.assertRaises(MetricError):
            ForecastRun('rf', 'with-climate', 12, np.zeros(11), np.ones(12))


class RecursiveForecastTests(SimpleTestCase):
    def test_lag_one_persistence(self):
        model = StubModel(['temp', 'lag_1'])
        exogenous = np.zeros((12, 1))
        predictions = recursive_forecast(model, [1.0, 5.0, 9.0], exogenous, 12, 1)
        np.testing.assert_array_equal(predictions, [9.0] * 12)

    def test_zero_lags_is_row_wise(self):
        model = StubModel(['temp'], column=0)
        exogenous = np.arange(12.0).reshape(-1, 1)
        predictions = recursive_forecast(model, [1.0, 2.0], exogenous, 12, 0)
        np.testing.assert_array_equal(predictions, model.predict(exogenous))

    def test_lags_read_history_then_predictions(self):
        model = StubModel(['lag_1', 'lag_2', 'lag_3'], column=2)
        predictions = recursive_forecast(model, [10.0, 20.0, 30.0, 40.0], np.empty((6, 0)), 6, 3)
        np.testing.assert_array_equal(predictions, [20.0, 30.0, 40.0, 20.0, 30.0, 40.0])

    def test_missing_exogenous_row(self):
        with self.assertRaises(DataError):
            recursive_forecast(StubModel(['temp']), [1.0], np.zeros((11, 1)), 12, 0)


class HoldoutTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(3)
        months = 40
        season = np.sin(2 * np.pi * np.arange(months) / 12)
        activity = MonthlySeries('2019-01', 100 + 20 * season + rng.normal(0, 2, months), 'hours', 'courses',
                                 FeatureKind.ACTIVITY)
        climate = MonthlySeries('2019-01', 22 + 3 * season, 'degC', 'tavg', FeatureKind.CLIMATE)
        target = MonthlySeries('2019-01', 500 + 4 * activity.values + rng.normal(0, 5, months), 'm3', 'water')
        self.table = join_exogenous(target, [activity, climate])
        self.series = target

    def test_forest_holdout(self):
        forecast, model = forecast_holdout('rf', ForestParams(n_estimators=10, max_depth=60, seed=1), self.table, 3)
        self.assertEqual(forecast.predictions.size, 12)
        self.assertEqual(forecast.feature_config, FeatureConfig.WITH_CLIMATE)
        self.assertEqual(str(forecast.months[-1]), '2022-04')
        self.assertEqual(model.feature_names[-3:], ('lag_1', 'lag_2', 'lag_3'))
        np.testing.assert_array_equal(forecast.actuals, self.series.values[-12:])

    def test_svr_holdout_without_climate(self):
        table = self.table.without_kinds(FeatureKind.CLIMATE)
        forecast, _ = forecast_holdout('svr', SvrParams(kernel=KernelSpec('rbf'), C=100.0, epsilon=0.1), table, 0)
        self.assertEqual(forecast.feature_config, FeatureConfig.WITHOUT_CLIMATE)
        self.assertTrue(np.all(np.isfinite(forecast.predictions)))

    def test_holdout_is_deterministic(self):
        params = ForestParams(n_estimators=5, max_depth=50, seed=4)
        first, _ = forecast_holdout('rf', params, self.table, 2)
        second, _ = forecast_holdout('rf', params, self.table, 2)
        np.testing.assert_array_equal(first.predictions, second.predictions)

    def test_baseline_run(self):
        forecast, params = baseline_run('hw-add', self.series, 12)
        self.assertEqual(forecast.model_kind, ModelKind.HW_ADD)
        self.assertEqual(forecast.predictions.size, 12)
        self.assertEqual(params.period, 12)


class CompareModelsTests(SimpleTestCase):
    def test_perfect_run_is_best(self):
        actuals = np.array([100.0, 200.0, 300.0])
        rows = compare_models([run(actuals + 10, actuals, 'svr'), run(actuals, actuals, 'rf')])
        self.assertEqual([(r.best_mape, r.best_rmse) for r in rows], [(False, False), (True, True)])

    def test_single_run(self):
        rows = compare_models([run([1.0, 2.0], [2.0, 2.0])])
        self.assertEqual(len(rows), 1)
        self.assertTrue(rows[0].best_mape and rows[0].best_rmse)

    def test_six_rows(self):
        actuals = np.linspace(300, 600, 12)
        rng = np.random.default_rng(9)
        kinds = ['rf', 'svr', 'ses', 'brown', 'hw-add', 'hw-mul']
        rows = compare_models([run(actuals + rng.normal(0, 20, 12), actuals, kind) for kind in kinds])
        self.assertEqual([r.model_kind.value for r in rows], kinds)
        rmses = [r.rmse for r in rows]
        self.assertEqual([r.best_rmse for r in rows], [value == min(rmses) for value in rmses])

    def test_mismatched_actuals(self):
        with self.assertRaises(MetricError):
            compare_models([run([1.0, 2.0], [1.0, 2.0]), run([1.0, 2.0], [1.0, 3.0])])

    def test_empty(self):
        with self.assertRaises(MetricError):
            compare_models([])


class LabelTests(SimpleTestCase):
    def test_labels(self):
        self.assertEqual(ModelKind.RF.label, 'RF')
        self.assertEqual(ModelKind('hw-mul').label, 'Holt-Winters Multiplicative')
        self.assertEqual(str(FeatureConfig.WITHOUT_CLIMATE), 'without-climate')
