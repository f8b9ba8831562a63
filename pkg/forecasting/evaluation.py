"""Multi-step forecasting and error metrics.

`forecast_holdout` is the single path from (family, params, lags) to a scored
holdout forecast: the optimizer's fitness and the `forecast` command both go
through it, so a reported fitness is always the square of the reported RMSE.
"""

from dataclasses import dataclass
from enum import Enum
import logging
import math
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from . import baselines
from .data import add_lag_features, train_test_split
from .exceptions import DataError, MetricError, ModelError
from .forest import ForestParams, fit_forest
from .models import FeatureKind, FeatureTable, MonthlySeries
from .svr import SvrParams, fit_svr

logger = logging.getLogger(__name__)

CLIMATE_CAVEAT = (
    'Climate columns over the holdout are recorded values. A deployed forecaster '
    'would need forecasts of future weather, which are hard to obtain in advance.'
)


class ModelKind(str, Enum):
    RF = 'rf'
    SVR = 'svr'
    SES = 'ses'
    BROWN = 'brown'
    HW_ADD = 'hw-add'
    HW_MUL = 'hw-mul'

    def __str__(self):
        return self.value

    @property
    def label(self):
        if self in (ModelKind.RF, ModelKind.SVR):
            return self.value.upper()
        return self.smoothing_method.label

    @property
    def smoothing_method(self) -> baselines.SmoothingMethod:
        return {
            ModelKind.SES: baselines.SmoothingMethod.SES,
            ModelKind.BROWN: baselines.SmoothingMethod.BROWN,
            ModelKind.HW_ADD: baselines.SmoothingMethod.HOLT_WINTERS_ADDITIVE,
            ModelKind.HW_MUL: baselines.SmoothingMethod.HOLT_WINTERS_MULTIPLICATIVE,
        }[self]


BASELINE_KINDS = (ModelKind.SES, ModelKind.BROWN, ModelKind.HW_ADD, ModelKind.HW_MUL)


class FeatureConfig(str, Enum):
    WITH_CLIMATE = 'with-climate'
    WITHOUT_CLIMATE = 'without-climate'

    def __str__(self):
        return self.value

    @property
    def include_climate(self):
        return self is FeatureConfig.WITH_CLIMATE


def _pair(actuals, predictions):
    a = np.asarray(actuals, dtype=float)
    p = np.asarray(predictions, dtype=float)
    if a.shape != p.shape or a.ndim != 1:
        raise MetricError(f'actuals {a.shape} and predictions {p.shape} differ in shape')
    if a.size == 0:
        raise MetricError('cannot score empty vectors')
    return a, p


def mse(actuals, predictions) -> float:
    a, p = _pair(actuals, predictions)
    return float(np.mean((a - p) ** 2))


def rmse(actuals, predictions) -> float:
    return math.sqrt(mse(actuals, predictions))


def mape(actuals, predictions) -> float:
    """Mean absolute percentage error, in percent."""
    a, p = _pair(actuals, predictions)
    if np.any(a == 0):
        raise MetricError('MAPE is undefined when an actual value is zero')
    return float(100.0 * np.mean(np.abs(a - p) / np.abs(a)))


@dataclass(frozen=True)
class MetricReport:
    mape_percent: float
    rmse: float
    mse: float


@dataclass(frozen=True, eq=False)
class ForecastRun:
    model_kind: ModelKind
    feature_config: FeatureConfig
    horizon: int
    predictions: np.ndarray
    actuals: np.ndarray
    months: Optional[pd.PeriodIndex] = None
    series: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'model_kind', ModelKind(self.model_kind))
        object.__setattr__(self, 'feature_config', FeatureConfig(self.feature_config))
        object.__setattr__(self, 'predictions', np.asarray(self.predictions, dtype=float))
        object.__setattr__(self, 'actuals', np.asarray(self.actuals, dtype=float))
        if self.predictions.size != self.horizon or self.actuals.size != self.horizon:
            raise MetricError(
                f'{self.predictions.size} predictions and {self.actuals.size} actuals for horizon {self.horizon}'
            )


def evaluate_run(run: ForecastRun) -> MetricReport:
    error = mse(run.actuals, run.predictions)
    return MetricReport(mape_percent=mape(run.actuals, run.predictions), rmse=math.sqrt(error), mse=error)


def recursive_forecast(model, history, future_exogenous, horizon: int, lags: int) -> np.ndarray:
    """Predict `horizon` steps, feeding earlier predictions back as lag features.

    Lag k at step t reads the recorded history when t - k falls before the
    forecast origin and the prediction made at step t - k otherwise. Lag
    columns follow the exogenous columns, as `add_lag_features` lays them out.
    """
    if isinstance(history, MonthlySeries):
        history = history.values
    history = np.asarray(history, dtype=float)
    if isinstance(future_exogenous, FeatureTable):
        future_exogenous = future_exogenous.features
    exogenous = np.asarray(future_exogenous, dtype=float)
    if exogenous.ndim == 1:
        exogenous = exogenous.reshape(-1, 1) if exogenous.size else exogenous.reshape(0, 0)
    if horizon < 1:
        raise DataError(f'horizon must be positive, got {horizon}')
    if lags < 0:
        raise DataError(f'lags must be non-negative, got {lags}')
    if exogenous.shape[0] < horizon:
        raise DataError(f'{exogenous.shape[0]} exogenous rows for a horizon of {horizon}')
    if history.size < lags:
        raise DataError(f'{history.size} history values cannot seed {lags} lags')
    expected = len(model.feature_names)
    if exogenous.shape[1] + lags != expected:
        raise ModelError(f'model expects {expected} features, got {exogenous.shape[1]} exogenous + {lags} lags')

    predictions = np.empty(horizon)
    for step in range(horizon):
        lagged = [history[step - k] if step - k < 0 else predictions[step - k] for k in range(1, lags + 1)]
        row = np.concatenate([exogenous[step], lagged])
        predictions[step] = float(model.predict(row.reshape(1, -1))[0])
    return predictions


def fit_model(family: ModelKind, params, table: FeatureTable, n_jobs: int = 1):
    family = ModelKind(family)
    if family is ModelKind.RF:
        if not isinstance(params, ForestParams):
            raise ModelError(f'random forest needs ForestParams, got {type(params).__name__}')
        return fit_forest(table, params, n_jobs=n_jobs)
    if family is ModelKind.SVR:
        if not isinstance(params, SvrParams):
            raise ModelError(f'SVR needs SvrParams, got {type(params).__name__}')
        return fit_svr(table, params)
    raise ModelError(f'{family} is not a trainable model family')


def feature_config_of(table: FeatureTable) -> FeatureConfig:
    if table.columns_of(FeatureKind.CLIMATE):
        return FeatureConfig.WITH_CLIMATE
    return FeatureConfig.WITHOUT_CLIMATE


def forecast_holdout(family, params, table: FeatureTable, lags: int, horizon: int = 12, n_jobs: int = 1):
    """Fit on everything before the holdout and forecast the last `horizon` months.

    Args:
        family: `rf` or `svr`.
        params: ForestParams or SvrParams matching the family.
        table: Joined feature table without lag columns.
        lags: Number of lagged-target columns to add.
        horizon: Holdout length.

    Returns:
        (ForecastRun, fitted model)
    """
    lagged = add_lag_features(table, lags)
    split = train_test_split(lagged, horizon)
    model = fit_model(family, params, split.train, n_jobs=n_jobs)
    exogenous = split.test.features[[column for column in split.test.column_names
                                     if split.test.feature_kinds[column] is not FeatureKind.LAG]]
    history = table.target[:len(table) - horizon]
    predictions = recursive_forecast(model, history, exogenous, horizon, lags)
    run = ForecastRun(
        model_kind=ModelKind(family),
        feature_config=feature_config_of(table),
        horizon=horizon,
        predictions=predictions,
        actuals=split.test.target,
        months=split.test.months,
        series=table.name,
    )
    return run, model


def baseline_run(kind, series: MonthlySeries, horizon: int = 12, period: int = baselines.DEFAULT_PERIOD):
    """Fit a smoothing baseline on all but the last `horizon` months and forecast them."""
    kind = ModelKind(kind)
    if len(series) <= horizon:
        raise DataError(f'series {series.name!r} has {len(series)} months for a horizon of {horizon}')
    train = series.values[:-horizon]
    params = baselines.fit_smoothing(train, kind.smoothing_method, horizon, period)
    predictions = baselines.forecast_method(train, kind.smoothing_method, params, horizon)
    run = ForecastRun(
        model_kind=kind,
        feature_config=FeatureConfig.WITHOUT_CLIMATE,
        horizon=horizon,
        predictions=predictions,
        actuals=series.values[-horizon:],
        months=series.months[-horizon:],
        series=series.name,
    )
    return run, params


@dataclass(frozen=True)
class ComparisonRow:
    model_kind: ModelKind
    feature_config: FeatureConfig
    mape_percent: float
    rmse: float
    best_mape: bool
    best_rmse: bool


def compare_models(runs: Sequence[ForecastRun]) -> list:
    """One row per run with the lowest MAPE and RMSE flagged (ties all flagged)."""
    if not runs:
        raise MetricError('nothing to compare')
    reference = runs[0]
    for run in runs[1:]:
        if run.horizon != reference.horizon or not np.array_equal(run.actuals, reference.actuals):
            raise MetricError(f'{run.model_kind}/{run.feature_config} was scored on different actuals')
    reports = [evaluate_run(run) for run in runs]
    best_mape = min(report.mape_percent for report in reports)
    best_rmse = min(report.rmse for report in reports)
    return [
        ComparisonRow(
            model_kind=run.model_kind,
            feature_config=run.feature_config,
            mape_percent=report.mape_percent,
            rmse=report.rmse,
            best_mape=report.mape_percent == best_mape,
            best_rmse=report.rmse == best_rmse,
        )
        for run, report in zip(runs, reports)
    ]
