"""Classical smoothing forecasters used as comparison baselines.

The recursions run over time with numpy arrays of parameters, so one pass scores
a whole parameter lattice at once; a single parameter set is a lattice of one.
"""

from dataclasses import dataclass
from enum import Enum
import logging

import numpy as np

from .exceptions import SmoothingError

logger = logging.getLogger(__name__)

GRID_STEP = 0.05
DEFAULT_PERIOD = 12


class SmoothingMethod(str, Enum):
    SES = 'ses'
    BROWN = 'brown'
    HOLT_WINTERS_ADDITIVE = 'holt-winters-additive'
    HOLT_WINTERS_MULTIPLICATIVE = 'holt-winters-multiplicative'

    def __str__(self):
        return self.value

    @property
    def label(self):
        return {
            SmoothingMethod.SES: 'Exponential Smoothing',
            SmoothingMethod.BROWN: 'Brown',
            SmoothingMethod.HOLT_WINTERS_ADDITIVE: 'Holt-Winters Additive',
            SmoothingMethod.HOLT_WINTERS_MULTIPLICATIVE: 'Holt-Winters Multiplicative',
        }[self]

    @property
    def seasonal(self):
        return self in (SmoothingMethod.HOLT_WINTERS_ADDITIVE, SmoothingMethod.HOLT_WINTERS_MULTIPLICATIVE)


@dataclass(frozen=True)
class SmoothingParams:
    alpha: float
    beta: float = 0.0
    gamma_s: float = 0.0
    period: int = DEFAULT_PERIOD

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise SmoothingError(f'alpha must lie in (0, 1], got {self.alpha}')
        for name in ('beta', 'gamma_s'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SmoothingError(f'{name} must lie in [0, 1], got {value}')
        if self.period < 2:
            raise SmoothingError(f'seasonal period must be at least 2, got {self.period}')


def _series(values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise SmoothingError('cannot smooth an empty series')
    if not np.all(np.isfinite(x)):
        raise SmoothingError('series contains non-finite values')
    return x


def _check_horizon(horizon: int):
    if horizon < 1:
        raise SmoothingError(f'horizon must be positive, got {horizon}')


def _check_preconditions(x: np.ndarray, method: SmoothingMethod, period: int):
    if method is SmoothingMethod.BROWN and x.size < 2:
        raise SmoothingError('Brown smoothing needs at least 2 observations')
    if method.seasonal:
        if x.size < 2 * period:
            raise SmoothingError(f'Holt-Winters needs at least {2 * period} observations, got {x.size}')
        if method is SmoothingMethod.HOLT_WINTERS_MULTIPLICATIVE and np.any(x <= 0):
            raise SmoothingError('multiplicative Holt-Winters needs strictly positive values')


def _smooth(x, method: SmoothingMethod, alpha, beta, gamma, period, horizon):
    """Run a recursion for k parameter sets at once.

    Returns (fitted, forecasts): one-step-ahead in-sample predictions of shape
    (k, n), NaN where no prediction exists yet, and forecasts of shape (k, horizon).
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = np.broadcast_to(np.asarray(beta, dtype=float), alpha.shape)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), alpha.shape)
    n = x.size
    fitted = np.full((alpha.size, n), np.nan)
    steps = np.arange(1, horizon + 1, dtype=float)

    if method is SmoothingMethod.SES:
        level = np.full(alpha.size, x[0])
        for t in range(1, n):
            fitted[:, t] = level
            level = alpha * x[t] + (1.0 - alpha) * level
        return fitted, np.repeat(level[:, None], horizon, axis=1)

    if method is SmoothingMethod.BROWN:
        first = np.full(alpha.size, x[0])
        second = np.full(alpha.size, x[0])
        ratio = alpha / (1.0 - alpha)
        for t in range(1, n):
            fitted[:, t] = 2.0 * first - second + ratio * (first - second)
            first = alpha * x[t] + (1.0 - alpha) * first
            second = alpha * first + (1.0 - alpha) * second
        intercept = 2.0 * first - second
        slope = ratio * (first - second)
        return fitted, intercept[:, None] + slope[:, None] * steps[None, :]

    multiplicative = method is SmoothingMethod.HOLT_WINTERS_MULTIPLICATIVE
    base = x[:period].mean()
    level = np.full(alpha.size, base)
    trend = np.full(alpha.size, (x[period:2 * period].mean() - base) / period)
    initial = x[:period] / base if multiplicative else x[:period] - base
    seasonal = np.tile(initial, (alpha.size, 1))
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        for t in range(period, n):
            slot = t % period
            previous = seasonal[:, slot]
            if multiplicative:
                fitted[:, t] = (level + trend) * previous
                new_level = alpha * x[t] / previous + (1.0 - alpha) * (level + trend)
            else:
                fitted[:, t] = level + trend + previous
                new_level = alpha * (x[t] - previous) + (1.0 - alpha) * (level + trend)
            trend = beta * (new_level - level) + (1.0 - beta) * trend
            if multiplicative:
                seasonal[:, slot] = gamma * x[t] / new_level + (1.0 - gamma) * previous
            else:
                seasonal[:, slot] = gamma * (x[t] - new_level) + (1.0 - gamma) * previous
            level = new_level
        slots = (n + np.arange(horizon)) % period
        path = level[:, None] + trend[:, None] * steps[None, :]
        forecasts = path * seasonal[:, slots] if multiplicative else path + seasonal[:, slots]
    return fitted, forecasts


def _parameters(params: SmoothingParams, method: SmoothingMethod):
    if method is SmoothingMethod.BROWN and params.alpha >= 1.0:
        raise SmoothingError('Brown smoothing is undefined at alpha = 1')
    return params.alpha, params.beta, params.gamma_s


def forecast_method(series, method, params: SmoothingParams, horizon: int) -> np.ndarray:
    """Forecast `horizon` steps past the end of `series` with fixed parameters."""
    method = SmoothingMethod(method)
    x = _series(series)
    _check_horizon(horizon)
    _check_preconditions(x, method, params.period)
    alpha, beta, gamma = _parameters(params, method)
    _, forecasts = _smooth(x, method, alpha, beta, gamma, params.period, horizon)
    if not np.all(np.isfinite(forecasts)):
        raise SmoothingError(f'{method} produced non-finite forecasts')
    return forecasts[0]


def fitted_values(series, method, params: SmoothingParams) -> np.ndarray:
    """One-step-ahead in-sample predictions (NaN where the recursion has not started)."""
    method = SmoothingMethod(method)
    x = _series(series)
    _check_preconditions(x, method, params.period)
    alpha, beta, gamma = _parameters(params, method)
    fitted, _ = _smooth(x, method, alpha, beta, gamma, params.period, 1)
    return fitted[0]


def ses_forecast(series, alpha: float, horizon: int) -> np.ndarray:
    return forecast_method(series, SmoothingMethod.SES, SmoothingParams(alpha=alpha), horizon)


def brown_forecast(series, alpha: float, horizon: int) -> np.ndarray:
    return forecast_method(series, SmoothingMethod.BROWN, SmoothingParams(alpha=alpha), horizon)


def holt_winters_forecast(series, params: SmoothingParams, mode: str, horizon: int) -> np.ndarray:
    if mode not in ('additive', 'multiplicative'):
        raise SmoothingError(f"mode must be 'additive' or 'multiplicative', got {mode!r}")
    return forecast_method(series, SmoothingMethod(f'holt-winters-{mode}'), params, horizon)


def parameter_grid(method: SmoothingMethod):
    """Lattice in lexicographic (alpha, beta, gamma) order, smallest first."""
    alphas = np.round(np.arange(1, round(1 / GRID_STEP) + 1) * GRID_STEP, 10)
    unit = np.round(np.arange(0, round(1 / GRID_STEP) + 1) * GRID_STEP, 10)
    if method is SmoothingMethod.BROWN:
        alphas = alphas[alphas < 1.0]
    if not method.seasonal:
        return alphas, np.zeros_like(alphas), np.zeros_like(alphas)
    grid = np.meshgrid(alphas, unit, unit, indexing='ij')
    return tuple(axis.ravel() for axis in grid)


def fit_smoothing(series, method, horizon: int = 12, period: int = DEFAULT_PERIOD) -> SmoothingParams:
    """Grid-search the parameters minimising in-sample one-step MSE.

    `horizon` is only checked for validity; selection never looks past the
    series. Ties (within floating-point noise) go to the smallest parameters.
    """
    method = SmoothingMethod(method)
    x = _series(series)
    _check_horizon(horizon)
    _check_preconditions(x, method, period)
    alpha, beta, gamma = parameter_grid(method)
    fitted, _ = _smooth(x, method, alpha, beta, gamma, period, 1)
    start = period if method.seasonal else 1
    if start >= x.size:
        raise SmoothingError(f'{method} needs more than {start} observations to score parameters')
    with np.errstate(over='ignore', invalid='ignore'):
        mse = np.mean((fitted[:, start:] - x[start:]) ** 2, axis=1)
    mse = np.where(np.isfinite(mse), mse, np.inf)
    best = float(mse.min())
    if not np.isfinite(best):
        raise SmoothingError(f'{method} diverged for every parameter set')
    index = int(np.flatnonzero(np.isclose(mse, best, rtol=1e-12, atol=1e-12))[0])
    params = SmoothingParams(alpha=float(alpha[index]), beta=float(beta[index]),
                             gamma_s=float(gamma[index]), period=period)
    logger.debug('%s grid search chose %s (in-sample MSE %.6g)', method, params, best)
    return params
