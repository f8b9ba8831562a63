"""Exploratory hypothesis tests: trend, seasonality, stationarity and correlograms.

Every test returns a `TestResult` whose conclusion follows deterministically from
its p-value (or, for ADF and KPSS, its statistic against a tabulated critical
value) at the requested significance level.
"""

from dataclasses import dataclass, field
from enum import Enum
import logging
import math
from typing import Callable, Dict, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .exceptions import DiagnosticError, ForecastingError
from .models import MonthlySeries

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.05
SIGNIFICANCE_LEVELS = (0.01, 0.05, 0.10)


class Conclusion(str, Enum):
    TREND = 'trend'
    NO_TREND = 'no-trend'
    SEASONAL = 'seasonal'
    NO_SEASONALITY = 'no-seasonality'
    STATIONARY = 'stationary'
    NON_STATIONARY = 'non-stationary'
    RANDOM = 'random'
    NON_RANDOM = 'non-random'

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class TestResult:
    test_name: str
    statistic: float
    p_value: Optional[float]
    alpha: float
    conclusion: Conclusion
    critical_values: Dict[str, float] = field(default_factory=dict)
    details: Dict[str, float] = field(default_factory=dict)

    # keeps unittest/pytest from collecting this as a test case
    __test__ = False

    def __post_init__(self):
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise DiagnosticError(f'{self.test_name}: p-value {self.p_value} outside [0, 1]')


@dataclass(frozen=True, eq=False)
class Correlogram:
    lags: np.ndarray
    coefficients: np.ndarray
    confidence_band: float

    def significant_lags(self) -> list:
        """Lags (excluding lag 0) whose coefficient leaves the confidence band."""
        return [int(lag) for lag, value in zip(self.lags, self.coefficients)
                if lag > 0 and abs(value) > self.confidence_band]


def _as_array(series) -> np.ndarray:
    if isinstance(series, MonthlySeries):
        series = series.values
    values = np.asarray(series, dtype=float)
    if values.ndim != 1:
        raise DiagnosticError('expected a one-dimensional series')
    if not np.all(np.isfinite(values)):
        raise DiagnosticError('series contains non-finite values')
    return values


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 1.0:
        raise DiagnosticError(f'alpha must lie in (0, 1), got {alpha}')


def _rejects(p_value: float, alpha: float) -> bool:
    return p_value < alpha


def runs_test(series, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Wald-Wolfowitz runs test around the median (median ties dropped)."""
    _check_alpha(alpha)
    x = _as_array(series)
    if x.size < 10:
        raise DiagnosticError(f'runs test needs at least 10 observations, got {x.size}')
    if np.all(x == x[0]):
        raise DiagnosticError('degenerate series: all values are equal')
    median = np.median(x)
    signs = x[x != median] > median
    n1 = int(signs.sum())
    n2 = int(signs.size - n1)
    if n1 == 0 or n2 == 0:
        raise DiagnosticError('degenerate series: every value lies on one side of the median')
    runs = 1 + int(np.count_nonzero(signs[1:] != signs[:-1]))
    n = n1 + n2
    mean = 2.0 * n1 * n2 / n + 1.0
    variance = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0))
    z = (runs - mean) / math.sqrt(variance) if variance > 0 else 0.0
    p_value = float(min(1.0, 2.0 * stats.norm.sf(abs(z))))
    conclusion = Conclusion.NON_RANDOM if _rejects(p_value, alpha) else Conclusion.RANDOM
    return TestResult('Wald-Wolfowitz runs', float(z), p_value, alpha, conclusion,
                      details={'runs': runs, 'n_above': n1, 'n_below': n2})


def mann_kendall_statistic(series) -> int:
    """S = sum over i < j of sign(x_j - x_i)."""
    x = _as_array(series)
    upper = np.triu_indices(x.size, k=1)
    return int(np.sign(x[upper[1]] - x[upper[0]]).sum())


def mann_kendall(series, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Mann-Kendall monotonic trend test with tie-corrected variance."""
    _check_alpha(alpha)
    x = _as_array(series)
    n = x.size
    if n < 8:
        raise DiagnosticError(f'Mann-Kendall needs at least 8 observations, got {n}')
    s = mann_kendall_statistic(x)
    _, ties = np.unique(x, return_counts=True)
    variance = (n * (n - 1) * (2 * n + 5) - np.sum(ties * (ties - 1) * (2 * ties + 5))) / 18.0
    if s > 0:
        z = (s - 1) / math.sqrt(variance)
    elif s < 0:
        z = (s + 1) / math.sqrt(variance)
    else:
        z = 0.0
    p_value = float(min(1.0, 2.0 * stats.norm.sf(abs(z))))
    conclusion = Conclusion.TREND if _rejects(p_value, alpha) else Conclusion.NO_TREND
    return TestResult('Mann-Kendall', float(s), p_value, alpha, conclusion,
                      details={'z': float(z), 'variance': float(variance)})


def cox_stuart(series, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Cox-Stuart sign test pairing each value with the one half a series later."""
    _check_alpha(alpha)
    x = _as_array(series)
    n = x.size
    if n < 6:
        raise DiagnosticError(f'Cox-Stuart needs at least 6 observations, got {n}')
    offset = math.ceil(n / 2)
    half = n // 2
    differences = x[offset:offset + half] - x[:half]
    differences = differences[differences != 0]
    if differences.size == 0:
        raise DiagnosticError('every Cox-Stuart pair is tied')
    positives = int(np.count_nonzero(differences > 0))
    p_value = float(stats.binomtest(positives, differences.size, 0.5).pvalue)
    conclusion = Conclusion.TREND if _rejects(p_value, alpha) else Conclusion.NO_TREND
    return TestResult('Cox-Stuart', float(positives), p_value, alpha, conclusion,
                      details={'pairs': int(differences.size), 'positive_pairs': positives})


def kruskal_wallis_groups(groups: Sequence[Sequence[float]], alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Kruskal-Wallis H over explicit groups (groups with fewer than 2 values ignored)."""
    _check_alpha(alpha)
    eligible = [np.asarray(group, dtype=float) for group in groups if len(group) >= 2]
    if len(eligible) < 2:
        raise DiagnosticError('Kruskal-Wallis needs at least two groups with two observations each')
    pooled = np.concatenate(eligible)
    if np.all(pooled == pooled[0]):
        h_statistic, p_value = 0.0, 1.0
    else:
        h_statistic, p_value = stats.kruskal(*eligible)
    conclusion = Conclusion.SEASONAL if _rejects(p_value, alpha) else Conclusion.NO_SEASONALITY
    return TestResult('Kruskal-Wallis', float(h_statistic), float(p_value), alpha, conclusion,
                      details={'groups': len(eligible), 'df': len(eligible) - 1})


def kruskal_wallis_seasonality(series: MonthlySeries, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Seasonality test grouping observations by calendar month."""
    by_month = series.to_series().groupby(series.months.month)
    return kruskal_wallis_groups([group.to_numpy() for _, group in by_month], alpha)


# Dickey-Fuller tau critical values, constant and no trend, by sample size.
_DF_SAMPLE_SIZES = np.array([25.0, 50.0, 100.0, 250.0, 500.0, np.inf])
_DF_CRITICAL = {
    0.01: np.array([-3.75, -3.58, -3.51, -3.46, -3.44, -3.43]),
    0.05: np.array([-3.00, -2.93, -2.89, -2.88, -2.87, -2.86]),
    0.10: np.array([-2.63, -2.60, -2.58, -2.57, -2.57, -2.57]),
}
# MacKinnon's response-surface p-value polynomials for the constant-only case.
_TAU_MAX, _TAU_MIN, _TAU_STAR = 2.74, -18.83, -1.61
_TAU_SMALL_P = (2.1659, 1.4412, 0.038269)
_TAU_LARGE_P = (1.7339, 0.93202, -0.12745, -0.010368)

_KPSS_CRITICAL = {0.10: 0.347, 0.05: 0.463, 0.025: 0.574, 0.01: 0.739}


def level_key(alpha: float) -> str:
    return f'{alpha * 100:g}%'


def _table_alpha(alpha: float, table) -> float:
    for level in table:
        if math.isclose(alpha, level):
            return level
    raise DiagnosticError(f'no tabulated critical value at alpha {alpha}; use one of {sorted(table)}')


def dickey_fuller_critical_values(nobs: int) -> Dict[float, float]:
    """Critical values interpolated in 1/n between the tabulated sample sizes."""
    inverse = 1.0 / _DF_SAMPLE_SIZES[::-1]
    return {level: float(np.interp(1.0 / nobs, inverse, values[::-1])) for level, values in _DF_CRITICAL.items()}


def mackinnon_p_value(statistic: float) -> float:
    if statistic > _TAU_MAX:
        return 1.0
    if statistic < _TAU_MIN:
        return 0.0
    coefficients = _TAU_SMALL_P if statistic <= _TAU_STAR else _TAU_LARGE_P
    return float(stats.norm.cdf(np.polyval(coefficients[::-1], statistic)))


def schwert_max_lag(nobs: int) -> int:
    return int(math.floor(12.0 * (nobs / 100.0) ** 0.25))


def _adf_design(x: np.ndarray, lags: int, start: int):
    """Regressors [x_{t-1}, dx_{t-1}..dx_{t-lags}, 1] and dx_t for t >= start."""
    dx = np.diff(x)
    rows = np.arange(start, dx.size)
    columns = [x[rows]] + [dx[rows - k] for k in range(1, lags + 1)] + [np.ones(rows.size)]
    return np.column_stack(columns), dx[rows]


def _ols(design: np.ndarray, response: np.ndarray):
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise DiagnosticError('singular ADF regression matrix')
    beta, _, _, _ = np.linalg.lstsq(design, response, rcond=None)
    residuals = response - design @ beta
    return beta, residuals


def adf_test(series, max_lag: Union[int, str] = 'auto', alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Augmented Dickey-Fuller unit-root test with a constant.

    Args:
        series: The values to test.
        max_lag: Number of lagged differences, or 'auto' for the Schwert order
            floor(12 (n/100)^0.25), capped at n/2 - 2.
        alpha: One of the tabulated levels 0.01, 0.05, 0.10.

    Returns:
        TestResult: t-statistic on x_{t-1}; stationary iff it falls below the
        critical value at `alpha`. The p-value is MacKinnon's approximation and
        is informative only.
    """
    _check_alpha(alpha)
    level = _table_alpha(alpha, _DF_CRITICAL)
    x = _as_array(series)
    n = x.size
    if n < 20:
        raise DiagnosticError(f'ADF needs at least 20 observations, got {n}')

    if max_lag == 'auto':
        lags = min(schwert_max_lag(n), n // 2 - 2)
    else:
        lags = int(max_lag)
        if lags < 0 or lags > n // 2 - 2:
            raise DiagnosticError(f'ADF lag {lags} out of range for {n} observations')

    design, response = _adf_design(x, lags, lags)
    beta, residuals = _ols(design, response)
    dof = response.size - design.shape[1]
    if dof <= 0:
        raise DiagnosticError('ADF regression has no residual degrees of freedom')
    sigma2 = float(residuals @ residuals) / dof
    covariance = sigma2 * np.linalg.inv(design.T @ design)
    if covariance[0, 0] <= 0:
        raise DiagnosticError('degenerate ADF regression (zero residual variance)')
    statistic = float(beta[0] / math.sqrt(covariance[0, 0]))

    critical = dickey_fuller_critical_values(response.size)
    stationary = statistic < critical[level]
    return TestResult(
        'Augmented Dickey-Fuller', statistic, mackinnon_p_value(statistic), alpha,
        Conclusion.STATIONARY if stationary else Conclusion.NON_STATIONARY,
        critical_values={level_key(key): value for key, value in critical.items()},
        details={'lags': lags, 'nobs': int(response.size)},
    )


def newey_west_bandwidth(nobs: int) -> int:
    """Bartlett bandwidth floor(4 (n/100)^(2/9)) of Newey and West."""
    return int(min(nobs - 1, math.floor(4.0 * (nobs / 100.0) ** (2.0 / 9.0))))


def kpss_test(series, bandwidth: Union[int, str] = 'auto', alpha: float = DEFAULT_ALPHA) -> TestResult:
    """KPSS level-stationarity test with a Bartlett long-run variance."""
    _check_alpha(alpha)
    level = _table_alpha(alpha, _KPSS_CRITICAL)
    x = _as_array(series)
    n = x.size
    if n < 20:
        raise DiagnosticError(f'KPSS needs at least 20 observations, got {n}')
    residuals = x - x.mean()
    if not np.any(np.abs(residuals) > 0):
        raise DiagnosticError('zero long-run variance')
    lags = newey_west_bandwidth(n) if bandwidth == 'auto' else int(bandwidth)
    if not 0 <= lags < n:
        raise DiagnosticError(f'KPSS bandwidth {lags} out of range for {n} observations')

    long_run = float(residuals @ residuals) / n
    for lag in range(1, lags + 1):
        weight = 1.0 - lag / (lags + 1.0)
        long_run += 2.0 * weight * float(residuals[lag:] @ residuals[:n - lag]) / n
    if long_run <= 0:
        raise DiagnosticError('zero long-run variance')
    partial = np.cumsum(residuals)
    statistic = float(partial @ partial) / (n * n * long_run)

    levels = sorted(_KPSS_CRITICAL, reverse=True)
    critical = np.array([_KPSS_CRITICAL[key] for key in levels])
    p_value = float(np.interp(statistic, critical, levels))
    stationary = statistic < _KPSS_CRITICAL[level]
    return TestResult(
        'KPSS', statistic, p_value, alpha,
        Conclusion.STATIONARY if stationary else Conclusion.NON_STATIONARY,
        critical_values={level_key(key): value for key, value in _KPSS_CRITICAL.items()},
        details={'bandwidth': lags},
    )


def acf(series, max_lag: int) -> Correlogram:
    """Sample autocorrelations (1/n normalisation) for lags 0..max_lag."""
    x = _as_array(series)
    n = x.size
    if not 0 <= max_lag < n:
        raise DiagnosticError(f'max_lag must lie in [0, {n}), got {max_lag}')
    centered = x - x.mean()
    denominator = float(centered @ centered)
    if denominator <= 0:
        raise DiagnosticError('zero-variance series has no autocorrelation')
    coefficients = np.array([float(centered[k:] @ centered[:n - k]) / denominator for k in range(max_lag + 1)])
    return Correlogram(np.arange(max_lag + 1), np.clip(coefficients, -1.0, 1.0), 1.96 / math.sqrt(n))


def pacf(series, max_lag: int) -> Correlogram:
    """Partial autocorrelations for lags 1..max_lag by Durbin-Levinson."""
    x = _as_array(series)
    n = x.size
    if not 1 <= max_lag < n / 2:
        raise DiagnosticError(f'max_lag must lie in [1, {n / 2:g}), got {max_lag}')
    rho = acf(x, max_lag).coefficients
    partial = np.zeros(max_lag + 1)
    phi = np.zeros(max_lag + 1)
    partial[1] = phi[1] = rho[1]
    for k in range(2, max_lag + 1):
        numerator = rho[k] - np.dot(phi[1:k], rho[k - 1:0:-1])
        denominator = 1.0 - np.dot(phi[1:k], rho[1:k])
        phi_kk = numerator / denominator if denominator > 0 else 0.0
        phi[1:k] = phi[1:k] - phi_kk * phi[k - 1:0:-1]
        phi[k] = phi_kk
        partial[k] = phi_kk
    return Correlogram(np.arange(1, max_lag + 1), np.clip(partial[1:], -1.0, 1.0), 1.96 / math.sqrt(n))


def ljung_box(series, lags: Optional[int] = None, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Ljung-Box portmanteau test that the first `lags` autocorrelations are jointly zero."""
    _check_alpha(alpha)
    x = _as_array(series)
    n = x.size
    if n < 10:
        raise DiagnosticError(f'Ljung-Box needs at least 10 observations, got {n}')
    lags = min(10, n // 5) if lags is None else int(lags)
    if not 1 <= lags < n:
        raise DiagnosticError(f'Ljung-Box lag {lags} out of range for {n} observations')
    rho = acf(x, lags).coefficients[1:]
    statistic = float(n * (n + 2) * np.sum(rho ** 2 / (n - np.arange(1, lags + 1))))
    p_value = float(stats.chi2.sf(statistic, lags))
    conclusion = Conclusion.NON_RANDOM if _rejects(p_value, alpha) else Conclusion.RANDOM
    return TestResult('Ljung-Box', statistic, p_value, alpha, conclusion, details={'lags': lags})


BATTERY: Dict[str, Callable] = {
    'runs': runs_test,
    'mann_kendall': mann_kendall,
    'cox_stuart': cox_stuart,
    'kruskal_wallis': kruskal_wallis_seasonality,
    'adf': adf_test,
    'kpss': kpss_test,
    'ljung_box': ljung_box,
}

TEST_LABELS = {
    'runs': 'Wald-Wolfowitz (runs)',
    'mann_kendall': 'Mann-Kendall',
    'cox_stuart': 'Cox-Stuart',
    'kruskal_wallis': 'Kruskal-Wallis',
    'adf': 'Augmented Dickey-Fuller',
    'kpss': 'KPSS',
    'ljung_box': 'Ljung-Box',
}


@dataclass
class BatteryReport:
    series: str
    results: Dict[str, TestResult] = field(default_factory=dict)
    errors: Dict[str, str] = field(default_factory=dict)
    acf: Optional[Correlogram] = None
    pacf: Optional[Correlogram] = None


def run_battery(series: MonthlySeries, alpha: float = DEFAULT_ALPHA, max_lag: int = 20) -> BatteryReport:
    """Run every test on one series; a failing test is recorded, the rest still run."""
    report = BatteryReport(series=series.name)
    for name, test in BATTERY.items():
        try:
            argument = series if name == 'kruskal_wallis' else series.values
            report.results[name] = test(argument, alpha=alpha)
        except ForecastingError as exc:
            logger.warning('%s on %s failed: %s', name, series.name, exc)
            report.errors[name] = str(exc)
    n = len(series)
    try:
        report.acf = acf(series.values, min(max_lag, n - 1))
        report.pacf = pacf(series.values, max(1, min(max_lag, (n - 1) // 2)))
    except ForecastingError as exc:
        logger.warning('correlograms on %s failed: %s', series.name, exc)
        report.errors['correlogram'] = str(exc)
    return report
