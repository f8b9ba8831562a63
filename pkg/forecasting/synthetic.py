"""Seeded synthetic campus dataset standing in for private invoices.

Two monthly consumption targets (water in m3, electricity in kWh) are driven by
hourly institutional activity and daily weather, including a long suspension of
on-site activity from March 2020 to September 2021. Target moments are
calibrated to the observed campus summary statistics and clamped to the
observed ranges.
"""

from dataclasses import dataclass
import logging
from pathlib import Path
from typing import Dict, Union

import numpy as np
import pandas as pd
import yaml

from .data import sidecar_path

logger = logging.getLogger(__name__)

FIRST_DAY = '2018-08-01'
LAST_DAY = '2023-10-31'
SUSPENSION = ('2020-03-16', '2021-09-30')
HOLIDAYS = ('01-01', '04-21', '05-01', '09-07', '10-12', '11-02', '11-15', '12-25')
# share of the normal class load by calendar month; January and July are vacations
TERM_LOAD = {1: 0.15, 2: 0.55, 3: 1.0, 4: 1.0, 5: 1.0, 6: 0.95, 7: 0.4, 8: 1.0, 9: 1.0, 10: 1.0, 11: 1.0, 12: 0.6}


@dataclass(frozen=True)
class TargetProfile:
    name: str
    unit: str
    first_month: str
    mean: float
    std: float
    low: float
    high: float
    climate_weight: float


WATER = TargetProfile('water', 'm3', '2018-08', 502.03, 207.01, 206.0, 1074.0, 0.35)
ELECTRICITY = TargetProfile('electricity', 'kWh', '2018-09', 15828.60, 4733.04, 7252.0, 25339.0, 0.6)
PROFILES = (WATER, ELECTRICITY)


@dataclass(frozen=True)
class SyntheticDataset:
    targets: Dict[str, Path]
    activity: Path
    climate: Path


def _write(frame: pd.DataFrame, path: Path, columns: dict, frequency: str, locale: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    delimiter, decimal = (';', ',') if locale == 'comma' else (',', '.')
    frame.to_csv(path, index=False, sep=delimiter, decimal=decimal, float_format='%.2f', lineterminator='\n')
    sidecar = {'frequency': frequency, 'columns': columns}
    sidecar_path(path).write_text(yaml.safe_dump(sidecar, sort_keys=False), encoding='utf-8')


def hourly_activity(rng: np.random.Generator) -> pd.DataFrame:
    hours = pd.date_range(FIRST_DAY, pd.Timestamp(LAST_DAY) + pd.Timedelta(hours=23), freq='h')
    day = hours.normalize()
    hour = hours.hour.to_numpy()
    weekday = hours.dayofweek.to_numpy()
    load = pd.Series(hours.month).map(TERM_LOAD).to_numpy(dtype=float)
    suspended = np.asarray((day >= SUSPENSION[0]) & (day <= SUSPENSION[1]))
    holiday = np.isin(np.asarray(hours.strftime('%m-%d')), HOLIDAYS)
    weekday_window = (weekday < 5) & (hour >= 7) & (hour < 23)
    saturday_window = (weekday == 5) & (hour >= 8) & (hour < 12)
    teaching = (weekday_window | saturday_window) & ~holiday & ~suspended

    classes = np.where(weekday_window, 12.0, 3.0) * load
    frame = pd.DataFrame({
        'timestamp': hours.strftime('%Y-%m-%dT%H:%M'),
        'courses': np.where(teaching, rng.poisson(classes), 0),
        'holiday_hours': ((weekday_window | saturday_window) & holiday).astype(int),
        'suspended_hours': ((weekday_window | saturday_window) & suspended & ~holiday).astype(int),
        'various_hours': np.where(teaching, rng.binomial(1, 0.05, size=hours.size), 0),
    })
    return frame


def daily_climate(rng: np.random.Generator) -> pd.DataFrame:
    days = pd.date_range(FIRST_DAY, LAST_DAY, freq='D')
    # southern hemisphere: warmest in mid January
    season = np.cos(2.0 * np.pi * (days.dayofyear.to_numpy() - 15) / 365.25)
    tavg = 21.0 + 4.5 * season + rng.normal(0.0, 1.5, days.size)
    tmax = tavg + 5.0 + rng.gamma(2.0, 0.8, days.size)
    tmin = tavg - 5.0 - rng.gamma(2.0, 0.8, days.size)
    wet = rng.random(days.size) < 0.3 + 0.25 * (season + 1.0) / 2.0
    precipitation = np.where(wet, rng.gamma(0.6, 10.0, days.size), 0.0)
    return pd.DataFrame({
        'timestamp': days.strftime('%Y-%m-%d'),
        'tmin': np.round(tmin, 2),
        'tmax': np.round(tmax, 2),
        'tavg': np.round(tavg, 2),
        'precipitation': np.round(precipitation, 2),
    })


def _standardised(values: pd.Series) -> pd.Series:
    return (values - values.mean()) / values.std(ddof=1)


def monthly_target(profile: TargetProfile, activity: pd.DataFrame, climate: pd.DataFrame,
                   rng: np.random.Generator) -> pd.DataFrame:
    """Calibrate a consumption series from monthly activity and temperature."""
    hours = pd.to_datetime(activity['timestamp'])
    daily_courses = activity.groupby(hours.dt.normalize())['courses'].mean()
    courses = daily_courses.groupby(daily_courses.index.to_period('M')).sum()
    temperature = climate.groupby(pd.to_datetime(climate['timestamp']).dt.to_period('M'))['tavg'].mean()

    months = pd.period_range(profile.first_month, LAST_DAY, freq='M')
    drivers = _standardised(courses.loc[months]) + profile.climate_weight * _standardised(temperature.loc[months])
    raw = drivers.to_numpy() + rng.normal(0.0, 0.3, len(months))
    values = profile.mean + profile.std * (raw - raw.mean()) / raw.std(ddof=1)
    values = np.round(np.clip(values, profile.low, profile.high), 2)
    return pd.DataFrame({'timestamp': months.strftime('%Y-%m-01'), profile.name: values})


def generate_synthetic(seed: int, directory: Union[str, Path], locale: str = 'period') -> SyntheticDataset:
    """Write the targets, hourly activity and daily climate CSVs with sidecars.

    The same seed always produces byte-identical files.
    """
    directory = Path(directory)
    rng = np.random.default_rng(seed)
    activity = hourly_activity(rng)
    climate = daily_climate(rng)

    activity_path = directory / 'activity.csv'
    _write(activity, activity_path, {
        column: {'kind': 'activity', 'unit': 'hours', 'monthly': 'sum'}
        for column in ('courses', 'holiday_hours', 'suspended_hours', 'various_hours')
    }, 'hourly', locale)

    climate_path = directory / 'climate.csv'
    _write(climate, climate_path, {
        'tmin': {'kind': 'climate', 'unit': 'degC', 'monthly': 'mean'},
        'tmax': {'kind': 'climate', 'unit': 'degC', 'monthly': 'mean'},
        'tavg': {'kind': 'climate', 'unit': 'degC', 'monthly': 'mean'},
        'precipitation': {'kind': 'climate', 'unit': 'mm', 'monthly': 'sum'},
    }, 'daily', locale)

    targets = {}
    for profile in PROFILES:
        frame = monthly_target(profile, activity, climate, rng)
        path = directory / f'{profile.name}.csv'
        _write(frame, path, {profile.name: {'kind': 'target', 'unit': profile.unit}}, 'monthly', locale)
        targets[profile.name] = path
    logger.info('Generated synthetic dataset in %s (seed %d)', directory, seed)
    return SyntheticDataset(targets=targets, activity=activity_path, climate=climate_path)
