"""Ingestion, frequency aggregation and feature construction.

Raw inputs arrive as CSV files at hourly, daily or monthly frequency, each with a
YAML sidecar describing its columns. Everything is brought to monthly resolution
(hourly -> daily by mean, daily -> monthly by sum, or by mean for temperature-like
intensities) and joined into a `FeatureTable` aligned with the consumption target.
"""

from dataclasses import dataclass, field
from enum import Enum
import logging
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
import yaml

from .exceptions import DataError, DuplicateTimestampError, GapError
from .models import (
    DatasetSplit,
    FeatureKind,
    FeatureTable,
    MonthlySeries,
    TimedRecord,
)

logger = logging.getLogger(__name__)

MAX_LAGS = 20
DEFAULT_HORIZON = 12
WEEKDAYS = ('monday', 'tuesday', 'wednesday', 'thursday', 'friday', 'saturday', 'sunday')
LOCALES = ('period', 'comma')


class Frequency(str, Enum):
    HOURLY = 'hourly'
    DAILY = 'daily'
    MONTHLY = 'monthly'


@dataclass(frozen=True)
class CsvSchema:
    """Maps CSV columns to series.

    `values` maps each value column to the series id its records carry. The field
    delimiter defaults to ',' for the period locale and ';' for the comma locale.
    """

    timestamp: str = 'timestamp'
    values: Mapping[str, str] = field(default_factory=dict)
    delimiter: Optional[str] = None

    @classmethod
    def for_columns(cls, columns: Sequence[str], timestamp='timestamp', delimiter=None):
        return cls(timestamp=timestamp, values={column: column for column in columns}, delimiter=delimiter)


@dataclass(frozen=True)
class ColumnMeta:
    kind: Optional[FeatureKind] = None
    unit: str = ''
    monthly: str = 'sum'


@dataclass(frozen=True)
class SidecarMetadata:
    frequency: Frequency
    columns: Mapping[str, ColumnMeta]

    def schema(self, timestamp='timestamp', delimiter=None) -> CsvSchema:
        return CsvSchema.for_columns(list(self.columns), timestamp=timestamp, delimiter=delimiter)


def _check_locale(locale: str):
    if locale not in LOCALES:
        raise DataError(f'unknown locale {locale!r}; expected one of {", ".join(LOCALES)}')


def parse_decimal(text: str, locale: str = 'period') -> float:
    """Parse one decimal string written with the given separator convention."""
    _check_locale(locale)
    cleaned = text.strip()
    if locale == 'comma':
        cleaned = cleaned.replace('.', '').replace(',', '.')
    return float(cleaned)


def format_decimal(value: float, locale: str = 'period') -> str:
    """Shortest string that parses back to exactly `value` under `locale`."""
    _check_locale(locale)
    text = repr(float(value))
    return text.replace('.', ',') if locale == 'comma' else text


def sidecar_path(path: Union[str, Path]) -> Path:
    return Path(path).with_suffix('.yaml')


def load_sidecar(path: Union[str, Path]) -> SidecarMetadata:
    """Read the YAML metadata describing a CSV input.

    Args:
        path: The CSV file or its sidecar; the sidecar shares the CSV's stem.

    Returns:
        SidecarMetadata: Frequency plus kind/unit/monthly rule per column.
    """
    path = Path(path)
    meta_path = path if path.suffix in ('.yaml', '.yml') else sidecar_path(path)
    if not meta_path.exists():
        raise DataError('metadata sidecar not found', path=meta_path)
    try:
        raw = yaml.safe_load(meta_path.read_text(encoding='utf-8')) or {}
    except yaml.YAMLError as exc:
        raise DataError(f'invalid YAML: {exc}', path=meta_path) from exc
    try:
        frequency = Frequency(str(raw.get('frequency', '')).lower())
    except ValueError:
        raise DataError(f'unsupported frequency {raw.get("frequency")!r}', path=meta_path) from None
    columns = {}
    for name, spec in (raw.get('columns') or {}).items():
        spec = spec or {}
        kind = spec.get('kind', 'target')
        monthly = spec.get('monthly', 'sum')
        if monthly not in ('sum', 'mean'):
            raise DataError(f'column {name!r}: monthly rule must be sum or mean', path=meta_path)
        try:
            columns[str(name)] = ColumnMeta(
                kind=None if kind == 'target' else FeatureKind(kind),
                unit=str(spec.get('unit', '')),
                monthly=monthly,
            )
        except ValueError:
            raise DataError(f'column {name!r}: unknown kind {kind!r}', path=meta_path) from None
    if not columns:
        raise DataError('sidecar declares no columns', path=meta_path)
    return SidecarMetadata(frequency=frequency, columns=columns)


def load_csv(path: Union[str, Path], schema: CsvSchema, locale: str = 'period') -> list:
    """Parse a timestamped CSV into records sorted by timestamp.

    Args:
        path: CSV file with a header row.
        schema: Timestamp column and value-column -> series id mapping.
        locale: 'period' or 'comma' decimal separator.

    Returns:
        list[TimedRecord]: One record per (row, value column).

    Raises:
        DataError: Missing file, empty file, unknown columns or a malformed row
            (the message carries the line number).
        DuplicateTimestampError: A series repeats a timestamp.
    """
    _check_locale(locale)
    path = Path(path)
    if not path.exists():
        raise DataError('file not found', path=path)
    if not schema.values:
        raise DataError('schema names no value columns', path=path)
    delimiter = schema.delimiter or (';' if locale == 'comma' else ',')
    try:
        frame = pd.read_csv(path, sep=delimiter, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataError('no records', path=path) from None
    except pd.errors.ParserError as exc:
        raise DataError(f'malformed CSV: {exc}', path=path) from exc
    if frame.empty:
        raise DataError('no records', path=path)

    missing = [column for column in [schema.timestamp, *schema.values] if column not in frame.columns]
    if missing:
        raise DataError(f'missing columns {missing}', path=path)

    # header is line 1
    lines = np.arange(len(frame)) + 2
    timestamps = pd.to_datetime(frame[schema.timestamp].fillna(''), errors='coerce', format='ISO8601')
    if timestamps.isna().any():
        row = int(np.flatnonzero(timestamps.isna().to_numpy())[0])
        raise DataError(f'malformed timestamp {frame[schema.timestamp].iloc[row]!r}', path=path, line=int(lines[row]))

    parsed = {}
    for column in schema.values:
        text = frame[column].fillna('').astype(str).str.strip()
        if locale == 'comma':
            text = text.str.replace('.', '', regex=False).str.replace(',', '.', regex=False)
        numbers = pd.to_numeric(text, errors='coerce').to_numpy(dtype=float)
        bad = ~np.isfinite(numbers)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DataError(f'malformed value {frame[column].iloc[row]!r} in column {column!r}',
                            path=path, line=int(lines[row]))
        parsed[column] = numbers

    records = []
    stamps = timestamps.dt.to_pydatetime()
    for column, series_id in schema.values.items():
        seen = {}
        for stamp, value, line in zip(stamps, parsed[column], lines):
            if (stamp, series_id) in seen:
                raise DuplicateTimestampError(
                    f'duplicate timestamp {stamp.isoformat()} for series {series_id!r} '
                    f'(first seen on line {seen[(stamp, series_id)]})',
                    path=path, line=int(line),
                )
            seen[(stamp, series_id)] = int(line)
            records.append(TimedRecord(stamp, float(value), series_id))
    records.sort(key=lambda record: record.timestamp)
    logger.debug('Loaded %d records from %s', len(records), path)
    return records


def records_frame(records: Sequence[TimedRecord]) -> pd.DataFrame:
    if not records:
        raise DataError('no records')
    return pd.DataFrame({
        'timestamp': pd.to_datetime([record.timestamp for record in records]),
        'value': np.array([record.value for record in records], dtype=float),
        'series_id': [record.series_id for record in records],
    })


def aggregate_hourly_to_daily(records: Sequence[TimedRecord]) -> list:
    """Average each series' hourly values within every calendar day present."""
    frame = records_frame(records)
    frame['day'] = frame['timestamp'].dt.normalize()
    daily = frame.groupby(['series_id', 'day'], sort=True)['value'].mean().reset_index()
    result = [
        TimedRecord(day.to_pydatetime(), float(value), series_id)
        for series_id, day, value in daily.itertuples(index=False)
    ]
    result.sort(key=lambda record: record.timestamp)
    return result


def _monthly_values(frame: pd.DataFrame, how: str, name: str) -> pd.Series:
    months = frame['timestamp'].dt.to_period('M')
    grouped = frame.groupby(months)['value']
    monthly = grouped.sum() if how == 'sum' else grouped.mean()
    expected = pd.period_range(monthly.index.min(), monthly.index.max(), freq='M')
    missing = expected.difference(monthly.index)
    if len(missing):
        raise GapError(f'series {name!r} has missing months', missing)
    return monthly


def aggregate_daily_to_monthly(records: Sequence[TimedRecord], how: str = 'sum',
                               unit: str = '', kind: Optional[FeatureKind] = None) -> MonthlySeries:
    """Sum (or average, for intensities) one series' daily values per month.

    Raises:
        DataError: Empty input or records from more than one series.
        GapError: A month between the first and last has no records.
    """
    if how not in ('sum', 'mean'):
        raise DataError(f'unknown monthly aggregation {how!r}')
    frame = records_frame(records)
    series_ids = frame['series_id'].unique()
    if len(series_ids) != 1:
        raise DataError(f'expected records of a single series, got {sorted(series_ids)}')
    name = str(series_ids[0])
    monthly = _monthly_values(frame, how, name)
    return MonthlySeries(monthly.index[0], monthly.to_numpy(), unit=unit, name=name, kind=kind)


def records_to_monthly(records: Sequence[TimedRecord], metadata: SidecarMetadata) -> list:
    """Bring every series in `records` to monthly resolution per its sidecar rule."""
    if not records:
        raise DataError('no records')
    if metadata.frequency == Frequency.HOURLY:
        records = aggregate_hourly_to_daily(records)
    by_series: Dict[str, list] = {}
    for record in records:
        by_series.setdefault(record.series_id, []).append(record)

    result = []
    for series_id, series_records in by_series.items():
        meta = metadata.columns.get(series_id, ColumnMeta())
        if metadata.frequency == Frequency.MONTHLY:
            frame = records_frame(series_records)
            months = frame['timestamp'].dt.to_period('M')
            if months.duplicated().any():
                raise DuplicateTimestampError(f'series {series_id!r} has more than one value in a month')
            monthly = MonthlySeries.from_series(
                pd.Series(frame['value'].to_numpy(), index=months), unit=meta.unit, name=series_id, kind=meta.kind,
            )
        else:
            monthly = aggregate_daily_to_monthly(series_records, how=meta.monthly, unit=meta.unit, kind=meta.kind)
        result.append(monthly)
    return result


def load_monthly(path: Union[str, Path], locale: str = 'period', delimiter: Optional[str] = None) -> list:
    """Load a CSV plus sidecar and return its columns as monthly series."""
    metadata = load_sidecar(path)
    records = load_csv(path, metadata.schema(delimiter=delimiter), locale=locale)
    return records_to_monthly(records, metadata)


def build_time_features(months: Sequence) -> pd.DataFrame:
    """Month-of-year plus the number of each weekday falling in the month."""
    months = pd.PeriodIndex(months, freq='M')
    if len(months) == 0:
        raise DataError('no months to build time features for')
    counts = np.zeros((len(months), 7), dtype=int)
    for row, month in enumerate(months):
        days = pd.date_range(month.start_time, month.end_time.normalize(), freq='D')
        counts[row] = np.bincount(days.dayofweek, minlength=7)
    features = pd.DataFrame(counts, index=months, columns=[f'n_{day}' for day in WEEKDAYS])
    features.insert(0, 'month', months.month.astype(int))
    return features


def add_lag_features(table: FeatureTable, lags: int) -> FeatureTable:
    """Append lag_1..lag_L target columns and drop the first L rows."""
    if not 0 <= lags <= MAX_LAGS:
        raise DataError(f'lags must be within 0-{MAX_LAGS}, got {lags}')
    if lags >= len(table):
        raise DataError(f'lags {lags} needs more than {len(table)} rows')
    if lags == 0:
        return table
    target = np.asarray(table.target)
    lag_columns = pd.DataFrame(
        {f'lag_{k}': np.concatenate([np.full(k, np.nan), target[:-k]]) for k in range(1, lags + 1)},
        index=table.months,
    )
    kinds = dict(table.feature_kinds)
    kinds.update({column: FeatureKind.LAG for column in lag_columns.columns})
    features = pd.concat([table.features, lag_columns], axis=1)
    return FeatureTable(
        months=table.months[lags:],
        features=features.iloc[lags:],
        target=target[lags:],
        feature_kinds=kinds,
        name=table.name,
        unit=table.unit,
    )


def train_test_split(table: FeatureTable, horizon: int = DEFAULT_HORIZON) -> DatasetSplit:
    """Hold out the last `horizon` months, in temporal order."""
    if horizon < 1:
        raise DataError(f'horizon must be positive, got {horizon}')
    if horizon >= len(table):
        raise DataError(f'horizon {horizon} leaves no training rows in a table of {len(table)}')
    return DatasetSplit(
        train=table.take(slice(None, len(table) - horizon)),
        test=table.take(slice(len(table) - horizon, None)),
        horizon=horizon,
    )


def join_exogenous(target: MonthlySeries, exogenous: Sequence[MonthlySeries],
                   include_climate: bool = True, time_features: bool = True) -> FeatureTable:
    """Align exogenous monthly series with the target's month range.

    Args:
        target: The consumption series; its months define the rows.
        exogenous: Activity and climate series, each tagged with a feature kind.
        include_climate: False drops every column tagged climate.
        time_features: Add month-of-year and weekday-count columns.

    Raises:
        GapError: An exogenous series does not cover every target month.
    """
    months = target.months
    columns = {}
    kinds = {}
    for series in exogenous:
        if series.kind is None:
            raise DataError(f'exogenous series {series.name!r} has no feature kind')
        missing = months.difference(series.months)
        if len(missing):
            raise GapError(f'exogenous series {series.name!r} does not cover target months', missing)
        if series.kind == FeatureKind.CLIMATE and not include_climate:
            continue
        if series.name in columns:
            raise DataError(f'exogenous series {series.name!r} given twice')
        columns[series.name] = series.window(months[0], months[-1]).values
        kinds[series.name] = series.kind
    features = pd.DataFrame(columns, index=months)
    if time_features:
        time_columns = build_time_features(months)
        features = pd.concat([features, time_columns], axis=1)
        kinds.update({column: FeatureKind.TIME for column in time_columns.columns})
    return FeatureTable(months, features, target.values, kinds, name=target.name, unit=target.unit)


def save_dataset(table: FeatureTable, directory: Union[str, Path]) -> Path:
    """Write the canonical monthly table as `<name>.csv` plus a YAML sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    frame = table.features.copy()
    frame.insert(0, 'target', table.target)
    frame.insert(0, 'period', table.months.astype(str))
    path = directory / f'{table.name}.csv'
    frame.to_csv(path, index=False)
    meta = {
        'name': table.name,
        'unit': table.unit,
        'frequency': Frequency.MONTHLY.value,
        'kinds': {column: str(kind) for column, kind in table.feature_kinds.items()},
    }
    sidecar_path(path).write_text(yaml.safe_dump(meta, sort_keys=False), encoding='utf-8')
    return path


def load_dataset(path: Union[str, Path]) -> FeatureTable:
    """Read a table written by `save_dataset`."""
    path = Path(path)
    if not path.exists():
        raise DataError('canonical dataset not found; run ingest first', path=path)
    meta = yaml.safe_load(sidecar_path(path).read_text(encoding='utf-8'))
    frame = pd.read_csv(path)
    months = pd.PeriodIndex(frame.pop('period'), freq='M')
    target = frame.pop('target').to_numpy(dtype=float)
    kinds = {column: FeatureKind(kind) for column, kind in (meta.get('kinds') or {}).items()}
    return FeatureTable(months, frame, target, kinds, name=meta.get('name', path.stem), unit=meta.get('unit', ''))
