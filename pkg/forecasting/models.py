"""Domain types shared by every stage of the pipeline.

There is no database behind the toolkit, so these are immutable dataclasses
rather than ORM models. Numeric payloads are numpy arrays flagged read-only.
"""

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
import math
from typing import Iterable, Mapping, Optional

import numpy as np
import pandas as pd

from .exceptions import DataError, GapError


class FeatureKind(str, Enum):
    ACTIVITY = 'activity'
    CLIMATE = 'climate'
    TIME = 'time'
    LAG = 'lag'

    def __str__(self):
        return self.value


def _frozen_array(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


def as_month(value) -> pd.Period:
    """Coerce a string, timestamp or Period to a monthly Period."""
    if isinstance(value, pd.Period):
        return value.asfreq('M')
    return pd.Period(value, freq='M')


@dataclass(frozen=True)
class TimedRecord:
    timestamp: datetime
    value: float
    series_id: str

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DataError(f'non-finite value {self.value!r} for series {self.series_id!r} at {self.timestamp}')


@dataclass(frozen=True, eq=False)
class MonthlySeries:
    """One value per consecutive calendar month."""

    start_month: pd.Period
    values: np.ndarray
    unit: str = ''
    name: str = 'series'
    kind: Optional[FeatureKind] = None

    def __post_init__(self):
        object.__setattr__(self, 'start_month', as_month(self.start_month))
        values = _frozen_array(self.values)
        if values.ndim != 1 or values.size == 0:
            raise DataError(f'series {self.name!r} has no values')
        if not np.all(np.isfinite(values)):
            raise DataError(f'series {self.name!r} contains non-finite values')
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return self.values.size

    @property
    def months(self) -> pd.PeriodIndex:
        return pd.period_range(self.start_month, periods=len(self), freq='M')

    @property
    def end_month(self) -> pd.Period:
        return self.start_month + (len(self) - 1)

    def to_series(self) -> pd.Series:
        return pd.Series(np.array(self.values), index=self.months, name=self.name)

    @classmethod
    def from_series(cls, series: pd.Series, unit='', name=None, kind=None):
        """Build from a month-indexed pandas Series, rejecting gaps."""
        index = pd.PeriodIndex(series.index, freq='M')
        expected = pd.period_range(index.min(), index.max(), freq='M')
        missing = expected.difference(index)
        if len(missing):
            raise GapError(f'series {name or series.name!r} has missing months', missing)
        ordered = pd.Series(series.to_numpy(dtype=float), index=index).sort_index()
        return cls(
            start_month=ordered.index[0],
            values=ordered.to_numpy(),
            unit=unit,
            name=name if name is not None else str(series.name),
            kind=kind,
        )

    def window(self, first: pd.Period, last: pd.Period) -> 'MonthlySeries':
        """Return the sub-series covering [first, last]."""
        first, last = as_month(first), as_month(last)
        start = (first - self.start_month).n
        stop = (last - self.start_month).n + 1
        if start < 0 or stop > len(self) or start >= stop:
            raise DataError(f'series {self.name!r} does not cover {first}..{last}')
        return MonthlySeries(first, self.values[start:stop], self.unit, self.name, self.kind)

    def summary(self) -> dict:
        """Observation count, min, max, mean and sample standard deviation."""
        return {
            'series': self.name,
            'unit': self.unit,
            'frequency': 'Monthly',
            'observations': len(self),
            'min': float(self.values.min()),
            'max': float(self.values.max()),
            'mean': float(self.values.mean()),
            'std': float(self.values.std(ddof=1)) if len(self) > 1 else 0.0,
        }


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Design matrix aligned by month, with the consumption target alongside."""

    months: pd.PeriodIndex
    features: pd.DataFrame
    target: np.ndarray
    feature_kinds: Mapping[str, FeatureKind] = field(default_factory=dict)
    name: str = 'target'
    unit: str = ''

    def __post_init__(self):
        months = pd.PeriodIndex(self.months, freq='M')
        object.__setattr__(self, 'months', months)
        target = _frozen_array(self.target)
        object.__setattr__(self, 'target', target)
        features = self.features.copy()
        if len(features) != len(months) or target.size != len(months):
            raise DataError(
                f'table {self.name!r}: {len(features)} feature rows and {target.size} targets '
                f'for {len(months)} months'
            )
        if features.columns.has_duplicates:
            duplicated = features.columns[features.columns.duplicated()].tolist()
            raise DataError(f'table {self.name!r} has duplicate columns {duplicated}')
        features.index = months
        object.__setattr__(self, 'features', features)
        kinds = {column: FeatureKind(self.feature_kinds[column]) for column in features.columns
                 if column in self.feature_kinds}
        untyped = [column for column in features.columns if column not in kinds]
        if untyped:
            raise DataError(f'table {self.name!r} has columns without a feature kind: {untyped}')
        object.__setattr__(self, 'feature_kinds', kinds)

    def __len__(self):
        return len(self.months)

    @property
    def column_names(self) -> list:
        return list(self.features.columns)

    def columns_of(self, *kinds: FeatureKind) -> list:
        wanted = {FeatureKind(kind) for kind in kinds}
        return [column for column in self.features.columns if self.feature_kinds[column] in wanted]

    def matrix(self) -> np.ndarray:
        return self.features.to_numpy(dtype=float)

    def target_series(self) -> MonthlySeries:
        return MonthlySeries(self.months[0], self.target, self.unit, self.name)

    def take(self, rows: slice) -> 'FeatureTable':
        return FeatureTable(
            months=self.months[rows],
            features=self.features.iloc[rows],
            target=self.target[rows],
            feature_kinds=self.feature_kinds,
            name=self.name,
            unit=self.unit,
        )

    def select(self, columns: Iterable[str]) -> 'FeatureTable':
        columns = list(columns)
        return FeatureTable(
            months=self.months,
            features=self.features[columns],
            target=self.target,
            feature_kinds={column: self.feature_kinds[column] for column in columns},
            name=self.name,
            unit=self.unit,
        )

    def without_kinds(self, *kinds: FeatureKind) -> 'FeatureTable':
        dropped = set(self.columns_of(*kinds))
        return self.select(column for column in self.features.columns if column not in dropped)


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    train: FeatureTable
    test: FeatureTable
    horizon: int

    def __post_init__(self):
        if self.horizon < 1:
            raise DataError(f'horizon must be positive, got {self.horizon}')
        if len(self.test) != self.horizon:
            raise DataError(f'test set has {len(self.test)} rows for horizon {self.horizon}')
        if len(self.train) and self.train.months[-1] + 1 != self.test.months[0]:
            raise DataError('train months must end exactly where test months begin')
