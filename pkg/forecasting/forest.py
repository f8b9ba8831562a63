"""Random forest regression built from CART trees.

Trees are stored as flat node arrays so that fitting is iterative, prediction is
vectorised over rows, and a fitted model serialises to plain JSON.
"""

from dataclasses import asdict, dataclass, field
import logging
from typing import Optional, Sequence

from joblib import Parallel, delayed
import numpy as np

from .exceptions import ModelError
from .models import FeatureTable

logger = logging.getLogger(__name__)

LEAF = -1


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 100
    max_depth: Optional[int] = None
    bootstrap: bool = True
    max_features: float = 1.0
    min_samples_split: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ModelError(f'n_estimators must be positive, got {self.n_estimators}')
        if self.max_depth is not None and self.max_depth < 0:
            raise ModelError(f'max_depth must be non-negative, got {self.max_depth}')
        if not 0.0 < self.max_features <= 1.0:
            raise ModelError(f'max_features must lie in (0, 1], got {self.max_features}')
        if self.min_samples_split < 2:
            raise ModelError(f'min_samples_split must be at least 2, got {self.min_samples_split}')
        if self.seed < 0:
            raise ModelError(f'seed must be unsigned, got {self.seed}')


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Flat binary tree; node 0 is the root and leaves have feature == -1."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    depth: np.ndarray

    @property
    def node_count(self) -> int:
        return int(self.feature.size)

    @property
    def max_leaf_depth(self) -> int:
        return int(self.depth[self.feature == LEAF].max())

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    def predict(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        node = np.zeros(rows.shape[0], dtype=np.intp)
        active = self.feature[node] != LEAF
        while active.any():
            index = np.flatnonzero(active)
            current = node[index]
            go_left = rows[index, self.feature[current]] <= self.threshold[current]
            node[index] = np.where(go_left, self.left[current], self.right[current])
            active[index] = self.feature[node[index]] != LEAF
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            'feature': self.feature.tolist(),
            'threshold': self.threshold.tolist(),
            'left': self.left.tolist(),
            'right': self.right.tolist(),
            'value': self.value.tolist(),
            'n_samples': self.n_samples.tolist(),
            'depth': self.depth.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> 'RegressionTree':
        return cls(
            feature=np.asarray(payload['feature'], dtype=np.intp),
            threshold=np.asarray(payload['threshold'], dtype=float),
            left=np.asarray(payload['left'], dtype=np.intp),
            right=np.asarray(payload['right'], dtype=np.intp),
            value=np.asarray(payload['value'], dtype=float),
            n_samples=np.asarray(payload['n_samples'], dtype=np.intp),
            depth=np.asarray(payload['depth'], dtype=np.intp),
        )


def best_split(rows: np.ndarray, targets: np.ndarray, features: Sequence[int]):
    """Best (feature, threshold, gain) over `features`, or None if no split separates the rows.

    Candidate thresholds are midpoints between consecutive distinct values and a
    row goes left when its value is <= threshold. Equal gains resolve to the
    lowest feature, then the lowest threshold.
    """
    features = np.asarray(features, dtype=np.intp)
    n = targets.size
    if n < 2 or features.size == 0:
        return None
    y = targets - targets.mean()
    columns = rows[:, features]
    order = np.argsort(columns, axis=0, kind='stable')
    values = np.take_along_axis(columns, order, axis=0)
    ordered = y[order]

    left_sum = np.cumsum(ordered, axis=0)[:-1]
    left_sq = np.cumsum(ordered * ordered, axis=0)[:-1]
    total, total_sq = y.sum(), float(y @ y)
    left_n = np.arange(1, n, dtype=float)[:, None]
    right_n = n - left_n
    sse_left = left_sq - left_sum ** 2 / left_n
    sse_right = (total_sq - left_sq) - (total - left_sum) ** 2 / right_n
    gain = (total_sq - total * total / n) - sse_left - sse_right
    gain = np.where(values[1:] > values[:-1], gain, -np.inf)

    # feature-major flattening makes argmax honour the tie-break order
    flat = gain.T.ravel()
    best = int(np.argmax(flat))
    if not np.isfinite(flat[best]):
        return None
    column, position = divmod(best, n - 1)
    low, high = values[position, column], values[position + 1, column]
    threshold = low + (high - low) / 2.0
    if threshold >= high:
        threshold = low
    return int(features[column]), float(threshold), float(flat[best])


def fit_tree(rows, targets, params: ForestParams, rng: np.random.Generator) -> RegressionTree:
    """Grow one CART regression tree greedily on squared-error reduction."""
    rows = np.asarray(rows, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ModelError('cannot fit a tree on an empty training set')
    if targets.shape != (rows.shape[0],):
        raise ModelError(f'{rows.shape[0]} rows but {targets.size} targets')
    if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(targets))):
        raise ModelError('training data contains non-finite values')

    n_features = rows.shape[1]
    subset = max(1, int(params.max_features * n_features))
    feature, threshold, left, right, value, n_samples, depth = [], [], [], [], [], [], []

    def new_node(level):
        for column, default in ((feature, LEAF), (threshold, 0.0), (left, LEAF), (right, LEAF),
                                (value, 0.0), (n_samples, 0)):
            column.append(default)
        depth.append(level)
        return len(feature) - 1

    stack = [(new_node(0), np.arange(rows.shape[0]), 0)]
    while stack:
        node, members, level = stack.pop()
        node_targets = targets[members]
        n_samples[node] = members.size
        constant = bool(np.all(node_targets == node_targets[0]))
        value[node] = float(node_targets[0]) if constant else float(node_targets.mean())
        if constant or members.size < params.min_samples_split:
            continue
        if params.max_depth is not None and level >= params.max_depth:
            continue
        if subset < n_features:
            candidates = np.sort(rng.choice(n_features, size=subset, replace=False))
        else:
            candidates = np.arange(n_features)
        split = best_split(rows[members], node_targets, candidates)
        if split is None:
            continue
        split_feature, split_threshold, _ = split
        goes_left = rows[members, split_feature] <= split_threshold
        left_node, right_node = new_node(level + 1), new_node(level + 1)
        feature[node], threshold[node] = split_feature, split_threshold
        left[node], right[node] = left_node, right_node
        stack.append((right_node, members[~goes_left], level + 1))
        stack.append((left_node, members[goes_left], level + 1))

    return RegressionTree(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        value=np.asarray(value, dtype=float),
        n_samples=np.asarray(n_samples, dtype=np.intp),
        depth=np.asarray(depth, dtype=np.intp),
    )


def _fit_member(rows, targets, params: ForestParams, index: int) -> RegressionTree:
    rng = np.random.default_rng([params.seed, index])
    if params.bootstrap:
        sample = rng.integers(0, rows.shape[0], size=rows.shape[0])
        rows, targets = rows[sample], targets[sample]
    return fit_tree(rows, targets, params, rng)


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple
    params: ForestParams
    feature_names: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'trees', tuple(self.trees))
        object.__setattr__(self, 'feature_names', tuple(self.feature_names))
        if len(self.trees) != self.params.n_estimators:
            raise ModelError(f'{len(self.trees)} trees for n_estimators={self.params.n_estimators}')

    def predict(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        if rows.ndim == 1:
            rows = rows.reshape(1, -1)
        if rows.shape[1] != len(self.feature_names):
            raise ModelError(f'expected {len(self.feature_names)} features, got {rows.shape[1]}')
        return np.mean([tree.predict(rows) for tree in self.trees], axis=0)

    def to_dict(self) -> dict:
        return {
            'model': 'random_forest',
            'params': asdict(self.params),
            'feature_names': list(self.feature_names),
            'trees': [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> 'ForestModel':
        if payload.get('model') != 'random_forest':
            raise ModelError(f"not a random forest payload: {payload.get('model')!r}")
        return cls(
            trees=[RegressionTree.from_dict(tree) for tree in payload['trees']],
            params=ForestParams(**payload['params']),
            feature_names=payload['feature_names'],
        )


def fit_forest_arrays(rows, targets, params: ForestParams, feature_names=None, n_jobs: int = 1) -> ForestModel:
    rows = np.asarray(rows, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ModelError(f'a forest needs at least 2 training rows, got {rows.shape[0] if rows.ndim == 2 else 0}')
    if feature_names is None:
        feature_names = [f'x{index}' for index in range(rows.shape[1])]
    if len(feature_names) != rows.shape[1]:
        raise ModelError(f'{len(feature_names)} feature names for {rows.shape[1]} columns')
    if n_jobs == 1:
        trees = [_fit_member(rows, targets, params, index) for index in range(params.n_estimators)]
    else:
        trees = Parallel(n_jobs=n_jobs)(
            delayed(_fit_member)(rows, targets, params, index) for index in range(params.n_estimators)
        )
    logger.debug('fitted %d trees on %d rows x %d features', len(trees), rows.shape[0], rows.shape[1])
    return ForestModel(trees=trees, params=params, feature_names=feature_names)


def fit_forest(table: FeatureTable, params: ForestParams, n_jobs: int = 1) -> ForestModel:
    return fit_forest_arrays(table.matrix(), table.target, params, table.column_names, n_jobs=n_jobs)


def predict(model: ForestModel, rows) -> np.ndarray:
    return model.predict(rows)
