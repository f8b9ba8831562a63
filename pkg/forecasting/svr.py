"""Epsilon-insensitive support vector regression solved by SMO on the dual."""

from dataclasses import asdict, dataclass, field, replace
from enum import Enum
import logging
from typing import Callable, Optional, Union

import numpy as np

from .exceptions import KernelError, ModelError
from .models import FeatureTable

logger = logging.getLogger(__name__)

TAU = 1e-12


class KernelKind(str, Enum):
    POLY = 'poly'
    RBF = 'rbf'
    SIGMOID = 'sigmoid'

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind = KernelKind.RBF
    degree: int = 3
    gamma: Union[float, str] = 'auto'
    coef0: float = 0.0

    def __post_init__(self):
        try:
            object.__setattr__(self, 'kind', KernelKind(self.kind))
        except ValueError:
            raise KernelError(f'unknown kernel {self.kind!r}; choose poly, rbf or sigmoid') from None
        if self.gamma != 'auto' and not float(self.gamma) > 0:
            raise KernelError(f'kernel gamma must be positive, got {self.gamma}')
        if self.kind is KernelKind.POLY and self.degree < 1:
            raise KernelError(f'polynomial degree must be positive, got {self.degree}')

    @property
    def resolved(self) -> bool:
        return self.gamma != 'auto'

    def resolve(self, rows: np.ndarray) -> 'KernelSpec':
        """Fix an automatic gamma at 1 / (n_features * variance of rows)."""
        if self.resolved:
            return self
        rows = np.asarray(rows, dtype=float)
        variance = float(rows.var())
        gamma = 1.0 / (rows.shape[1] * variance) if variance > 0 else 1.0
        return replace(self, gamma=gamma)

    def to_dict(self) -> dict:
        return {'kind': self.kind.value, 'degree': self.degree, 'gamma': self.gamma, 'coef0': self.coef0}


def kernel_matrix(kernel: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if not kernel.resolved:
        raise KernelError('kernel gamma has not been resolved')
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise KernelError(f'rows of width {a.shape[1]} and {b.shape[1]}')
    gamma = float(kernel.gamma)
    if kernel.kind is KernelKind.RBF:
        distances = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * a @ b.T
        return np.exp(-gamma * np.maximum(distances, 0.0))
    inner = gamma * (a @ b.T) + kernel.coef0
    if kernel.kind is KernelKind.POLY:
        return inner ** kernel.degree
    return np.tanh(inner)


def kernel_eval(kernel: KernelSpec, a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise KernelError(f'rows of shape {a.shape} and {b.shape}')
    if kernel.kind is KernelKind.RBF and kernel.resolved and np.array_equal(a, b):
        return 1.0
    return float(kernel_matrix(kernel, a, b)[0, 0])


@dataclass(frozen=True, eq=False)
class Scaler:
    mean: np.ndarray
    scale: np.ndarray

    def transform(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        if rows.shape[-1] != self.mean.size:
            raise ModelError(f'expected {self.mean.size} features, got {rows.shape[-1]}')
        return (rows - self.mean) / self.scale


def standardize(rows):
    """Population z-scores per column; constant columns are only centred."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ModelError('standardisation needs at least 2 rows')
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    scaler = Scaler(mean=mean, scale=np.where(std > 0, std, 1.0))
    return scaler, scaler.transform(rows)


@dataclass(frozen=True)
class SvrParams:
    kernel: KernelSpec = field(default_factory=KernelSpec)
    C: float = 1.0
    epsilon: float = 0.1
    tolerance: float = 1e-3
    max_iterations: int = 50_000
    standardize: bool = True

    def __post_init__(self):
        if isinstance(self.kernel, (str, KernelKind)):
            object.__setattr__(self, 'kernel', KernelSpec(kind=self.kernel))
        if not self.C > 0:
            raise ModelError(f'C must be positive, got {self.C}')
        if not self.epsilon >= 0:
            raise ModelError(f'epsilon must be non-negative, got {self.epsilon}')
        if not self.tolerance > 0:
            raise ModelError(f'tolerance must be positive, got {self.tolerance}')
        if self.max_iterations < 1:
            raise ModelError(f'max_iterations must be positive, got {self.max_iterations}')


@dataclass(frozen=True, eq=False)
class DualSolution:
    coefficients: np.ndarray
    rho: float
    iterations: int
    converged: bool
    violation: float
    objective: float
    trace: tuple = ()


def dual_objective(beta: np.ndarray, gradient: np.ndarray, linear: np.ndarray) -> float:
    """Dual objective to maximise, from the gradient Q beta + p of the minimised form."""
    return -0.5 * float(beta @ (gradient + linear))


def _rho(beta, gradient, signs, C):
    upper, lower, free_sum, free_count = np.inf, -np.inf, 0.0, 0
    for value, grad, sign in zip(beta, gradient, signs):
        signed = sign * grad
        if value >= C:
            if sign < 0:
                upper = min(upper, signed)
            else:
                lower = max(lower, signed)
        elif value <= 0:
            if sign > 0:
                upper = min(upper, signed)
            else:
                lower = max(lower, signed)
        else:
            free_count += 1
            free_sum += signed
    if free_count:
        return free_sum / free_count
    return (upper + lower) / 2.0


def solve_dual(
    kernel: np.ndarray,
    targets: np.ndarray,
    C: float,
    epsilon: float,
    tolerance: float = 1e-3,
    max_iterations: int = 50_000,
    trace: bool = False,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> DualSolution:
    """Solve the epsilon-SVR dual over the 2n variables [alpha; alpha*].

    Each step updates the maximal violating pair analytically and clips it to
    the box [0, C]; the run stops once the violation m - M is within tolerance.
    `callback(iteration, coefficients)` is invoked after every update.
    """
    targets = np.asarray(targets, dtype=float)
    n = targets.size
    signs = np.concatenate([np.ones(n), -np.ones(n)])
    linear = np.concatenate([epsilon - targets, epsilon + targets])
    Q = np.outer(signs, signs) * np.tile(kernel, (2, 2))
    diagonal = np.diag(Q).copy()
    beta = np.zeros(2 * n)
    gradient = linear.copy()
    history = [dual_objective(beta, gradient, linear)] if trace else []

    iterations, violation, converged = 0, np.inf, False
    while True:
        scores = -signs * gradient
        up = ((signs > 0) & (beta < C)) | ((signs < 0) & (beta > 0))
        low = ((signs > 0) & (beta > 0)) | ((signs < 0) & (beta < C))
        if not up.any() or not low.any():
            violation, converged = 0.0, True
            break
        i = int(np.argmax(np.where(up, scores, -np.inf)))
        j = int(np.argmin(np.where(low, scores, np.inf)))
        violation = float(scores[i] - scores[j])
        if violation <= tolerance:
            converged = True
            break
        if iterations >= max_iterations:
            break

        old_i, old_j = beta[i], beta[j]
        if signs[i] != signs[j]:
            quad = diagonal[i] + diagonal[j] + 2.0 * Q[i, j]
            delta = (-gradient[i] - gradient[j]) / max(quad, TAU)
            difference = old_i - old_j
            new_i, new_j = old_i + delta, old_j + delta
            if difference > 0:
                if new_j < 0:
                    new_j, new_i = 0.0, difference
            elif new_i < 0:
                new_i, new_j = 0.0, -difference
            if difference > 0:
                if new_i > C:
                    new_i, new_j = C, C - difference
            elif new_j > C:
                new_j, new_i = C, C + difference
        else:
            quad = diagonal[i] + diagonal[j] - 2.0 * Q[i, j]
            delta = (gradient[i] - gradient[j]) / max(quad, TAU)
            total = old_i + old_j
            new_i, new_j = old_i - delta, old_j + delta
            if total > C:
                if new_i > C:
                    new_i, new_j = C, total - C
            elif new_j < 0:
                new_j, new_i = 0.0, total
            if total > C:
                if new_j > C:
                    new_j, new_i = C, total - C
            elif new_i < 0:
                new_i, new_j = 0.0, total

        beta[i], beta[j] = new_i, new_j
        gradient += Q[:, i] * (new_i - old_i) + Q[:, j] * (new_j - old_j)
        iterations += 1
        if trace:
            history.append(dual_objective(beta, gradient, linear))
        if callback is not None:
            callback(iterations, beta[:n] - beta[n:])

    return DualSolution(
        coefficients=beta[:n] - beta[n:],
        rho=float(_rho(beta, gradient, signs, C)),
        iterations=iterations,
        converged=converged,
        violation=violation,
        objective=dual_objective(beta, gradient, linear),
        trace=tuple(history),
    )


@dataclass(frozen=True)
class FitReport:
    iterations: int
    converged: bool
    violation: float
    objective: float
    trace: tuple = ()


@dataclass(frozen=True, eq=False)
class SvrModel:
    support_vectors: np.ndarray
    dual_coefficients: np.ndarray
    bias: float
    kernel: KernelSpec
    scaler: Optional[Scaler] = None
    feature_names: tuple = ()
    params: Optional[SvrParams] = None
    report: Optional[FitReport] = None

    @property
    def n_features(self) -> int:
        if self.scaler is not None:
            return self.scaler.mean.size
        return len(self.feature_names)

    def predict(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        if rows.ndim == 1:
            rows = rows.reshape(1, -1)
        if rows.shape[1] != self.n_features:
            raise ModelError(f'expected {self.n_features} features, got {rows.shape[1]}')
        if self.scaler is not None:
            rows = self.scaler.transform(rows)
        if self.dual_coefficients.size == 0:
            return np.full(rows.shape[0], self.bias)
        return kernel_matrix(self.kernel, rows, self.support_vectors) @ self.dual_coefficients + self.bias

    def to_dict(self) -> dict:
        return {
            'model': 'svr',
            'kernel': self.kernel.to_dict(),
            'support_vectors': self.support_vectors.tolist(),
            'dual_coefficients': self.dual_coefficients.tolist(),
            'bias': self.bias,
            'scaler': None if self.scaler is None else {
                'mean': self.scaler.mean.tolist(), 'scale': self.scaler.scale.tolist()},
            'feature_names': list(self.feature_names),
            'params': None if self.params is None else {
                **asdict(self.params), 'kernel': self.params.kernel.to_dict()},
            'report': None if self.report is None else asdict(self.report),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> 'SvrModel':
        if payload.get('model') != 'svr':
            raise ModelError(f"not an SVR payload: {payload.get('model')!r}")
        scaler = payload.get('scaler')
        params = payload.get('params')
        report = payload.get('report')
        n_features = len(payload['feature_names'])
        return cls(
            support_vectors=np.asarray(payload['support_vectors'], dtype=float).reshape(-1, n_features),
            dual_coefficients=np.asarray(payload['dual_coefficients'], dtype=float),
            bias=float(payload['bias']),
            kernel=KernelSpec(**payload['kernel']),
            scaler=None if scaler is None else Scaler(
                np.asarray(scaler['mean'], dtype=float), np.asarray(scaler['scale'], dtype=float)),
            feature_names=tuple(payload['feature_names']),
            params=None if params is None else SvrParams(**{**params, 'kernel': KernelSpec(**params['kernel'])}),
            report=None if report is None else FitReport(**{**report, 'trace': tuple(report['trace'])}),
        )


def fit_svr_arrays(rows, targets, params: SvrParams, feature_names=None, trace: bool = False) -> SvrModel:
    rows = np.asarray(rows, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ModelError('SVR needs at least 2 training rows')
    if targets.shape != (rows.shape[0],):
        raise ModelError(f'{rows.shape[0]} rows but {targets.size} targets')
    if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(targets))):
        raise ModelError('training data contains non-finite values')
    if feature_names is None:
        feature_names = [f'x{index}' for index in range(rows.shape[1])]

    scaler = None
    if params.standardize:
        scaler, rows = standardize(rows)
    kernel = params.kernel.resolve(rows)
    gram = kernel_matrix(kernel, rows, rows)
    if not np.all(np.isfinite(gram)):
        raise KernelError(f'{kernel.kind} kernel overflowed on the training rows')

    solution = solve_dual(gram, targets, params.C, params.epsilon, params.tolerance,
                          params.max_iterations, trace=trace)
    if solution.converged:
        logger.debug('SMO converged after %d iterations', solution.iterations)
    else:
        logger.warning('SMO stopped at %d iterations with violation %.3g', solution.iterations, solution.violation)

    support = np.flatnonzero(solution.coefficients != 0)
    return SvrModel(
        support_vectors=rows[support],
        dual_coefficients=solution.coefficients[support],
        bias=-solution.rho,
        kernel=kernel,
        scaler=scaler,
        feature_names=tuple(feature_names),
        params=params,
        report=FitReport(solution.iterations, solution.converged, solution.violation,
                         solution.objective, solution.trace),
    )


def fit_svr(table: FeatureTable, params: SvrParams, trace: bool = False) -> SvrModel:
    return fit_svr_arrays(table.matrix(), table.target, params, table.column_names, trace=trace)


def predict(model: SvrModel, rows) -> np.ndarray:
    return model.predict(rows)
