"""JSON artifacts: fitted models, run manifests and generic payloads."""

import json
import logging
from pathlib import Path
from typing import Union

import django
import joblib
import matplotlib
import numpy as np
import pandas as pd
import scipy

from . import __version__
from .exceptions import ModelError
from .forest import ForestModel
from .svr import SvrModel

logger = logging.getLogger(__name__)

MODEL_TYPES = {'random_forest': ForestModel, 'svr': SvrModel}


def _default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return value.as_posix()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f'{type(value).__name__} is not JSON serialisable')


def dumps(payload) -> str:
    return json.dumps(payload, indent=2, default=_default, allow_nan=False) + '\n'


def write_json(path: Union[str, Path], payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding='utf-8')
    return path


def read_json(path: Union[str, Path]):
    return json.loads(Path(path).read_text(encoding='utf-8'))


def save_model(model, path: Union[str, Path]) -> Path:
    if not hasattr(model, 'to_dict'):
        raise ModelError(f'{type(model).__name__} cannot be persisted')
    path = write_json(path, model.to_dict())
    logger.info('Saved model to %s', path)
    return path


def load_model(path: Union[str, Path]):
    payload = read_json(path)
    kind = payload.get('model')
    if kind not in MODEL_TYPES:
        raise ModelError(f'{path}: unknown model type {kind!r}')
    return MODEL_TYPES[kind].from_dict(payload)


def library_versions() -> dict:
    return {
        'utilcast': __version__,
        'django': django.__version__,
        'numpy': np.__version__,
        'pandas': pd.__version__,
        'scipy': scipy.__version__,
        'joblib': joblib.__version__,
        'matplotlib': matplotlib.__version__,
    }


def write_manifest(directory: Union[str, Path], command: str, config: dict, seed: int) -> Path:
    """Record what produced a workspace: command, configuration, seed and versions."""
    directory = Path(directory)
    manifest_path = directory / 'manifest.json'
    manifest = read_json(manifest_path) if manifest_path.exists() else {'commands': {}}
    manifest['seed'] = seed
    manifest['versions'] = library_versions()
    manifest.setdefault('commands', {})[command] = config
    return write_json(manifest_path, manifest)
