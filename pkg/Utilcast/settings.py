"""
Django settings for the Utilcast project.

Utilcast has no database, no URL routing and no templates: Django is used for its
settings layer, its management-command CLI and its test runner. Every subcommand
(`synth`, `ingest`, `analyze`, `optimize`, `forecast`, `benchmark`) lives in
`forecasting/management/commands/`.

Values below can be overridden through a `.env` file in the project root.
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('SECRET_KEY', 'utilcast-offline-toolkit')

DEBUG = os.getenv('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'forecasting',
]

# No database: every artifact is a CSV, markdown, SVG or JSON file on disk.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Forecasting toolkit defaults (overridden by the experiment YAML, then by CLI flags)

UTILCAST = {
    'SEED': int(os.getenv('UTILCAST_SEED', '2024')),
    'OUTPUT_DIR': Path(os.getenv('UTILCAST_OUTPUT_DIR', BASE_DIR / 'runs' / 'default')),
    'WORKERS': int(os.getenv('UTILCAST_WORKERS', '1')),
    'LOCALE': os.getenv('UTILCAST_LOCALE', 'period'),
    'HORIZON': 12,
    'ALPHA': 0.05,
    # (population size, generations)
    'GA_PRESETS': [(100, 200), (200, 500), (500, 1000)],
    'MUTATION_PROBABILITY': 0.1,
    'ELITE_FRACTION': 0.1,
    'FAMILIES': ['rf', 'svr'],
    'ARMS': ['with-climate', 'without-climate'],
}


# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'standard': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'standard',
        },
    },
    'loggers': {
        'forecasting': {
            'handlers': ['console'],
            'level': os.getenv('UTILCAST_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
