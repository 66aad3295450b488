"""
Django settings for the wolffcap numerical toolkit.
"""

from pathlib import Path
from decouple import config, Csv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-wolffcap-local-key-change-me')

DEBUG = config('DEBUG', default=True, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost,127.0.0.1', cast=Csv())

# Application definition
INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',

    # Third party apps
    'rest_framework',

    # Local apps
    'apps.core',
    'apps.phi',
    'apps.measure',
    'apps.metric',
    'apps.transform',
    'apps.wolff',
    'apps.curvature',
    'apps.energy',
    'apps.capacity',
    'apps.experiments',
]

# Database - only needed by the test runner; nothing is persisted
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': config('DB_NAME', default=str(BASE_DIR / 'db.sqlite3')),
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# REST Framework Configuration
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': (
        'rest_framework.renderers.JSONRenderer',
    ),
    'DEFAULT_PARSER_CLASSES': (
        'rest_framework.parsers.JSONParser',
    ),
    'UNAUTHENTICATED_USER': None,
    'COERCE_DECIMAL_TO_STRING': False,
    'STRICT_JSON': True,
}

# Experiment runner defaults
WOLFFCAP = {
    'OUTPUT_DIR': config('WOLFFCAP_OUTPUT_DIR', default='results'),
    'THREADS': config('WOLFFCAP_THREADS', default=1, cast=int),
    'DEFAULT_SEED': config('WOLFFCAP_DEFAULT_SEED', default=20240601, cast=int),
    'POWER_TOL': config('WOLFFCAP_POWER_TOL', default=1e-10, cast=float),
    'POWER_MAX_ITER': config('WOLFFCAP_POWER_MAX_ITER', default=100000, cast=int),
    'LP_MAX_PIVOTS': config('WOLFFCAP_LP_MAX_PIVOTS', default=50000, cast=int),
    'CONFIG_DIR': BASE_DIR / 'config' / 'experiments',
}

# Logging
LOG_LEVEL = config('LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'apps': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}
