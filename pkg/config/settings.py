"""
Django settings for the isohydra project.
The project has no web surface: it is driven through management commands
(see the `isohydra` entry script) and Django's test runner.
"""

from pathlib import Path
from decouple import config

# Build paths inside the project
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='isohydra-local-key-not-used-for-anything-secret')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'isospectral.apps.IsospectralConfig',
]

# No database is used; SimpleTestCase-based tests never touch one.
DATABASES = {}

USE_TZ = True
TIME_ZONE = 'UTC'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Numerical defaults. Every value can be overridden from the environment or .env
ISOHYDRA = {
    'QUAD_TOL': config('ISOHYDRA_QUAD_TOL', default=1e-10, cast=float),
    'ODE_TOL': config('ISOHYDRA_ODE_TOL', default=1e-10, cast=float),
    'RESIDUAL_TOL': config('ISOHYDRA_RESIDUAL_TOL', default=1e-6, cast=float),
    'FD_STEP_SCALE': config('ISOHYDRA_FD_STEP_SCALE', default=1e-4, cast=float),
    'POLE_MARGIN': config('ISOHYDRA_POLE_MARGIN', default=0.1, cast=float),
    'LEVEL_TOL': config('ISOHYDRA_LEVEL_TOL', default=2e-4, cast=float),
    'CROSS_METHOD_TOL': config('ISOHYDRA_CROSS_METHOD_TOL', default=1e-5, cast=float),
    'R_MIN': config('ISOHYDRA_R_MIN', default=1e-6, cast=float),
    'R_MAX': config('ISOHYDRA_R_MAX', default=60.0, cast=float),
    'POINTS': config('ISOHYDRA_POINTS', default=6000, cast=int),
    'OUTPUT_DIR': config('ISOHYDRA_OUTPUT_DIR', default='.'),
}

# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'isospectral': {
            'handlers': ['console'],
            'level': config('ISOHYDRA_LOG_LEVEL', default='WARNING'),
            'propagate': False,
        },
    },
}
