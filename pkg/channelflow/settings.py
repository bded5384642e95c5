"""
Django settings for the channelflow project.

The project has no web surface: it hosts the ``mixedflow`` app whose
management commands run the numerical experiments. Everything a run needs
that is not in the run file comes from here.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only used by Django internals; nothing here is signed or served.
SECRET_KEY = os.environ.get('CHANNELFLOW_SECRET_KEY', 'channelflow-local-numerics-only')

DEBUG = False

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'mixedflow',
]

# No models, so no database.
DATABASES = {}

TIME_ZONE = 'UTC'

USE_TZ = True


# Logging
# https://docs.djangoproject.com/en/5.2/topics/logging/

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '{levelname:<7} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'mixedflow': {
            'handlers': ['console'],
            'level': os.environ.get('MIXEDFLOW_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}


# Run defaults. A run file (YAML) is merged over this dict, then the
# command-line flags --seed/--out/--refine override.

MIXEDFLOW_DEFAULTS = {
    'geometry': {
        'length': 3.0,
        'height': 1.0,
        'nx': 48,
        'ny': 16,
        'grading': 1.0,
        'refine': 0,
    },
    'n_modes': 24,
    'time': {
        't_end': 1.0,
        'intervals': 64,
        'gauss_points': 4,
    },
    'newton': {
        'max_iters': 8,
        'abs_tol': 1e-11,
        'damping': 1.0,
        'linear_tol': 1e-10,
    },
    'experiment': {
        'forcing': 'random',
        'amplitude': 1.0,
        'target_norm': 0.1,
        'scales': [1e-3, 1e-2],
        'trials': 10,
        'preset': 'manufactured',
    },
    'corner': {
        're_min': -20.0,
        're_max': 20.0,
        'im_min': -1.05,
        'im_max': -0.005,
        'n_contour': 400,
        'grid_re': 81,
        'grid_im': 41,
        'fit_delta': 0.25,
    },
    'seed': 7,
    'output': 'runs',
}
