"""
Django settings for the tomography simulator project.

Only what the management commands and the test runner need is configured:
there is no HTTP surface. Simulation defaults (regime presets, gain
schedule, worker pool size, turbulence calibration) live at the bottom.

For the full list of Django settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
import os

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only used by Django internals; nothing is signed or served.
SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'simulator-local-only-key')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'tomography',
]

MIDDLEWARE = []


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases
# The simulator keeps no records; the tests never touch a database.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging
# https://docs.djangoproject.com/en/5.2/topics/logging/

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'tomography': {
            'handlers': ['console'],
            'level': os.getenv('TOMOGRAPHY_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
    },
}


# Simulation defaults

# Where `run`, `compare`, `sweep` and `screen_dump` write when --out is not given.
TOMOGRAPHY_OUTPUT_DIR = BASE_DIR / 'results'

# Trials run on a process pool of this size; 1 runs them in-process.
TOMOGRAPHY_WORKERS = int(os.getenv('TOMOGRAPHY_WORKERS', os.cpu_count() or 1))

# SPSA gains alpha_k = a/(k+1+A)^s, beta_k = b/(k+1)^t.
TOMOGRAPHY_DEFAULT_SCHEDULE = {
    'a': 3.0,
    'A': 0.0,
    's': 0.602,
    'b': 0.1,
    't': 0.101,
}

# Beam-waist calibration for the turbulence channel: screens used and their seed.
TOMOGRAPHY_CALIBRATION_SEED = 1965
TOMOGRAPHY_CALIBRATION_SCREENS = 64

# Bump whenever a preset value changes; echoed in every summary.json.
TOMOGRAPHY_PRESET_VERSION = '2'

# Gains for noisy counts: smaller steps, wider perturbations. Used by the pure-state
# search only; the mixed-state search keeps TOMOGRAPHY_MIXED_SCHEDULE.
_NOISY_SCHEDULE = {'a': 0.7, 'A': 10.0, 'b': 0.3}

# Dark rate and crosstalk are placeholders until calibrated against measured curves.
_LOW_NOISE = {
    'rate_hz': 1e5,
    'integration_time_s': 1.0,
    'dark_rate_hz': 100.0,
    'crosstalk_strength': 0.0,
    'crosstalk_model': 'uniform',
}

TOMOGRAPHY_PRESETS = {
    'low-noise': {
        'regime': 'low-noise',
        'noise': dict(_LOW_NOISE),
    },
    'high-noise-d3d5': {
        'regime': 'high-noise',
        'noise': {'copies_per_setting': 80},
        'schedule': dict(_NOISY_SCHEDULE),
    },
    'high-noise-d20': {
        'regime': 'high-noise',
        'noise': {'copies_per_setting': 1000},
        'schedule': {'a': 3.0, 'A': 20.0, 'b': 0.3},
    },
    'turbulence': {
        'regime': 'turbulence',
        'noise': dict(_LOW_NOISE),
        'schedule': dict(_NOISY_SCHEDULE),
        'turbulence': {
            'cn2': 1e-18,
            'distance_m': 1000.0,
            'wavelength_m': 810e-9,
            'grid_size': 512,
            'subharmonics': False,
        },
    },
    'reduced-count': {
        'regime': 'custom',
        'noise': dict(_LOW_NOISE, rate_hz=1e4),
    },
}

# Loss span applied by `compare` when the config leaves loss uniform.
TOMOGRAPHY_COMPARE_LOSS_SPAN = 0.2

# Parameter-space gains for the mixed-state search (unit-norm triangular factor).
TOMOGRAPHY_MIXED_SCHEDULE = {
    'a': 0.5,
    'A': 20.0,
    's': 0.602,
    'b': 0.1,
    't': 0.101,
}

# Baseline/SGQT infidelity ratios reported next to `compare` results, per regime.
TOMOGRAPHY_COMPARE_TARGETS = {
    'low-noise': 15.0,
    'high-noise': 1.4,
    'turbulence': 5.0,
}
