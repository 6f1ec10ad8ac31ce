"""
Django settings for the VortexLab project.
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-vortexlab-local-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    # Third party
    'rest_framework',
    # Local apps
    'apps.core',
    'apps.torus',
    'apps.green',
    'apps.higgs',
    'apps.ansatz',
    'apps.functionals',
    'apps.reduction',
    'apps.solver',
    'apps.experiments',
]

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [],
        },
    },
]

# Database - SQLite run ledger
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': config('DATABASE_PATH', default=str(BASE_DIR / 'vortexlab.sqlite3')),
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Django REST Framework (serializers only, no API surface)
REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
}


# ============================================
# LOGGING
# ============================================

LOG_LEVEL = config('LOG_LEVEL', default='WARNING')

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
        'apps': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}


# ============================================
# NUMERICAL DEFAULTS
# ============================================

# Caps scipy.fft workers and the per-eps thread pool
CSVL_THREADS = config('CSVL_THREADS', default=1, cast=int)

VORTEXLAB = {
    'NEWTON_TOL': config('VORTEXLAB_NEWTON_TOL', default=1e-10, cast=float),
    'NEWTON_MAX_ITER': config('VORTEXLAB_NEWTON_MAX_ITER', default=40, cast=int),
    'KRYLOV_TOL': config('VORTEXLAB_KRYLOV_TOL', default=1e-12, cast=float),
    'KRYLOV_MAX_ITER': config('VORTEXLAB_KRYLOV_MAX_ITER', default=400, cast=int),
    'TOL_REDUCED': config('VORTEXLAB_TOL_REDUCED', default=1e-8, cast=float),
    'BETA0': config('VORTEXLAB_BETA0', default=0.2, cast=float),
    'BETA1': config('VORTEXLAB_BETA1', default=5.0, cast=float),
    'ALPHA': config('VORTEXLAB_ALPHA', default=0.4, cast=float),
    'GRID_OFFSET': config('VORTEXLAB_GRID_OFFSET', default=0.5, cast=float),
    'HIGGS_TOL': config('VORTEXLAB_HIGGS_TOL', default=1e-14, cast=float),
    'HIGGS_MAX_ITER': config('VORTEXLAB_HIGGS_MAX_ITER', default=100, cast=int),
}
