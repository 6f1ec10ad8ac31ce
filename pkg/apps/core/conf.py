from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

DEFAULTS = {
    'NEWTON_TOL': 1e-10,
    'NEWTON_MAX_ITER': 40,
    'KRYLOV_TOL': 1e-12,
    'KRYLOV_MAX_ITER': 400,
    'TOL_REDUCED': 1e-8,
    'BETA0': 0.2,
    'BETA1': 5.0,
    'ALPHA': 0.4,
    'GRID_OFFSET': 0.5,
    'HIGGS_TOL': 1e-14,
    'HIGGS_MAX_ITER': 100,
}


def _setting(name, default):
    try:
        return getattr(settings, name, default)
    except ImproperlyConfigured:
        return default


def settings_value(name):
    """Numerical default from settings.VORTEXLAB, falling back to DEFAULTS"""
    overrides = _setting('VORTEXLAB', {})
    if name in overrides:
        return overrides[name]
    return DEFAULTS[name]


def thread_count():
    """Parallelism cap taken from CSVL_THREADS"""
    return max(1, int(_setting('CSVL_THREADS', 1)))
