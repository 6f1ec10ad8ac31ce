"""
Radial cutoff profiles.

smoothstep is the C^2 quintic used for the kernel cutoffs; bump is the
C-infinity logistic profile used to desingularize logarithms.
"""
import numpy as np
from scipy.special import expit


def smoothstep(r, inner, outer):
    """1 for r <= inner, 0 for r >= outer, quintic in between"""
    t = np.clip((np.asarray(r, dtype=float) - inner) / (outer - inner), 0.0, 1.0)
    return 1.0 - t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)


def smoothstep_derivatives(r, inner, outer):
    """Value and first two radial derivatives of smoothstep"""
    width = outer - inner
    t = np.clip((np.asarray(r, dtype=float) - inner) / width, 0.0, 1.0)
    value = 1.0 - t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)
    d1 = -30.0 * t ** 2 * (1.0 - t) ** 2 / width
    d2 = -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / width ** 2
    return value, d1, d2


def _logistic_argument(t):
    t = np.clip(t, 1e-12, 1.0 - 1e-12)
    s = 1.0 / (1.0 - t) - 1.0 / t
    s1 = 1.0 / (1.0 - t) ** 2 + 1.0 / t ** 2
    s2 = 2.0 / (1.0 - t) ** 3 - 2.0 / t ** 3
    return s, s1, s2


def bump(r, inner, outer):
    """C-infinity cutoff: 1 inside inner, 0 outside outer"""
    value, _, _ = bump_derivatives(r, inner, outer)
    return value


def bump_derivatives(r, inner, outer):
    """Value, first and second radial derivatives of the smooth bump"""
    r = np.asarray(r, dtype=float)
    width = outer - inner
    t = (r - inner) / width
    inside = t <= 0.0
    outside = t >= 1.0
    s, s1, s2 = _logistic_argument(t)
    # psi(t) = expit(s) rises from 0 to 1; the bump is 1 - psi
    psi = expit(s)
    dpsi = psi * (1.0 - psi) * s1
    d2psi = psi * (1.0 - psi) * ((1.0 - 2.0 * psi) * s1 ** 2 + s2)
    value = np.where(inside, 1.0, np.where(outside, 0.0, 1.0 - psi))
    d1 = np.where(inside | outside, 0.0, -dpsi / width)
    d2 = np.where(inside | outside, 0.0, -d2psi / width ** 2)
    return value, d1, d2
