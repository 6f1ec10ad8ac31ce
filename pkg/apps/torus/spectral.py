"""
Flat torus geometry, uniform grid fields and FFT spectral operators.

All operators act on samples at nodes (i + o1) h1, (j + o2) h2 of the
rectangle [0, L1) x [0, L2); arrays are indexed [i, j] with i along the
first period.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import RectBivariateSpline

from apps.core.conf import settings_value, thread_count
from apps.core.exceptions import InvalidArgumentError, NonzeroMeanError

logger = logging.getLogger(__name__)


# ============================================
# GEOMETRY
# ============================================

@dataclass(frozen=True)
class TorusDomain:
    """Rectangle torus with an n x n uniform grid"""
    periods: tuple
    n: int
    offset: tuple = (0.5, 0.5)

    @property
    def area(self):
        return self.periods[0] * self.periods[1]

    @property
    def spacing(self):
        return (self.periods[0] / self.n, self.periods[1] / self.n)

    @property
    def cell_area(self):
        h1, h2 = self.spacing
        return h1 * h2

    @cached_property
    def axes(self):
        """1-D node coordinates along each period"""
        h1, h2 = self.spacing
        idx = np.arange(self.n, dtype=float)
        return ((idx + self.offset[0]) * h1, (idx + self.offset[1]) * h2)

    @cached_property
    def nodes(self):
        """Node coordinates as an (n, n, 2) array"""
        x1, x2 = np.meshgrid(*self.axes, indexing='ij')
        return np.stack([x1, x2], axis=-1)

    @cached_property
    def wavenumbers(self):
        h1, h2 = self.spacing
        k1 = 2.0 * np.pi * sfft.fftfreq(self.n, d=h1)
        k2 = 2.0 * np.pi * sfft.fftfreq(self.n, d=h2)
        return np.meshgrid(k1, k2, indexing='ij')

    @cached_property
    def ksq(self):
        k1, k2 = self.wavenumbers
        return k1 ** 2 + k2 ** 2

    def wrap(self, points):
        """Reduce points into the fundamental rectangle"""
        points = np.asarray(points, dtype=float)
        return np.mod(points, np.asarray(self.periods))

    def displacement(self, x, y):
        """Nearest-image displacement x - y"""
        delta = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        periods = np.asarray(self.periods)
        return delta - periods * np.round(delta / periods)

    def distance(self, x, y):
        return np.linalg.norm(self.displacement(x, y), axis=-1)

    def node_distance(self, point):
        """Distance from a point to the nearest grid node"""
        h = np.asarray(self.spacing)
        rel = self.wrap(point) / h - np.asarray(self.offset)
        frac = rel - np.round(rel)
        return float(np.linalg.norm(frac * h))


def make_domain(L1, L2, n, offset=None):
    """Validated TorusDomain; offset defaults to half a cell"""
    if not (L1 > 0 and L2 > 0):
        raise InvalidArgumentError(f'Periods must be positive, got ({L1}, {L2})')
    if int(n) != n or n < 16 or n % 2:
        raise InvalidArgumentError(f'Grid size must be an even integer >= 16, got {n}')
    if offset is None:
        o = settings_value('GRID_OFFSET')
        offset = (o, o)
    o1, o2 = (float(offset[0]), float(offset[1]))
    if not (0.0 <= o1 < 1.0 and 0.0 <= o2 < 1.0):
        raise InvalidArgumentError(f'Offset must lie in [0, 1)^2, got {offset}')
    if int(n) & (int(n) - 1):
        logger.info('Grid size %s is not a power of two', n)
    return TorusDomain(periods=(float(L1), float(L2)), n=int(n), offset=(o1, o2))


# ============================================
# FIELDS
# ============================================

@dataclass(frozen=True, eq=False)
class Field:
    """Real scalar sampled on the grid of a TorusDomain"""
    domain: TorusDomain
    values: np.ndarray
    declared_mean: float | None = None
    name: str = ''

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        n = self.domain.n
        if values.shape != (n, n):
            raise InvalidArgumentError(f'Field shape {values.shape} does not match grid {n}x{n}')
        if not np.all(np.isfinite(values)):
            bad = np.unravel_index(np.argmin(np.isfinite(values)), values.shape)
            raise InvalidArgumentError(f'Field {self.name!r} is not finite at node {bad}')
        object.__setattr__(self, 'values', values)
        if self.declared_mean is not None:
            mean = self.mean()
            if abs(mean - self.declared_mean) > 1e-12 * (1.0 + abs(self.declared_mean)):
                raise InvalidArgumentError(
                    f'Field {self.name!r} has mean {mean!r}, declared {self.declared_mean!r}'
                )

    def mean(self):
        return float(self.values.mean())

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def with_values(self, values, name=None):
        return Field(self.domain, values, name=self.name if name is None else name)

    @classmethod
    def zeros(cls, domain, name=''):
        return cls(domain, np.zeros((domain.n, domain.n)), name=name)

    @classmethod
    def from_function(cls, domain, fn, name=''):
        """Sample fn(x1, x2) at the nodes"""
        x1, x2 = np.meshgrid(*domain.axes, indexing='ij')
        return cls(domain, fn(x1, x2), name=name)


# ============================================
# SPECTRAL OPERATORS
# ============================================

def _fft(values):
    return sfft.fft2(values, workers=thread_count())


def _ifft(coeffs):
    return sfft.ifft2(coeffs, workers=thread_count()).real


def integrate(f):
    """Trapezoidal rule, exact for trigonometric polynomials of degree < n"""
    return float(f.values.sum() * f.domain.cell_area)


def apply_laplacian(domain, values):
    """Spectral Laplacian of raw node values"""
    hat = _fft(values)
    hat *= -domain.ksq
    hat[0, 0] = 0.0
    return _ifft(hat)


def laplacian(f):
    return Field(f.domain, apply_laplacian(f.domain, f.values), name=f'lap({f.name})')


def gradient(f):
    """Spectral partial derivatives; the Nyquist mode is dropped"""
    domain = f.domain
    d1, d2 = gradient_arrays(domain, f.values)
    return (
        Field(domain, d1, name=f'd1({f.name})'),
        Field(domain, d2, name=f'd2({f.name})'),
    )


def gradient_arrays(domain, values):
    k1, k2 = domain.wavenumbers
    nyq = domain.n // 2
    hat = _fft(values)
    d1 = 1j * k1 * hat
    d1[nyq, :] = 0.0
    d2 = 1j * k2 * hat
    d2[:, nyq] = 0.0
    return _ifft(d1), _ifft(d2)


def poisson_solve(rhs, tol_mean=None):
    """Mean-zero phi with laplacian(phi) = rhs - mean(rhs)"""
    mean = rhs.mean()
    if tol_mean is None:
        tol_mean = 1e-10 * max(rhs.sup_norm(), np.finfo(float).tiny)
    if abs(mean) > tol_mean:
        raise NonzeroMeanError(f'Poisson right-hand side has mean {mean:.3e} > {tol_mean:.3e}')
    return Field(rhs.domain, solve_poisson_array(rhs.domain, rhs.values), declared_mean=0.0,
                 name=f'poisson({rhs.name})')


def solve_poisson_array(domain, values):
    hat = _fft(values)
    ksq = domain.ksq.copy()
    ksq[0, 0] = 1.0
    hat /= -ksq
    hat[0, 0] = 0.0
    return _ifft(hat)


def shifted_poisson_solve(domain, values, shift):
    """Solve (Laplacian - shift) phi = values for shift > 0"""
    if shift <= 0:
        raise InvalidArgumentError(f'Shift must be positive, got {shift}')
    hat = _fft(values)
    hat /= -(domain.ksq + shift)
    return _ifft(hat)


def prolong(f, n_new):
    """Spectral interpolation of f onto an n_new grid with the same offset"""
    domain = f.domain
    if n_new < domain.n or n_new % 2:
        raise InvalidArgumentError(f'Cannot prolong a {domain.n} grid to {n_new}')
    new_domain = TorusDomain(periods=domain.periods, n=n_new, offset=domain.offset)
    n, m = domain.n, n_new
    h1, h2 = domain.spacing
    g1, g2 = new_domain.spacing
    k1, k2 = domain.wavenumbers
    # Undo the offset phase to get true Fourier coefficients
    hat = _fft(f.values) * np.exp(-1j * (k1 * domain.offset[0] * h1 + k2 * domain.offset[1] * h2))
    # Nyquist modes are ambiguous once the offset phase is removed
    nyq = n // 2
    hat[nyq, :] = 0.0
    hat[:, nyq] = 0.0
    big = np.zeros((m, m), dtype=complex)
    idx = np.concatenate([np.arange(0, nyq), np.arange(m - nyq + 1, m)])
    src = np.concatenate([np.arange(0, nyq), np.arange(n - nyq + 1, n)])
    big[np.ix_(idx, idx)] = hat[np.ix_(src, src)]
    K1, K2 = new_domain.wavenumbers
    big *= np.exp(1j * (K1 * domain.offset[0] * g1 + K2 * domain.offset[1] * g2))
    values = sfft.ifft2(big, workers=thread_count()).real * (m * m) / (n * n)
    return Field(new_domain, values, name=f.name)


# ============================================
# OFF-GRID SAMPLING
# ============================================

class FieldSampler:
    """Periodic bicubic interpolation of a grid field"""

    PAD = 4

    def __init__(self, f):
        domain = f.domain
        self.domain = domain
        pad = self.PAD
        h1, h2 = domain.spacing
        x1, x2 = domain.axes
        ext1 = np.concatenate([x1[-pad:] - domain.periods[0], x1, x1[:pad] + domain.periods[0]])
        ext2 = np.concatenate([x2[-pad:] - domain.periods[1], x2, x2[:pad] + domain.periods[1]])
        values = np.pad(f.values, pad, mode='wrap')
        self._spline = RectBivariateSpline(ext1, ext2, values, kx=3, ky=3, s=0)
        self._origin = np.array([x1[0], x2[0]])

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        shape = points.shape[:-1]
        flat = points.reshape(-1, 2)
        periods = np.asarray(self.domain.periods)
        local = self._origin + np.mod(flat - self._origin, periods)
        values = self._spline.ev(local[:, 0], local[:, 1])
        return values.reshape(shape)
