"""
Weighted norms of the reduction.

Near each center a function is read in the rescaled variable
xi_i(z) = xi(x_i + z / mu_i) on the disk |z| < 2 d_i mu_i; away from
Omega' = union of B_{d_i}(x_i) it is measured in plain L^2. Grid fields
are read off the grid by bicubic interpolation.
"""
import logging
from dataclasses import dataclass

import numpy as np

from apps.ansatz.bubbles import torus_distance
from apps.ansatz.profile import bubble_quadrature
from apps.core.conf import settings_value
from apps.core.exceptions import InvalidArgumentError
from apps.torus.quadrature import polar_patch
from apps.torus.spectral import Field, FieldSampler, laplacian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeightedNorms:
    """Weights rho, rho_hat of exponent alpha and the rescaled polar rule"""
    alpha: float
    order: int = 12
    angles: int = 64

    def rho(self, z):
        r = np.linalg.norm(np.asarray(z, dtype=float), axis=-1)
        return (1.0 + r) ** (1.0 + 0.5 * self.alpha)

    def rho_hat(self, z):
        r = np.linalg.norm(np.asarray(z, dtype=float), axis=-1)
        return 1.0 / ((1.0 + r) * np.log(2.0 + r) ** (1.0 + 0.5 * self.alpha))

    def rescaled_patch(self, params, i):
        """Polar rule in z on B_{2 d_i mu_i}(0), broken at the image of the matching circle"""
        scaled = params.d_i[i] * params.mu_i[i]
        return polar_patch(np.zeros(2), 2.0 * scaled, scale=1.0, breaks=(scaled,),
                           order=self.order, angles=self.angles)


def make_weighted_norms(alpha=None, order=12, angles=64):
    alpha = settings_value('ALPHA') if alpha is None else alpha
    if not 0 < alpha < 0.5:
        raise InvalidArgumentError(f'alpha must lie in (0, 1/2), got {alpha}')
    return WeightedNorms(alpha=float(alpha), order=order, angles=angles)


def _pointwise(f, name='f'):
    if isinstance(f, Field):
        return FieldSampler(f)
    if callable(f):
        return f
    raise InvalidArgumentError(f'{name} must be a Field or a callable of points')


def outside_indicator(params, y):
    """1 on Omega minus Omega', 0 inside the balls B_{d_i}(x_i)"""
    y = np.asarray(y, dtype=float)
    inside = np.zeros(y.shape[:-1], dtype=bool)
    for i in range(params.k):
        inside |= torus_distance(params.centers_array[i], y, params.periods) < params.d_i[i]
    return np.where(inside, 0.0, 1.0)


def _outer_quadrature(f, params, quad):
    if quad is not None:
        return quad
    if isinstance(f, Field):
        return bubble_quadrature(params, f.domain)
    raise InvalidArgumentError('A pointwise function needs an explicit quadrature')


def _outer_l2_squared(fn, params, quad):
    return quad.integrate(lambda y: fn(y) ** 2 * outside_indicator(params, y))


def weighted_norm_Y(f, params, norms=None, quad=None):
    """
    (sum_i mu_i^-4 ||xi_i rho||^2_{L^2(B_{2 d_i mu_i})} + ||xi||^2_{L^2(Omega - Omega')})^(1/2)
    """
    norms = norms or make_weighted_norms()
    quad = _outer_quadrature(f, params, quad)
    fn = _pointwise(f)
    total = 0.0
    for i in range(params.k):
        patch = norms.rescaled_patch(params, i)
        mu = params.mu_i[i]
        values = fn(params.centers_array[i] + patch.offsets / mu) * norms.rho(patch.offsets)
        total += patch.integrate(values ** 2) / mu ** 4
    total += _outer_l2_squared(fn, params, quad)
    return float(np.sqrt(max(total, 0.0)))


def weighted_norm_X(f, params, norms=None, quad=None, lap=None):
    """
    (sum_i ||Lap xi_i rho||^2 + ||xi_i rho_hat||^2 on B_{2 d_i mu_i}
     + ||Lap xi||^2 + ||xi||^2 on Omega - Omega')^(1/2)

    For a grid field the Laplacian is spectral; a pointwise f needs lap.
    """
    norms = norms or make_weighted_norms()
    quad = _outer_quadrature(f, params, quad)
    fn = _pointwise(f)
    if lap is None:
        if not isinstance(f, Field):
            raise InvalidArgumentError('The X norm of a pointwise function needs its Laplacian')
        lap = laplacian(f)
    lap_fn = _pointwise(lap, 'lap')
    total = 0.0
    for i in range(params.k):
        patch = norms.rescaled_patch(params, i)
        mu = params.mu_i[i]
        points = params.centers_array[i] + patch.offsets / mu
        # the Laplacian in z is mu_i^-2 times the Laplacian in y
        scaled_lap = lap_fn(points) / mu ** 2 * norms.rho(patch.offsets)
        weighted = fn(points) * norms.rho_hat(patch.offsets)
        total += patch.integrate(scaled_lap ** 2) + patch.integrate(weighted ** 2)
    total += _outer_l2_squared(lap_fn, params, quad) + _outer_l2_squared(fn, params, quad)
    return float(np.sqrt(max(total, 0.0)))


def rho_disk_integral(alpha, radius):
    """int over B_radius(0) of rho^2 = (1 + |z|)^(2 + alpha), in closed form"""
    p = 2.0 + alpha
    R = 1.0 + radius
    return 2 * np.pi * ((R ** (p + 2) - 1.0) / (p + 2) - (R ** (p + 1) - 1.0) / (p + 1))
