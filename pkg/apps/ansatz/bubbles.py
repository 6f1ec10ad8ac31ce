"""
Liouville bubbles and the parameters (x, mu, d) of the multi-bubble ansatz.
"""
import logging
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import InvalidArgumentError, InvalidConfigurationError
from apps.green.ewald import u0_eval

logger = logging.getLogger(__name__)


def _min_image(delta, periods):
    if periods is None:
        return delta
    periods = np.asarray(periods, dtype=float)
    return delta - periods * np.round(delta / periods)


def torus_displacement(x, y, periods=None):
    """Nearest-image y - x"""
    return _min_image(np.asarray(y, dtype=float) - np.asarray(x, dtype=float), periods)


def torus_distance(x, y, periods=None):
    return np.linalg.norm(torus_displacement(x, y, periods), axis=-1)


def bubble_radial(mu, r):
    """ln 8 mu^2 / (1 + mu^2 r^2)^2 as a function of the radius"""
    r = np.asarray(r, dtype=float)
    return np.log(8.0 * mu * mu) - 2.0 * np.log1p((mu * r) ** 2)


def bubble(x_i, mu_i, y, periods=None):
    """u_{x_i, mu_i}(y), radial about x_i in the flat (nearest-image) distance"""
    if mu_i <= 0:
        raise InvalidArgumentError(f'Bubble scale must be positive, got {mu_i}')
    value = bubble_radial(mu_i, torus_distance(x_i, y, periods))
    return float(value) if np.ndim(value) == 0 else value


def _check_centers(centers, cfg, periods):
    x = np.asarray(centers, dtype=float).reshape(-1, 2)
    tol = 1e-12 * max(periods)
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            if torus_distance(x[i], x[j], periods) < tol:
                raise InvalidConfigurationError(f'Centers {i} and {j} coincide on the torus')
        for j, p in enumerate(cfg.points):
            if torus_distance(x[i], p, periods) < tol:
                raise InvalidConfigurationError(f'Center {i} sits on vortex point {j}')
    return x


def rho_weights(cfg, g, centers):
    """rho_i = exp(8 pi gamma(x_i, x_i) + 8 pi sum_{j != i} G(x_j, x_i) + u0(x_i))"""
    x = _check_centers(centers, cfg, g.periods)
    exponents = np.empty(len(x))
    for i in range(len(x)):
        total = 8 * np.pi * float(g.gamma(x[i], x[i])) + u0_eval(g, cfg, x[i])
        for j in range(len(x)):
            if j != i:
                total += 8 * np.pi * float(g.green(x[j], x[i]))
        exponents[i] = total
    return np.exp(exponents)


def default_cutoff(cfg, centers, periods):
    """d with sqrt(d) a quarter of the minimal distance among centers and vortices"""
    points = np.vstack([np.asarray(centers, dtype=float).reshape(-1, 2), cfg.as_array()])
    delta = np.inf
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            delta = min(delta, float(torus_distance(points[i], points[j], periods)))
    if not np.isfinite(delta):
        delta = min(periods)
    return (delta / 4.0) ** 2


@dataclass(frozen=True)
class BubbleParams:
    """Centers x_i, scale mu, cutoff parameter d and the weights rho_i"""
    centers: tuple
    mu: float
    d: float
    rho: tuple
    periods: tuple = (1.0, 1.0)
    eps: float = None
    vortex_points: tuple = ()

    @property
    def k(self):
        return len(self.centers)

    @property
    def centers_array(self):
        return np.asarray(self.centers, dtype=float).reshape(-1, 2)

    @property
    def mu_i(self):
        rho = np.asarray(self.rho)
        return np.sqrt(rho[0] / rho) * self.mu

    @property
    def d_i(self):
        return np.sqrt(self.d - 1.0 / self.mu_i ** 2)

    @property
    def matching_factors(self):
        """1 - 1 / (d mu_i^2), the weight of the Green part of each profile"""
        return 1.0 - 1.0 / (self.d * self.mu_i ** 2)

    def in_window(self, beta0, beta1):
        if self.eps is None:
            return True
        root = np.sqrt(self.eps)
        return beta0 / root <= self.mu <= beta1 / root

    def with_mu(self, mu, eps=None):
        return make_bubble_params_from_weights(
            self.centers, mu, self.d, self.rho, self.periods,
            eps=self.eps if eps is None else eps, vortex_points=self.vortex_points,
        )

    def summary(self):
        return {
            'k': self.k,
            'mu': self.mu,
            'd': self.d,
            'eps': self.eps,
            'centers': [tuple(c) for c in self.centers],
            'mu_i': self.mu_i.tolist(),
            'd_i': self.d_i.tolist(),
            'rho_i': list(self.rho),
        }


def make_bubble_params_from_weights(centers, mu, d, rho, periods, eps=None, vortex_points=()):
    """Validated BubbleParams for precomputed weights"""
    if not mu > 0:
        raise InvalidArgumentError(f'mu must be positive, got {mu}')
    if not d > 0:
        raise InvalidArgumentError(f'd must be positive, got {d}')
    if eps is not None and not eps > 0:
        raise InvalidArgumentError(f'eps must be positive, got {eps}')
    x = np.mod(np.asarray(centers, dtype=float).reshape(-1, 2), np.asarray(periods))
    rho = np.asarray(rho, dtype=float)
    if len(rho) != len(x) or np.any(rho <= 0):
        raise InvalidArgumentError('One positive weight is needed per center')
    params = BubbleParams(
        centers=tuple((float(c[0]), float(c[1])) for c in x),
        mu=float(mu),
        d=float(d),
        rho=tuple(float(r) for r in rho),
        periods=(float(periods[0]), float(periods[1])),
        eps=None if eps is None else float(eps),
        vortex_points=tuple(tuple(p) for p in (vortex_points or ())),
    )
    squared = params.d - 1.0 / params.mu_i ** 2
    if np.any(squared <= 0):
        raise InvalidConfigurationError(
            f'd - 1/mu_i^2 must be positive (d={d}, mu_i={params.mu_i.tolist()}); increase mu or d'
        )
    radii = params.d_i
    if np.any(radii >= 0.5 * min(periods)):
        raise InvalidConfigurationError('Ball radii must stay below half the shortest period')
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            if torus_distance(x[i], x[j], periods) <= radii[i] + radii[j]:
                raise InvalidConfigurationError(f'Balls around centers {i} and {j} overlap')
        for j, p in enumerate(params.vortex_points):
            if torus_distance(x[i], p, periods) <= radii[i]:
                raise InvalidConfigurationError(f'Ball around center {i} contains vortex point {j}')
    return params


def make_bubble_params(g, cfg, centers, mu, d=None, eps=None):
    """
    Validated BubbleParams for the vortex configuration cfg.

    There must be k = N/2 centers. d defaults to default_cutoff.
    """
    x = _check_centers(np.mod(np.asarray(centers, dtype=float).reshape(-1, 2), g.periods), cfg, g.periods)
    if len(x) != cfg.k:
        raise InvalidConfigurationError(f'{len(x)} centers given but N/2 = {cfg.k}')
    if d is None:
        d = default_cutoff(cfg, x, g.periods)
        logger.debug('Default cutoff d = %.6g', d)
    rho = rho_weights(cfg, g, x)
    return make_bubble_params_from_weights(x, mu, d, rho, g.periods, eps=eps, vortex_points=cfg.points)
