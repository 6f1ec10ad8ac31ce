"""
Hybrid quadrature for integrands with sharp peaks at known centers.

The torus integral is split with a smooth partition of unity: each center
carries a polar patch (composite Gauss-Legendre in r, uniform in angle)
that sees chi_i f, and the grid trapezoid rule sees (1 - sum chi_i) f,
which is smooth at the grid scale.
"""
import logging
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import InvalidArgumentError

from .cutoffs import bump

logger = logging.getLogger(__name__)

GAUSS_ORDER = 12
ANGLES = 64


def radial_breaks(scale, radius, extra=()):
    """Panel edges 0, scale/2, scale, 2 scale, ... up to radius, plus extra breaks"""
    edges = [0.0]
    r = 0.5 * scale
    while r < radius:
        edges.append(r)
        r *= 2.0
    edges.append(radius)
    for b in extra:
        if 0.0 < b < radius:
            edges.append(float(b))
    return np.unique(np.asarray(edges))


def gauss_panels(edges, order=GAUSS_ORDER):
    """Composite Gauss-Legendre nodes and weights on consecutive panels"""
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


@dataclass(frozen=True, eq=False)
class PolarPatch:
    """Polar quadrature on the disk of given radius about center"""
    center: np.ndarray
    radius: float
    r: np.ndarray
    theta: np.ndarray
    weights: np.ndarray

    @property
    def points(self):
        return self.center + np.stack([self.r * np.cos(self.theta), self.r * np.sin(self.theta)], axis=-1)

    @property
    def offsets(self):
        return np.stack([self.r * np.cos(self.theta), self.r * np.sin(self.theta)], axis=-1)

    def integrate(self, values):
        return float(np.sum(self.weights * values))


def polar_patch(center, radius, scale=None, breaks=(), order=GAUSS_ORDER, angles=ANGLES):
    if radius <= 0:
        raise InvalidArgumentError(f'Patch radius must be positive, got {radius}')
    edges = radial_breaks(scale or radius, radius, breaks)
    r, wr = gauss_panels(edges, order)
    theta = 2 * np.pi * np.arange(angles) / angles
    R, T = np.meshgrid(r, theta, indexing='ij')
    W = (wr * r)[:, None] * np.full(angles, 2 * np.pi / angles)[None, :]
    return PolarPatch(
        center=np.asarray(center, dtype=float),
        radius=float(radius),
        r=R.ravel(),
        theta=T.ravel(),
        weights=W.ravel(),
    )


class HybridQuadrature:
    """Grid trapezoid plus one polar patch per peak center"""

    def __init__(self, domain, patches, blend_inner):
        self.domain = domain
        self.patches = list(patches)
        if len(blend_inner) != len(self.patches):
            raise InvalidArgumentError('One blend radius is needed per patch')
        nodes = domain.nodes
        cover = np.zeros((domain.n, domain.n))
        self._patch_weights = []
        for patch, inner in zip(self.patches, blend_inner):
            if not 0 < inner < patch.radius:
                raise InvalidArgumentError(
                    f'Blend radius {inner} must lie inside the patch radius {patch.radius}'
                )
            r = np.linalg.norm(domain.displacement(nodes, patch.center), axis=-1)
            cover += bump(r, inner, patch.radius)
            self._patch_weights.append(patch.weights * bump(patch.r, inner, patch.radius))
        if np.any(cover > 1.0 + 1e-12):
            raise InvalidArgumentError('Polar patches overlap')
        self.grid_weights = domain.cell_area * (1.0 - cover)

    def point_sets(self):
        """(points, weights) for the grid and for every patch"""
        sets = [(self.domain.nodes.reshape(-1, 2), self.grid_weights.ravel())]
        for patch, weights in zip(self.patches, self._patch_weights):
            sets.append((patch.points, weights))
        return sets

    def integrate(self, fn):
        """Integral over the torus of fn(points), fn vectorized over (..., 2)"""
        total = float(np.sum(self.grid_weights * fn(self.domain.nodes)))
        for patch, weights in zip(self.patches, self._patch_weights):
            total += float(np.sum(weights * fn(patch.points)))
        return total

    def integrate_split(self, grid_values, fn):
        """As integrate, with grid values supplied and fn used on patches only"""
        total = float(np.sum(self.grid_weights * grid_values))
        for patch, weights in zip(self.patches, self._patch_weights):
            total += float(np.sum(weights * fn(patch.points)))
        return total
