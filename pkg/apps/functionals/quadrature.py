"""
Cells around the points q_i and the polar quadrature rules on them.

A cell is the set of displacements delta from q_i (in the plane) with
|delta|^2 - w_i <= |delta - c|^2 - w_j for every lattice image c of every
q_j (q_i's own images included, with w_j = w_i). Zero weights give the
Voronoi cells of the torus; other weights move the cell walls while
keeping them straight, so every ray from q_i leaves the cell through one
wall and the exit radius is piecewise smooth in the angle.
"""
import logging
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import InvalidArgumentError, InvalidConfigurationError

logger = logging.getLogger(__name__)

IMAGE_RANGE = 2
RING_ANGLES = 64
RING_ORDER = 16
CELL_ORDER = 16


@dataclass(frozen=True, eq=False)
class Cell:
    """Cell of center q_i as walls 2 delta.c <= b"""
    center: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray

    def exit_radius(self, theta):
        """Distance from the center to the cell wall along direction theta"""
        e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        dots = 2.0 * e @ self.normals.T
        with np.errstate(divide='ignore', invalid='ignore'):
            t = np.where(dots > 0, self.offsets[None, :] / dots, np.inf)
        return t.min(axis=-1), t.argmin(axis=-1)

    @property
    def inradius(self):
        return float(np.min(self.offsets / (2.0 * np.linalg.norm(self.normals, axis=-1))))

    def contains(self, delta):
        delta = np.asarray(delta, dtype=float)
        return np.all(2.0 * delta @ self.normals.T <= self.offsets + 1e-14, axis=-1)

    def vertex_angles(self, samples=4096):
        """Angles where the active wall changes, located exactly"""
        theta = 2 * np.pi * np.arange(samples) / samples
        _, active = self.exit_radius(theta)
        switches = np.flatnonzero(active != np.roll(active, -1))
        angles = []
        for s in switches:
            a, b = active[s], active[(s + 1) % samples]
            matrix = 2.0 * np.vstack([self.normals[a], self.normals[b]])
            try:
                vertex = np.linalg.solve(matrix, [self.offsets[a], self.offsets[b]])
            except np.linalg.LinAlgError:
                continue
            angles.append(np.mod(np.arctan2(vertex[1], vertex[0]), 2 * np.pi))
        angles = np.sort(np.asarray(angles))
        if len(angles) == 0:
            return angles
        keep = np.concatenate([[True], np.diff(angles) > 1e-12])
        angles = angles[keep]
        if len(angles) > 1 and angles[-1] - angles[0] > 2 * np.pi - 1e-12:
            angles = angles[:-1]
        return angles


@dataclass(frozen=True)
class Partition:
    """Power-diagram partition of the torus among the points q"""
    q: tuple
    periods: tuple
    weights: tuple = ()

    def cell(self, i):
        q = np.asarray(self.q, dtype=float).reshape(-1, 2)
        weights = np.asarray(self.weights or [0.0] * len(q), dtype=float)
        periods = np.asarray(self.periods)
        r = np.arange(-IMAGE_RANGE, IMAGE_RANGE + 1)
        m1, m2 = np.meshgrid(r, r, indexing='ij')
        lattice = np.stack([m1.ravel() * periods[0], m2.ravel() * periods[1]], axis=-1)
        normals, offsets = [], []
        for j in range(len(q)):
            delta = q[j] - q[i]
            delta = delta - periods * np.round(delta / periods)
            for c in delta + lattice:
                if np.linalg.norm(c) < 1e-14:
                    continue
                normals.append(c)
                offsets.append(c @ c + weights[i] - weights[j])
        offsets = np.asarray(offsets)
        if np.any(offsets <= 0):
            raise InvalidConfigurationError(f'Cell {i} is empty for weights {tuple(weights)}')
        return Cell(center=q[i].copy(), normals=np.asarray(normals), offsets=offsets)

    def cells(self):
        return [self.cell(i) for i in range(len(self.q))]


def voronoi_partition(q, periods):
    q = np.asarray(q, dtype=float).reshape(-1, 2)
    return Partition(q=tuple(map(tuple, q)), periods=tuple(periods))


def power_partition(q, periods, weights):
    q = np.asarray(q, dtype=float).reshape(-1, 2)
    if len(weights) != len(q):
        raise InvalidArgumentError('One weight is needed per point')
    return Partition(q=tuple(map(tuple, q)), periods=tuple(periods), weights=tuple(float(w) for w in weights))


# ============================================
# QUADRATURE RULES
# ============================================

def ring_rule(inner, outer, order=RING_ORDER, angles=RING_ANGLES):
    """Offsets and weights on the annulus inner <= |delta| <= outer"""
    if angles % 2:
        raise InvalidArgumentError('Ring quadrature needs an even number of angles')
    x, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (outer - inner) * x + 0.5 * (outer + inner)
    wt = 0.5 * (outer - inner) * w * t
    theta = 2 * np.pi * np.arange(angles) / angles
    T, A = np.meshgrid(t, theta, indexing='ij')
    offsets = np.stack([T * np.cos(A), T * np.sin(A)], axis=-1).reshape(-1, 2)
    weights = (wt[:, None] * np.full(angles, 2 * np.pi / angles)[None, :]).ravel()
    return offsets, weights


def ring_integral(fn, inner, outer, order=RING_ORDER, angles=RING_ANGLES):
    """Integral of fn(delta) over the annulus"""
    offsets, weights = ring_rule(inner, outer, order, angles)
    return float(np.sum(weights * fn(offsets)))


def cell_rule(cell, inner, order=CELL_ORDER, panels=2):
    """Offsets and weights on the part of the cell outside B_inner"""
    if inner >= cell.inradius * (1 + 1e-12):
        raise InvalidArgumentError(f'Disk radius {inner} exceeds the cell inradius {cell.inradius}')
    vertices = cell.vertex_angles()
    if len(vertices) == 0:
        vertices = np.array([0.0])
    edges = np.concatenate([vertices, [vertices[0] + 2 * np.pi]])
    x, w = np.polynomial.legendre.leggauss(order)
    offsets, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        theta = 0.5 * (b - a) * x + 0.5 * (a + b)
        wtheta = 0.5 * (b - a) * w
        outer, _ = cell.exit_radius(theta)
        # geometric panels in r between the disk and the wall
        bounds = inner * (outer / inner)[:, None] ** (np.arange(panels + 1) / panels)[None, :]
        for p in range(panels):
            lo, hi = bounds[:, p], bounds[:, p + 1]
            t = 0.5 * (hi - lo)[:, None] * x[None, :] + 0.5 * (hi + lo)[:, None]
            wt = 0.5 * (hi - lo)[:, None] * w[None, :] * t
            e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            offsets.append((t[:, :, None] * e[:, None, :]).reshape(-1, 2))
            weights.append((wt * wtheta[:, None]).ravel())
    return np.concatenate(offsets), np.concatenate(weights)


def cell_integral(fn, cell, inner, order=CELL_ORDER):
    offsets, weights = cell_rule(cell, inner, order)
    return float(np.sum(weights * fn(offsets)))


def outside_disk_tail(radius):
    """int over R^2 minus B_radius of |delta|^-4"""
    return np.pi / radius ** 2


def outside_cell_tail(cell, inner=None, order=CELL_ORDER):
    """
    int over R^2 minus the cell of |delta|^-4, as the disk tail minus the
    integral over the cell outside B_inner (inner defaults to the inradius)
    """
    inner = cell.inradius if inner is None else inner
    inside = cell_integral(lambda d: np.sum(d ** 2, axis=-1) ** -2, cell, inner, order)
    return outside_disk_tail(inner) - inside
