"""
Doubly periodic Green function of the flat torus by Ewald splitting.

G solves -Lap G(., y) = delta_y - 1/|Omega| with zero mean. With the split
parameter a, G(x, y) = G(r), r = x - y, is

    sum_R E1(a^2 |r + R|^2) / (4 pi)
    + (1/|Omega|) sum_{k != 0} exp(-|k|^2 / 4a^2) cos(k.r) / |k|^2
    - 1 / (4 a^2 |Omega|)

The regular part gamma(x, y) = G(x, y) + ln|x - y| / (2 pi) uses the
nearest-image distance, and its nearest-image term is evaluated through
E1(z) + ln z so it stays finite at x = y.
"""
import logging
import math

import numpy as np
from scipy.integrate import quad
from scipy.special import exp1

from apps.core.exceptions import InvalidArgumentError, SingularPointError
from apps.torus.cutoffs import bump_derivatives
from apps.torus.spectral import Field

logger = logging.getLogger(__name__)

# exp(-40) bounds both truncated tails
TAIL_EXPONENT = 40.0
CHUNK = 2048


def _ein_regular(z):
    """E1(z) + ln z, finite at z = 0"""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 0.5
    if np.any(small):
        zs = z[small]
        term = np.ones_like(zs)
        total = np.zeros_like(zs)
        for n in range(1, 30):
            term = term * zs / n
            total += (-1) ** (n + 1) * term / n
        out[small] = -np.euler_gamma + total
    large = ~small
    if np.any(large):
        out[large] = exp1(z[large]) + np.log(z[large])
    return out


def _one_minus_exp_over(z):
    """(1 - e^-z) / z, finite at z = 0"""
    z = np.asarray(z, dtype=float)
    safe = np.where(z > 0, z, 1.0)
    return np.where(z > 1e-300, -np.expm1(-safe) / safe, 1.0)


def _second_order_remainder(z):
    """(1 - e^-z (1 + z)) / z^2, finite at z = 0"""
    z = np.asarray(z, dtype=float)
    small = z < 1e-2
    zs = np.where(small, z, 0.0)
    series = 0.5 - zs / 3.0 + zs ** 2 / 8.0 - zs ** 3 / 30.0
    safe = np.where(small, 1.0, z)
    direct = (-np.expm1(-safe) - safe * np.exp(-safe)) / safe ** 2
    return np.where(small, series, direct)


class GreenEvaluator:
    """Immutable Ewald evaluator for G, gamma and their derivatives"""

    def __init__(self, periods, ewald_split=None, real_cutoff=None, fourier_cutoff=None):
        L1, L2 = (float(periods[0]), float(periods[1]))
        if not (L1 > 0 and L2 > 0):
            raise InvalidArgumentError(f'Periods must be positive, got {periods}')
        self.periods = (L1, L2)
        self.area = L1 * L2
        a = math.sqrt(math.pi / self.area) if ewald_split is None else float(ewald_split)
        if a <= 0:
            raise InvalidArgumentError(f'Ewald split must be positive, got {ewald_split}')
        self.ewald_split = a
        if real_cutoff is None:
            real_cutoff = math.ceil(math.sqrt(TAIL_EXPONENT) / (a * min(L1, L2))) + 1
        if fourier_cutoff is None:
            fourier_cutoff = math.ceil(2 * a * math.sqrt(TAIL_EXPONENT) * max(L1, L2) / (2 * math.pi)) + 1
        self.real_cutoff = int(real_cutoff)
        self.fourier_cutoff = int(fourier_cutoff)

        m = np.arange(-self.real_cutoff, self.real_cutoff + 1)
        i, j = np.meshgrid(m, m, indexing='ij')
        images = np.stack([i.ravel() * L1, j.ravel() * L2], axis=-1)
        nearest = (i.ravel() == 0) & (j.ravel() == 0)
        self._images = images[~nearest]

        f = np.arange(-self.fourier_cutoff, self.fourier_cutoff + 1)
        i, j = np.meshgrid(f, f, indexing='ij')
        kvecs = np.stack([2 * np.pi * i.ravel() / L1, 2 * np.pi * j.ravel() / L2], axis=-1)
        kvecs = kvecs[(i.ravel() != 0) | (j.ravel() != 0)]
        ksq = np.sum(kvecs ** 2, axis=-1)
        self._kvecs = kvecs
        self._kweights = np.exp(-ksq / (4 * a * a)) / ksq / self.area
        self._background = 1.0 / (4 * a * a * self.area)
        logger.debug(
            'Green evaluator: a=%.6g, %d images, %d Fourier modes',
            a, len(self._images) + 1, len(self._kvecs),
        )

    def __repr__(self):
        return (
            f'GreenEvaluator(periods={self.periods}, ewald_split={self.ewald_split:.6g}, '
            f'real_cutoff={self.real_cutoff}, fourier_cutoff={self.fourier_cutoff})'
        )

    # ----------------------------------------
    # displacement handling
    # ----------------------------------------

    def _displacements(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        delta = x - y
        periods = np.asarray(self.periods)
        delta = delta - periods * np.round(delta / periods)
        shape = delta.shape[:-1]
        return delta.reshape(-1, 2), shape

    def _check_separated(self, r):
        rho = np.linalg.norm(r, axis=-1)
        tol = 1e-12 * max(self.periods)
        if np.any(rho < tol):
            raise SingularPointError(
                'Green function evaluated at coincident points; use gamma_eval',
                index=int(np.argmin(rho)),
            )

    # ----------------------------------------
    # chunked kernels on min-image displacements r, shape (P, 2)
    # ----------------------------------------

    def _values(self, r, regular):
        a2 = self.ewald_split ** 2
        out = np.empty(len(r))
        for start in range(0, len(r), CHUNK):
            rc = r[start:start + CHUNK]
            shifted = rc[:, None, :] + self._images[None, :, :]
            z = a2 * np.sum(shifted ** 2, axis=-1)
            short = exp1(z).sum(axis=1)
            z0 = a2 * np.sum(rc ** 2, axis=-1)
            if regular:
                near = _ein_regular(z0) - math.log(a2)
            else:
                near = exp1(z0)
            phases = rc @ self._kvecs.T
            long = np.cos(phases) @ self._kweights
            out[start:start + CHUNK] = (short + near) / (4 * np.pi) + long - self._background
        return out

    def _gradients(self, r, regular):
        a2 = self.ewald_split ** 2
        out = np.empty_like(r)
        for start in range(0, len(r), CHUNK):
            rc = r[start:start + CHUNK]
            shifted = rc[:, None, :] + self._images[None, :, :]
            rho2 = np.sum(shifted ** 2, axis=-1)
            coef = np.exp(-a2 * rho2) / rho2
            short = -(coef[:, :, None] * shifted).sum(axis=1) / (2 * np.pi)
            z0 = a2 * np.sum(rc ** 2, axis=-1)
            if regular:
                near = rc * (a2 * _one_minus_exp_over(z0))[:, None] / (2 * np.pi)
            else:
                near = -rc * (np.exp(-z0) / np.sum(rc ** 2, axis=-1))[:, None] / (2 * np.pi)
            phases = rc @ self._kvecs.T
            long = -(np.sin(phases) * self._kweights) @ self._kvecs
            out[start:start + CHUNK] = short + near + long
        return out

    def _hessians(self, r, regular):
        a2 = self.ewald_split ** 2
        eye = np.eye(2)
        out = np.empty((len(r), 2, 2))
        for start in range(0, len(r), CHUNK):
            rc = r[start:start + CHUNK]
            shifted = rc[:, None, :] + self._images[None, :, :]
            rho2 = np.sum(shifted ** 2, axis=-1)
            z = a2 * rho2
            e = np.exp(-z)
            outer = shifted[..., :, None] * shifted[..., None, :]
            short = (
                -(e / (2 * np.pi * rho2))[..., None, None] * eye
                + (e * (z + 1) / (np.pi * rho2 ** 2))[..., None, None] * outer
            ).sum(axis=1)
            rho0 = np.sum(rc ** 2, axis=-1)
            z0 = a2 * rho0
            outer0 = rc[:, :, None] * rc[:, None, :]
            if regular:
                near = (
                    (a2 * _one_minus_exp_over(z0) / (2 * np.pi))[:, None, None] * eye
                    - (a2 * a2 * _second_order_remainder(z0) / np.pi)[:, None, None] * outer0
                )
            else:
                e0 = np.exp(-z0)
                near = (
                    -(e0 / (2 * np.pi * rho0))[:, None, None] * eye
                    + (e0 * (z0 + 1) / (np.pi * rho0 ** 2))[:, None, None] * outer0
                )
            phases = rc @ self._kvecs.T
            weights = np.cos(phases) * self._kweights
            long = -np.einsum('pk,ki,kj->pij', weights, self._kvecs, self._kvecs)
            out[start:start + CHUNK] = short + near + long
        return out

    # ----------------------------------------
    # public evaluation, x and y broadcast over leading axes
    # ----------------------------------------

    def green(self, x, y):
        r, shape = self._displacements(x, y)
        self._check_separated(r)
        return self._values(r, regular=False).reshape(shape)

    def gamma(self, x, y):
        r, shape = self._displacements(x, y)
        return self._values(r, regular=True).reshape(shape)

    def grad_green(self, x, y):
        """Gradient of G(x, y) in x"""
        r, shape = self._displacements(x, y)
        self._check_separated(r)
        return self._gradients(r, regular=False).reshape(shape + (2,))

    def grad_gamma(self, x, y):
        """Gradient of gamma(x, y) in x"""
        r, shape = self._displacements(x, y)
        return self._gradients(r, regular=True).reshape(shape + (2,))

    def hess_green(self, x, y):
        """Hessian of G(x, y) in x"""
        r, shape = self._displacements(x, y)
        self._check_separated(r)
        return self._hessians(r, regular=False).reshape(shape + (2, 2))

    def hess_gamma(self, x, y):
        r, shape = self._displacements(x, y)
        return self._hessians(r, regular=True).reshape(shape + (2, 2))


def make_green(domain, ewald_split=None):
    return GreenEvaluator(domain.periods, ewald_split=ewald_split)


# ============================================
# SCALAR ENTRY POINTS
# ============================================

def green_eval(g, x, y):
    return float(g.green(x, y))


def gamma_eval(g, x, y):
    return float(g.gamma(x, y))


def grad_green(g, x, y):
    return np.asarray(g.grad_green(x, y))


def grad_gamma(g, x, y):
    return np.asarray(g.grad_gamma(x, y))


# ============================================
# SINGULAR BACKGROUND u0 = -4 pi sum_j m_j G(., p_j)
# ============================================

def u0_eval(g, cfg, x):
    """u0 at one point or an array of points"""
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape[:-1])
    for p, m in zip(cfg.points, cfg.multiplicities):
        total = total - 4 * np.pi * m * g.green(x, np.asarray(p))
    return total if total.shape else float(total)


def grad_u0(g, cfg, x):
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape)
    for p, m in zip(cfg.points, cfg.multiplicities):
        total = total - 4 * np.pi * m * g.grad_green(x, np.asarray(p))
    return total


def hess_u0(g, cfg, x):
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape + (2,))
    for p, m in zip(cfg.points, cfg.multiplicities):
        total = total - 4 * np.pi * m * g.hess_green(x, np.asarray(p))
    return total


def u0_field(g, cfg, domain):
    """u0 sampled at the grid nodes; no node may sit on a vortex point"""
    for j, p in enumerate(cfg.points):
        if domain.node_distance(p) < 1e-12 * max(domain.periods):
            raise SingularPointError(
                f'Vortex point {j} at {p} lies on a grid node; shift the grid offset',
                index=j,
            )
    nodes = domain.nodes.reshape(-1, 2)
    values = np.zeros(len(nodes))
    if len(cfg):
        values = u0_eval(g, cfg, nodes)
    return Field(domain, values.reshape(domain.n, domain.n), name='u0')


def desingularization_radii(points, periods):
    """Inner and outer radii of the log cutoffs around each point"""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    outer = 0.2 * min(periods)
    periods = np.asarray(periods)
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            delta = pts[i] - pts[j]
            delta -= periods * np.round(delta / periods)
            outer = min(outer, 0.45 * float(np.linalg.norm(delta)))
    return 0.25 * outer, outer


def green_mean(g, domain, points, weights=None, radii=None):
    """
    Mean over the torus of sum_j w_j G(., p_j).

    The logarithm of each source is cut off by a smooth bump and its
    integral taken in polar form, so the grid only sees smooth data.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    weights = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=float)
    inner, outer = radii or desingularization_radii(pts, domain.periods)
    nodes = domain.nodes
    smooth = np.zeros((domain.n, domain.n))
    for p, w in zip(pts, weights):
        r = np.linalg.norm(domain.displacement(nodes, p), axis=-1)
        chi, _, _ = bump_derivatives(r, inner, outer)
        smooth += w * (g.green(nodes, p) + chi * np.log(r) / (2 * np.pi))
    radial, _ = quad(lambda s: float(bump_derivatives(s, inner, outer)[0]) * s * math.log(s),
                     0.0, outer, points=[inner], limit=200, epsabs=1e-14)
    total = smooth.sum() * domain.cell_area - weights.sum() * radial
    return float(total / domain.area)


def u0_mean(g, cfg, domain):
    if not len(cfg):
        return 0.0
    return -4 * np.pi * green_mean(g, domain, cfg.as_array(), cfg.weights())


def u0_smooth_part(g, cfg, domain, radii=None):
    """
    Split u0 = smooth + sum_j 2 m_j chi_j ln|x - p_j|.

    Returns the smooth part on the grid and the remainder
    sum_j 2 m_j Lap(chi_j ln r_j) away from p_j, so that
    Lap(smooth) + remainder = -4 pi N / |Omega|.
    """
    inner, outer = radii or desingularization_radii(cfg.as_array(), domain.periods)
    u0 = u0_field(g, cfg, domain)
    nodes = domain.nodes
    smooth = u0.values.copy()
    remainder = np.zeros_like(smooth)
    for p, m in zip(cfg.points, cfg.multiplicities):
        r = np.linalg.norm(domain.displacement(nodes, np.asarray(p)), axis=-1)
        chi, d1, d2 = bump_derivatives(r, inner, outer)
        log_r = np.log(r)
        smooth -= 2 * m * chi * log_r
        remainder += 2 * m * (d2 * log_r + d1 * log_r / r + 2 * d1 / r)
    return Field(domain, smooth, name='u0_smooth'), remainder
