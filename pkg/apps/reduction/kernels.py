"""
Approximate kernels of the linearized operator L = Lap + h_mu.

Inside B_{d_i}(x_i) they coincide with exact kernels of the Liouville
equation linearized about the i-th bubble; the quintic cutoff chi_i
switches them off between d_i and 2 d_i. Kernels are indexed 0 for Y0
and 1 + 2 i + j for Y_{x_i, mu_i, j}.
"""
import logging
from dataclasses import dataclass

import numpy as np

from apps.ansatz.bubbles import bubble_radial, torus_displacement
from apps.ansatz.profile import quadrature_domain
from apps.core.exceptions import InvalidArgumentError, InvalidConfigurationError
from apps.torus.cutoffs import smoothstep_derivatives
from apps.torus.spectral import Field

logger = logging.getLogger(__name__)


def h_mu(params, y):
    """sum_i 1_{B_{d_i}(x_i)} e^{u_{x_i, mu_i}}"""
    y = np.asarray(y, dtype=float)
    total = np.zeros(y.shape[:-1])
    for i in range(params.k):
        delta = torus_displacement(params.centers_array[i], y, params.periods)
        r = np.linalg.norm(delta, axis=-1)
        total = total + np.where(r < params.d_i[i], np.exp(bubble_radial(params.mu_i[i], r)), 0.0)
    return float(total) if total.ndim == 0 else total


def kernel_count(params):
    return 2 * params.k + 1


def kernel_label(a):
    if a == 0:
        return 'Y0'
    i, j = divmod(a - 1, 2)
    return f'Y{i + 1}{j + 1}'


def _inverse_quadratic(mu, r):
    """s = 1 / (1 + mu^2 r^2) with s'/r and s''"""
    s = 1.0 / (1.0 + (mu * r) ** 2)
    s1_over_r = -2.0 * mu * mu * s * s
    s2 = s1_over_r + 8.0 * mu ** 4 * r * r * s ** 3
    return s, s1_over_r, s2


def _cutoff(params, i, r):
    """chi_i with chi_i', chi_i'' and chi_i'/r"""
    inner = params.d_i[i]
    chi, d1, d2 = smoothstep_derivatives(r, inner, 2.0 * inner)
    safe = np.where(r > 0, r, 1.0)
    return chi, d1, d2, np.where(r > 0, d1 / safe, 0.0)


def kernel_values(params, a, y):
    """Y_a and Lap Y_a at the points y"""
    count = kernel_count(params)
    if not 0 <= a < count:
        raise InvalidArgumentError(f'Kernel index {a} outside 0..{count - 1}')
    y = np.asarray(y, dtype=float)
    rho = np.asarray(params.rho)
    if a == 0:
        value = np.full(y.shape[:-1], -1.0 / params.mu_i[0])
        lap = np.zeros(y.shape[:-1])
        for i in range(params.k):
            mu = params.mu_i[i]
            r = np.linalg.norm(torus_displacement(params.centers_array[i], y, params.periods), axis=-1)
            s, s1r, s2 = _inverse_quadratic(mu, r)
            chi, c1, c2, c1r = _cutoff(params, i, r)
            weight = np.sqrt(rho[0] / rho[i]) * 2.0 / mu
            value = value + weight * chi * s
            lap = lap + weight * (c2 * s + 2.0 * c1 * r * s1r + chi * s2 + c1r * s + chi * s1r)
        return value, lap

    i, j = divmod(a - 1, 2)
    mu = params.mu_i[i]
    delta = torus_displacement(params.centers_array[i], y, params.periods)
    r = np.linalg.norm(delta, axis=-1)
    s, s1r, s2 = _inverse_quadratic(mu, r)
    chi, c1, c2, c1r = _cutoff(params, i, r)
    m2 = mu * mu
    radial = chi * m2 * s
    # Lap(G(r) delta_j) = delta_j (G'' + 3 G'/r)
    second = c2 * m2 * s + 2.0 * c1 * m2 * r * s1r + chi * m2 * s2
    first_over_r = c1r * m2 * s + chi * m2 * s1r
    return radial * delta[..., j], (second + 3.0 * first_over_r) * delta[..., j]


def kernel_z(params, a, y):
    """Z_a = -Lap Y_a + h_mu Y_a"""
    value, lap = kernel_values(params, a, y)
    return -lap + h_mu(params, y) * value


def operator_residual(params, a, y):
    """L Y_a = Lap Y_a + h_mu Y_a"""
    value, lap = kernel_values(params, a, y)
    return lap + h_mu(params, y) * value


@dataclass(frozen=True, eq=False)
class KernelSet:
    """Y and Z kernels of one bubble configuration, with their grid samples"""
    params: object
    domain: object
    Y: tuple
    Z: tuple

    @property
    def count(self):
        return len(self.Y)

    @property
    def Y0(self):
        return self.Y[0]

    @property
    def Z0(self):
        return self.Z[0]

    @property
    def Yij(self):
        return [[self.Y[1 + 2 * i + j] for j in range(2)] for i in range(self.params.k)]

    @property
    def Zij(self):
        return [[self.Z[1 + 2 * i + j] for j in range(2)] for i in range(self.params.k)]

    @property
    def chi(self):
        """(inner, outer) radii of every cutoff"""
        return tuple((float(r), float(2 * r)) for r in self.params.d_i)

    @property
    def labels(self):
        return [kernel_label(a) for a in range(self.count)]

    def values(self, a, points):
        return kernel_values(self.params, a, points)[0]

    def laplacian(self, a, points):
        return kernel_values(self.params, a, points)[1]

    def z_values(self, a, points):
        return kernel_z(self.params, a, points)

    def operator_residual_sup(self, a):
        """max over the grid of |L Y_a|"""
        return float(np.max(np.abs(operator_residual(self.params, a, self.domain.nodes))))


def build_kernels(params, domain=None):
    """Grid samples of Y and Z; each support B_{2 d_i} must fit in the torus"""
    if np.any(2.0 * params.d_i >= 0.5 * min(params.periods)):
        raise InvalidConfigurationError(
            f'Kernel supports 2 d_i = {(2 * params.d_i).tolist()} reach half a period'
        )
    domain = domain or quadrature_domain(params)
    nodes = domain.nodes
    Y, Z = [], []
    for a in range(kernel_count(params)):
        value, lap = kernel_values(params, a, nodes)
        label = kernel_label(a)
        Y.append(Field(domain, value, name=label))
        Z.append(Field(domain, -lap + h_mu(params, nodes) * value, name='Z' + label[1:]))
    logger.debug('Kernels for mu=%.6g on a %d grid', params.mu, domain.n)
    return KernelSet(params=params, domain=domain, Y=tuple(Y), Z=tuple(Z))
