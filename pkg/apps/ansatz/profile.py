"""
The matched profile w*, the matching constant c(w) and the approximate
solution W~ = w* - mean(w*) + c, u = 1 + u0 + W~ + eta.

Integrals of bubble-shaped integrands go through a HybridQuadrature whose
polar patches resolve the cores and the matching circles |y - x_i| = d_i;
everything else is pointwise and analytic.
"""
import logging
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import AnsatzInfeasibleError, InvalidArgumentError, OutOfBranchError
from apps.green.ewald import u0_eval, u0_field
from apps.higgs.branch import get_model
from apps.torus.quadrature import HybridQuadrature, polar_patch
from apps.torus.spectral import Field, make_domain

from .bubbles import bubble_radial, torus_distance

logger = logging.getLogger(__name__)

QUADRATURE_GRID = 128


# ============================================
# PROFILES
# ============================================

def w_star_branches(params, g, i, y):
    """Inner and outer branch of w*_{x_i, mu_i} at y, both evaluated everywhere"""
    y = np.asarray(y, dtype=float)
    x = params.centers_array[i]
    mu, radius = params.mu_i[i], params.d_i[i]
    factor = params.matching_factors[i]
    r = torus_distance(x, y, params.periods)
    gamma = g.gamma(y, x)
    inner = bubble_radial(mu, r) + 8 * np.pi * gamma * factor
    # 8 pi (G + ln d_i / 2 pi) with G = gamma - ln r / 2 pi
    with np.errstate(divide='ignore'):
        outer = bubble_radial(mu, radius) + (8 * np.pi * gamma - 4.0 * np.log(r / radius)) * factor
    return inner, outer


def w_star_component(params, g, i, y):
    inner, outer = w_star_branches(params, g, i, y)
    r = torus_distance(params.centers_array[i], y, params.periods)
    return np.where(r < params.d_i[i], inner, outer)


def w_star(params, g, cfg, y):
    """sum_i w*_{x_i, mu_i}(y)"""
    y = np.asarray(y, dtype=float)
    total = np.zeros(y.shape[:-1])
    for i in range(params.k):
        total = total + w_star_component(params, g, i, y)
    return float(total) if total.ndim == 0 else total


def w_star_laplacian(params, y, area):
    """Lap w* = sum_i [-e^{u_i} 1_{B_{d_i}} + 8 pi (1 - 1/(d mu_i^2)) / |Omega|]"""
    y = np.asarray(y, dtype=float)
    total = np.zeros(y.shape[:-1])
    for i in range(params.k):
        x = params.centers_array[i]
        r = torus_distance(x, y, params.periods)
        core = np.exp(bubble_radial(params.mu_i[i], r))
        total = total - np.where(r < params.d_i[i], core, 0.0) + 8 * np.pi * params.matching_factors[i] / area
    return total


# ============================================
# QUADRATURE
# ============================================

def bubble_quadrature(params, domain):
    """HybridQuadrature with one polar patch per center, reaching past the matching circle"""
    x = params.centers_array
    periods = params.periods
    patches, blends = [], []
    for i in range(params.k):
        radius = params.d_i[i]
        reach = min(2.0 * radius, 0.45 * min(periods))
        for j in range(params.k):
            if j != i:
                reach = min(reach, 0.45 * float(torus_distance(x[i], x[j], periods)))
        for p in params.vortex_points:
            reach = min(reach, 0.9 * float(torus_distance(x[i], p, periods)))
        if reach > 1.1 * radius:
            blend = radius + 0.2 * (reach - radius)
        else:
            logger.warning('Patch %d cannot enclose its matching circle; quadrature degrades', i)
            blend = 0.5 * reach
        patches.append(polar_patch(x[i], reach, scale=1.0 / params.mu_i[i], breaks=(radius,)))
        blends.append(blend)
    return HybridQuadrature(domain, patches, blends)


def quadrature_domain(params, n=QUADRATURE_GRID):
    return make_domain(params.periods[0], params.periods[1], n)


def mean_w_star(params, g, cfg, quad):
    return quad.integrate(lambda y: w_star(params, g, cfg, y)) / quad.domain.area


def component_means(params, g, quad):
    return np.array([
        quad.integrate(lambda y, i=i: w_star_component(params, g, i, y)) / quad.domain.area
        for i in range(params.k)
    ])


def mass_integrals(params, g, cfg, quad, mean=None):
    """A = int e^{u0 + w}, B = int e^{2(u0 + w)} with w = w* - mean(w*)"""
    if mean is None:
        mean = mean_w_star(params, g, cfg, quad)

    def exponent(y):
        return u0_eval(g, cfg, y) + w_star(params, g, cfg, y) - mean

    A = quad.integrate(lambda y: np.exp(exponent(y)))
    B = quad.integrate(lambda y: np.exp(2.0 * exponent(y)))
    return A, B


def c_of_w(params, g, cfg, quad=None, mean=None):
    """
    ln 16 k pi eps^2 / (A (1 + sqrt(1 - 32 k pi eps^2 B / A^2))).

    Raises AnsatzInfeasibleError when the discriminant is negative.
    """
    if params.eps is None:
        raise InvalidArgumentError('c(w) needs the bubble parameters tied to an eps')
    quad = quad or bubble_quadrature(params, quadrature_domain(params))
    A, B = mass_integrals(params, g, cfg, quad, mean)
    k = cfg.k
    eps2 = params.eps ** 2
    discriminant = 1.0 - 32 * k * np.pi * eps2 * B / A ** 2
    if discriminant < 0:
        raise AnsatzInfeasibleError(
            f'Negative discriminant {discriminant:.3e}: eps = {params.eps} is too large for mu = {params.mu}',
            discriminant=discriminant, eps=params.eps, mu=params.mu,
        )
    return float(np.log(16 * k * np.pi * eps2 / (A * (1.0 + np.sqrt(discriminant)))))


def bubble_mass(params, g, cfg, i):
    """int over B_{d_i}(x_i) of e^{w* + u0}"""
    patch = polar_patch(params.centers_array[i], params.d_i[i], scale=1.0 / params.mu_i[i])
    points = patch.points
    return patch.integrate(np.exp(w_star(params, g, cfg, points) + u0_eval(g, cfg, points)))


def total_mass(params, g, cfg, quad):
    return quad.integrate(lambda y: np.exp(w_star(params, g, cfg, y) + u0_eval(g, cfg, y)))


def mass_normalization(params):
    """8^{k-1} rho_1 / prod_{i >= 2} mu_i^2"""
    return 8.0 ** (params.k - 1) * params.rho[0] / np.prod(params.mu_i[1:] ** 2)


# ============================================
# APPROXIMATE SOLUTION
# ============================================

@dataclass(frozen=True, eq=False)
class AnsatzField:
    """W~ on a grid with the data needed to evaluate it anywhere"""
    params: object
    W_tilde: Field
    c_value: float
    components: tuple
    mean_w_star: float
    u0: Field
    green: object = None
    vortices: object = None

    @property
    def domain(self):
        return self.W_tilde.domain

    @property
    def shift(self):
        """The constant c - mean(w*) added to w*"""
        return self.c_value - self.mean_w_star

    def at(self, points):
        """W~ at arbitrary points"""
        return w_star(self.params, self.green, self.vortices, points) + self.shift

    def laplacian_at(self, points):
        return w_star_laplacian(self.params, points, self.domain.area)

    def laplacian(self):
        return Field(self.domain, self.laplacian_at(self.domain.nodes), name='lap_W')

    def u_at(self, points):
        """1 + u0 + W~ at arbitrary points"""
        return 1.0 + u0_eval(self.green, self.vortices, points) + self.at(points)

    def summary(self):
        out = self.params.summary()
        out.update(c=self.c_value, mean_w_star=self.mean_w_star)
        return out


def build_ansatz(params, g, cfg, domain, quad=None):
    quad = quad or bubble_quadrature(params, quadrature_domain(params, max(domain.n, QUADRATURE_GRID)))
    mean = mean_w_star(params, g, cfg, quad)
    c = c_of_w(params, g, cfg, quad, mean=mean)
    nodes = domain.nodes
    components = tuple(
        Field(domain, w_star_component(params, g, i, nodes), name=f'w*_{i}')
        for i in range(params.k)
    )
    total = sum(f.values for f in components)
    W = Field(domain, total - mean + c, name='W~')
    logger.info('Ansatz: mu=%.6g, eps=%s, c=%.6g, mean(w*)=%.6g', params.mu, params.eps, c, mean)
    return AnsatzField(
        params=params,
        W_tilde=W,
        c_value=c,
        components=components,
        mean_w_star=mean,
        u0=u0_field(g, cfg, domain),
        green=g,
        vortices=cfg,
    )


def candidate_u(ansatz, eta=None, model=None):
    """u = 1 + u0 + W~ + eta on the grid, checked against the model's branch"""
    values = 1.0 + ansatz.u0.values + ansatz.W_tilde.values
    if eta is not None:
        if eta.domain != ansatz.domain:
            raise InvalidArgumentError('eta must live on the ansatz grid')
        values = values + eta.values
    limit = get_model(model).max_u
    if np.any(values > limit):
        index = np.unravel_index(int(np.argmax(values)), values.shape)
        raise OutOfBranchError(
            f'Candidate u reaches {values[index]:.3e} > {limit}; (eps, mu) is not admissible',
            worst_value=float(values[index]), worst_index=index,
        )
    return Field(ansatz.domain, values, name='u')


def ansatz_residual_at(ansatz, points, model=None):
    """Lap W~ + N_eps(1 + u0 + W~) - 4 pi N / |Omega| at arbitrary points"""
    model = get_model(model)
    source = 4 * np.pi * ansatz.vortices.N / ansatz.domain.area
    return ansatz.laplacian_at(points) + model(ansatz.u_at(points), ansatz.params.eps) - source


def ansatz_residual(ansatz, model=None):
    """The same residual on the ansatz grid"""
    model = get_model(model)
    u = candidate_u(ansatz, model=model)
    source = 4 * np.pi * ansatz.vortices.N / ansatz.domain.area
    values = ansatz.laplacian_at(ansatz.domain.nodes) + model(u.values, ansatz.params.eps) - source
    return Field(ansatz.domain, values, name='R_ansatz')
