"""
Projected residuals and the reduced equations in (x, mu).

The projection of the equation residual on Y_a is

    R_a = int [N(u) + Lap W~ - 4 pi N / |Omega|] Y_a + int eta Lap Y_a

with u = 1 + u0 + W~ + eta; the Laplacian of eta is moved onto the kernel.
For fixed x, R0 is driven to zero in mu by bracketing and brentq; x is then
moved by Newton steps on R_ij with a finite-difference Jacobian.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from apps.ansatz.bubbles import make_bubble_params
from apps.ansatz.profile import QUADRATURE_GRID, bubble_quadrature, build_ansatz, quadrature_domain
from apps.core.conf import settings_value
from apps.core.exceptions import (
    AnsatzInfeasibleError,
    InvalidConfigurationError,
    LimitUnstableError,
    OutOfBranchError,
    ReducedSystemInfeasibleError,
    SearchFailureError,
)
from apps.functionals.dq import d_of_q
from apps.functionals.reduced import grad_g_star, hessian_g_star
from apps.higgs.branch import RelativisticModel, get_model
from apps.torus.spectral import FieldSampler, make_domain

from .inner import inner_correction
from .kernels import kernel_count, kernel_label, kernel_values

logger = logging.getLogger(__name__)

SCAN_POINTS = 24
MAX_OUTER = 8
JACOBIAN_STEP = 1e-5
# mu sqrt(d) lower bound: the bubble core must sit well inside its cutoff disk
CUTOFF_MARGIN = 1.6


# ============================================
# PROJECTED RESIDUALS
# ============================================

@dataclass(frozen=True, eq=False)
class ProjectedResiduals:
    """R_a for every kernel with the scale ||Y_a|| ||R|| used to normalize it"""
    values: np.ndarray
    scales: np.ndarray

    @property
    def R0(self):
        return float(self.values[0])

    @property
    def Rij(self):
        return self.values[1:].reshape(-1, 2)

    @property
    def normalized(self):
        return np.abs(self.values) / np.where(self.scales > 0, self.scales, 1.0)

    @property
    def max_normalized(self):
        return float(np.max(self.normalized))

    @property
    def labels(self):
        return [kernel_label(a).replace('Y', 'R') for a in range(len(self.values))]

    def with_r0(self, value):
        values = self.values.copy()
        values[0] = value
        return replace(self, values=values)


def _project(ansatz, integrand, quad, eta, eta_laplacian=True):
    """int integrand(points, eta) Y_a (+ eta Lap Y_a), and the L^2 norms involved"""
    params = ansatz.params
    sampler = FieldSampler(eta) if eta is not None else None
    count = kernel_count(params)
    values = np.zeros(count)
    y_squared = np.zeros(count)
    r_squared = 0.0
    for points, weights in quad.point_sets():
        eta_here = sampler(points) if sampler is not None else np.zeros(len(points))
        residual = integrand(points, eta_here)
        r_squared += float(np.sum(weights * residual ** 2))
        for a in range(count):
            Y, lap = kernel_values(params, a, points)
            integrand_a = residual * Y
            if eta_laplacian:
                integrand_a = integrand_a + eta_here * lap
            values[a] += float(np.sum(weights * integrand_a))
            y_squared[a] += float(np.sum(weights * Y ** 2))
    return values, np.sqrt(y_squared * r_squared)


def _default_quadrature(ansatz):
    params = ansatz.params
    return bubble_quadrature(params, quadrature_domain(params, max(ansatz.domain.n, QUADRATURE_GRID)))


def projected_residuals(ansatz, eta=None, model=None, quad=None):
    """R0 and R_ij of u = 1 + u0 + W~ + eta"""
    model = get_model(model)
    params = ansatz.params
    quad = quad or _default_quadrature(ansatz)
    source = 4 * np.pi * ansatz.vortices.N / ansatz.domain.area

    def integrand(points, eta_here):
        u = ansatz.u_at(points) + eta_here
        return model(u, params.eps) + ansatz.laplacian_at(points) - source

    values, scales = _project(ansatz, integrand, quad, eta)
    return ProjectedResiduals(values=values, scales=scales)


def model_difference(ansatz, eta=None, quad=None):
    """int (N_relativistic(u) - N(u)) Y_a, the effect of the cubic correction on each projection"""
    params = ansatz.params
    quad = quad or _default_quadrature(ansatz)
    generalized = get_model()
    relativistic = RelativisticModel()

    def integrand(points, eta_here):
        u = ansatz.u_at(points) + eta_here
        return relativistic(u, params.eps) - generalized(u, params.eps)

    values, _ = _project(ansatz, integrand, quad, eta, eta_laplacian=False)
    return values


# ============================================
# THE REDUCED PROBLEM
# ============================================

def mu_window(eps, d, beta0, beta1):
    """(max(beta0 / sqrt(eps), CUTOFF_MARGIN / sqrt(d)), beta1 / sqrt(eps))"""
    root = np.sqrt(eps)
    return max(beta0 / root, CUTOFF_MARGIN / np.sqrt(d)), beta1 / root


class ReducedProblem:
    """R(x, mu) at fixed eps and d, with the ansatz rebuilt for every evaluation"""

    def __init__(self, g, cfg, eps, d, model=None, n=QUADRATURE_GRID, flip_d_term=False,
                 with_inner=False, inner_n=64):
        self.g = g
        self.cfg = cfg
        self.eps = float(eps)
        self.d = float(d)
        self.model = get_model(model)
        self.n = n
        self.flip_d_term = flip_d_term
        self.with_inner = with_inner
        self.inner_n = inner_n
        self._d_values = {}

    def params_at(self, x, mu):
        return make_bubble_params(self.g, self.cfg, x, mu, d=self.d, eps=self.eps)

    def d_value(self, x):
        """D at the centers x, cached per configuration"""
        key = tuple(np.round(np.asarray(x, dtype=float).ravel(), 12))
        if key not in self._d_values:
            self._d_values[key] = d_of_q(self.g, self.cfg, x).value
        return self._d_values[key]

    def d_term(self, x, params):
        """8 D / (rho_1 mu^3), the leading part of R0"""
        return 8.0 * self.d_value(x) / (params.rho[0] * params.mu ** 3)

    def residuals(self, x, mu):
        params = self.params_at(x, mu)
        quad = bubble_quadrature(params, quadrature_domain(params, self.n))
        ansatz = build_ansatz(params, self.g, self.cfg, quad.domain, quad=quad)
        eta = None
        if self.with_inner:
            grid = make_domain(params.periods[0], params.periods[1], self.inner_n)
            grid_ansatz = build_ansatz(params, self.g, self.cfg, grid)
            eta = inner_correction(grid_ansatz, model=self.model, measure=False).eta
        result = projected_residuals(ansatz, eta=eta, model=self.model, quad=quad)
        if self.flip_d_term:
            result = result.with_r0(result.R0 - 2.0 * self.d_term(x, params))
        return result

    def r0(self, mu, x):
        return self.residuals(x, mu).R0

    def scan(self, x, window, count=SCAN_POINTS):
        """(mu, R0) on a geometric grid of the window, skipping infeasible mu"""
        table = []
        for mu in np.geomspace(window[0], window[1], count):
            try:
                table.append((float(mu), self.r0(mu, x)))
            except (AnsatzInfeasibleError, OutOfBranchError, InvalidConfigurationError) as exc:
                logger.debug('mu=%.6g skipped: %s', mu, exc)
        return table

    def crossing_direction(self, x):
        """Sign of R0(mu_2) - R0(mu_1) across the admissible root: that of D, reversed by flip_d_term"""
        try:
            value = self.d_value(x)
        except LimitUnstableError as exc:
            logger.warning('D unavailable, accepting any sign change of R0: %s', exc)
            return 0.0
        sign = float(np.sign(value))
        return -sign if self.flip_d_term else sign

    def solve_mu(self, x, window, count=SCAN_POINTS):
        """
        Root of R0(., x) in the window, or None, with the scan table.

        Only sign changes in the direction of crossing_direction count, and
        the one at the largest mu wins.
        """
        table = self.scan(x, window, count)
        direction = self.crossing_direction(x)
        brackets = []
        for (m1, r1), (m2, r2) in zip(table, table[1:]):
            change = np.sign(r2) - np.sign(r1)
            if change != 0 and (direction == 0 or np.sign(change) == direction):
                brackets.append((m1, r1, m2, r2))
        if not brackets:
            return None, table
        m1, r1, m2, r2 = brackets[-1]
        if r1 == 0.0:
            return m1, table
        if r2 == 0.0:
            return m2, table
        mu = brentq(self.r0, m1, m2, args=(x,), xtol=1e-14, rtol=1e-13)
        return float(mu), table


def residual_jacobian(problem, x, mu, step=JACOBIAN_STEP):
    """d R_ij / d x by central differences at fixed mu"""
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    columns = []
    for m in range(len(flat)):
        e = np.zeros_like(flat)
        e[m] = step
        plus = problem.residuals((flat + e).reshape(x.shape), mu).Rij.ravel()
        minus = problem.residuals((flat - e).reshape(x.shape), mu).Rij.ravel()
        columns.append((plus - minus) / (2 * step))
    return np.column_stack(columns)


def fit_a0(jacobian, hessian):
    """Least-squares A0 in J = A0 Hess G*, with the relative misfit"""
    a0 = float(np.sum(jacobian * hessian) / np.sum(hessian * hessian))
    misfit = float(np.linalg.norm(jacobian - a0 * hessian) / np.linalg.norm(jacobian))
    return a0, misfit


def fit_b0(table, eps, d_term, sign=1.0):
    """Least-squares B0 in R0 - D-term = B0 eps^2 mu over a scan table"""
    if len(table) == 0:
        return None
    mu = np.array([m for m, _ in table])
    r0 = np.array([r for _, r in table])
    remainder = r0 - sign * np.array([d_term(m) for m in mu])
    basis = eps ** 2 * mu
    return float(np.sum(remainder * basis) / np.sum(basis * basis))


@dataclass(eq=False)
class ReducedSolution:
    x: np.ndarray
    mu: float
    eps: float
    params: object
    residuals: ProjectedResiduals
    dg_star: float
    window: tuple
    widened: bool = False
    trace: list = field(default_factory=list)
    table: list = field(default_factory=list)
    a0: float = None
    a0_misfit: float = None
    b0: float = None
    d_value: float = None

    @property
    def mu_sqrt_eps(self):
        return self.mu * np.sqrt(self.eps)

    def summary(self):
        out = {
            'eps': self.eps,
            'mu': self.mu,
            'mu_sqrt_eps': self.mu_sqrt_eps,
            'x': self.x.ravel().tolist(),
            'R0': self.residuals.R0,
            'max_normalized_residual': self.residuals.max_normalized,
            'dg_star': self.dg_star,
            'window': list(self.window),
            'widened': self.widened,
        }
        for label, value in zip(self.residuals.labels[1:], self.residuals.Rij.ravel()):
            out[label] = float(value)
        out.update(A0=self.a0, B0=self.b0, D=self.d_value)
        return out


def solve_reduced(params0, eps, g, cfg, beta0=None, beta1=None, tol=None, flip_d_term=False,
                  with_inner=False, model=None, n=QUADRATURE_GRID, scan_points=SCAN_POINTS,
                  max_outer=MAX_OUTER, fit_constants=False):
    """
    (x(eps), mu(eps)) with every projected residual below tol (normalized).

    The window is widened once to (beta0 / 2, 2 beta1) before giving up with
    ReducedSystemInfeasibleError. flip_d_term reverses the sign of the D(q)
    term in R0.
    """
    beta0 = settings_value('BETA0') if beta0 is None else beta0
    beta1 = settings_value('BETA1') if beta1 is None else beta1
    tol = settings_value('TOL_REDUCED') if tol is None else tol
    problem = ReducedProblem(g, cfg, eps, params0.d, model=model, n=n, flip_d_term=flip_d_term,
                             with_inner=with_inner)
    x = params0.centers_array.copy()
    window = mu_window(eps, params0.d, beta0, beta1)
    widened = False
    trace = []
    jacobian = None
    for outer in range(max_outer):
        mu, table = problem.solve_mu(x, window, scan_points)
        if mu is None and not widened:
            widened = True
            window = mu_window(eps, params0.d, 0.5 * beta0, 2.0 * beta1)
            logger.warning('No root of R0 in the mu window; widening to (%.4g, %.4g)', *window)
            mu, table = problem.solve_mu(x, window, scan_points)
        if mu is None:
            raise ReducedSystemInfeasibleError(
                f'R0 has no sign change for mu in ({window[0]:.4g}, {window[1]:.4g}) at eps = {eps}',
                table=table, window=window,
            )
        residuals = problem.residuals(x, mu)
        trace.append({
            'iteration': outer,
            'mu': mu,
            'x': x.ravel().tolist(),
            'max_normalized': residuals.max_normalized,
        })
        logger.info('Reduced system: iteration %d, mu=%.8g, max normalized residual %.3e',
                    outer, mu, residuals.max_normalized)
        if residuals.max_normalized <= tol:
            break
        if jacobian is None:
            jacobian = residual_jacobian(problem, x, mu)
        step = np.linalg.lstsq(jacobian, -residuals.Rij.ravel(), rcond=None)[0]
        x = np.mod(x + step.reshape(x.shape), g.periods)
    else:
        raise SearchFailureError(
            f'Reduced system did not reach tolerance {tol} in {max_outer} outer iterations', trace=trace)

    solution = ReducedSolution(
        x=x,
        mu=mu,
        eps=float(eps),
        params=problem.params_at(x, mu),
        residuals=residuals,
        dg_star=float(np.linalg.norm(grad_g_star(g, cfg, x))),
        window=tuple(window),
        widened=widened,
        trace=trace,
        table=table,
    )
    if fit_constants:
        _fit_constants(problem, solution)
    return solution


def _fit_constants(problem, solution):
    solution.a0, solution.a0_misfit = fit_a0(
        residual_jacobian(problem, solution.x, solution.mu),
        hessian_g_star(problem.g, problem.cfg, solution.x),
    )
    try:
        solution.d_value = problem.d_value(solution.x)
    except LimitUnstableError as exc:
        logger.warning('B0 not fitted: %s', exc)
        return
    rho1 = solution.params.rho[0]
    sign = -1.0 if problem.flip_d_term else 1.0
    solution.b0 = fit_b0(solution.table, solution.eps,
                         lambda mu: 8.0 * solution.d_value / (rho1 * mu ** 3), sign=sign)


# ============================================
# SWEEPS
# ============================================

def reduce_sweep(eps_values, params0, g, cfg, **kwargs):
    """solve_reduced along decreasing eps, warm-starting the centers"""
    solutions = []
    params = params0
    for eps in sorted(eps_values, reverse=True):
        solution = solve_reduced(params, eps, g, cfg, fit_constants=True, **kwargs)
        solutions.append(solution)
        params = solution.params
    return solutions


def sweep_rows(solutions):
    """CSV header and rows (eps, mu, R0, R_ij..., |DG*|, A0, B0)"""
    k = solutions[0].params.k if solutions else 0
    header = ['eps', 'mu', 'R0'] + [kernel_label(a).replace('Y', 'R') for a in range(1, 2 * k + 1)]
    header += ['dg_star', 'A0', 'B0']
    rows = []
    for s in solutions:
        rows.append([s.eps, s.mu, s.residuals.R0, *s.residuals.Rij.ravel().tolist(), s.dg_star, s.a0, s.b0])
    return header, rows


def mu_scaling_slope(solutions):
    """Slope of ln mu against ln eps"""
    eps = np.log([s.eps for s in solutions])
    mu = np.log([s.mu for s in solutions])
    return float(np.polyfit(eps, mu, 1)[0])
