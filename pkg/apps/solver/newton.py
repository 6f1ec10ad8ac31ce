"""
Full solves of Lap u + N_eps(u) = 4 pi sum_j delta_{p_j} on the torus.

The unknown is the smooth part phi of u = u0 + phi; the delta sources sit
in u0 analytically, so the grid equation is

    R(phi) = Lap phi + N_eps(u0 + phi) - 4 pi N / |Omega| = 0.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from apps.core.conf import settings_value
from apps.core.exceptions import NonConvergenceError, OutOfBranchError
from apps.green.ewald import u0_eval, u0_field
from apps.higgs.branch import get_model
from apps.torus.krylov import gmres_solve, preconditioner_shift, shifted_preconditioner
from apps.torus.spectral import Field, FieldSampler, apply_laplacian, gradient_arrays

logger = logging.getLogger(__name__)

MIN_STEP = 1.0 / 1024
# trial iterates are clipped this far below the branch limit during line search
CLIP_MARGIN = 1e-14
# largest v a converged solution may report
SIGN_TOL = 1e-10
GRADIENT_EXPONENT = 1.5


def flux_source(cfg, domain):
    """4 pi N / |Omega|"""
    return 4 * np.pi * cfg.N / domain.area


def _forcing_values(forcing):
    return 0.0 if forcing is None else forcing.values


def residual(phi, u0, eps, cfg, model=None, forcing=None):
    """R(phi) as a Field; forcing is subtracted as a manufactured source"""
    model = get_model(model)
    domain = phi.domain
    u = u0.values + phi.values
    values = (apply_laplacian(domain, phi.values) + model(u, eps)
              - flux_source(cfg, domain) - _forcing_values(forcing))
    return Field(domain, values, name='R')


def jacobian_apply(phi, direction, u0, eps, model=None):
    """(Lap + N'_eps(u0 + phi)) direction"""
    model = get_model(model)
    derivative = model.derivative(u0.values + phi.values, eps)
    values = apply_laplacian(direction.domain, direction.values) + derivative * direction.values
    return Field(direction.domain, values, name='J')


@dataclass(eq=False)
class SolveReport:
    converged: bool
    eps: float
    model: str
    newton_trace: list = field(default_factory=list)
    iterations: int = 0
    residual: float = None
    flux_defect: float = None
    sup_v: float = None
    sup_u: float = None
    mean_u: float = None
    L2_of_v: float = None
    grad_w: float = None
    concentration: list = field(default_factory=list)
    branch_label: str = 'undetermined'
    clipped: bool = False

    @property
    def exp_mean_u(self):
        """e^{d_eps}"""
        return None if self.mean_u is None else float(np.exp(self.mean_u))

    def summary(self):
        """Flat key=value pairs in a fixed order"""
        return {
            'eps': self.eps,
            'model': self.model,
            'converged': self.converged,
            'iterations': self.iterations,
            'residual': self.residual,
            'flux_defect': self.flux_defect,
            'sup_v': self.sup_v,
            'sup_u': self.sup_u,
            'mean_u': self.mean_u,
            'exp_mean_u': self.exp_mean_u,
            'L2_of_v': self.L2_of_v,
            'grad_w': self.grad_w,
            'concentration': ' '.join(f'{c:.12g}' for c in self.concentration),
            'branch_label': self.branch_label,
        }


@dataclass(eq=False)
class Solution:
    """A converged u = u0 + phi with its report"""
    phi: Field
    u0: Field
    eps: float
    model: object
    report: SolveReport
    ansatz: object = None

    @property
    def domain(self):
        return self.phi.domain

    @property
    def u(self):
        return Field(self.domain, self.u0.values + self.phi.values, name='u')

    @property
    def v(self):
        return Field(self.domain, self.model.v_of_u(self.u.values), name='v')

    @property
    def w(self):
        """u - u0 - d_eps, mean zero"""
        return Field(self.domain, self.phi.values - self.phi.mean(), declared_mean=0.0, name='w')


def measure(solution, cfg):
    """Fill the diagnostic fields of solution.report"""
    report = solution.report
    domain = solution.domain
    v = solution.v.values
    r = residual(solution.phi, solution.u0, solution.eps, cfg, solution.model)
    source = flux_source(cfg, domain)
    report.residual = float(np.max(np.abs(r.values))) / source
    # the spectral Laplacian has zero mean, so mean(R) is the flux defect
    report.flux_defect = abs(r.mean()) / source
    report.sup_v = float(np.max(v))
    report.sup_u = float(np.max(solution.u.values))
    # u0 has mean zero
    report.mean_u = solution.phi.mean()
    report.L2_of_v = float(np.sqrt(domain.cell_area * np.sum(v ** 2)))
    report.grad_w = gradient_norm(solution.w, GRADIENT_EXPONENT)
    return report


def gradient_norm(f, q=GRADIENT_EXPONENT):
    """||grad f||_{L^q}"""
    d1, d2 = gradient_arrays(f.domain, f.values)
    magnitude = np.hypot(d1, d2)
    return float((f.domain.cell_area * np.sum(magnitude ** q)) ** (1.0 / q))


def _clip(u0, phi_values, model):
    """phi with u0 + phi kept below the branch limit, and whether clipping was needed"""
    limit = model.max_u - CLIP_MARGIN
    u = u0.values + phi_values
    if np.all(u <= limit):
        return phi_values, False
    return np.minimum(u, limit) - u0.values, True


def check_branch(report):
    """OutOfBranchError unless v <= SIGN_TOL everywhere without clipping on the final step"""
    if report.clipped:
        raise OutOfBranchError('The converged iterate needed clipping on its final step')
    if report.sup_v is not None and report.sup_v > SIGN_TOL:
        raise OutOfBranchError(f'Converged solution has sup v = {report.sup_v:.3e} > {SIGN_TOL:g}',
                               worst_value=report.sup_v)
    return report


def newton_solve(phi0, eps, g, cfg, model=None, tol=None, max_iter=None, u0=None, forcing=None):
    """
    Damped Newton-GMRES from phi0.

    Returns a Solution whose report carries the residual trace. Raises
    NonConvergenceError when the line search or the iteration budget runs
    out and LinearSolveFailureError when GMRES stagnates.
    """
    model = get_model(model)
    tol = settings_value('NEWTON_TOL') if tol is None else tol
    max_iter = settings_value('NEWTON_MAX_ITER') if max_iter is None else max_iter
    domain = phi0.domain
    u0 = u0 if u0 is not None else u0_field(g, cfg, domain)
    source = flux_source(cfg, domain)

    def evaluate(values):
        r = residual(Field(domain, values), u0, eps, cfg, model, forcing).values
        return r, float(np.max(np.abs(r))) / source

    phi = phi0.values.copy()
    r, err = evaluate(phi)
    trace = [{'iteration': 0, 'residual': err, 'step': 0.0, 'clipped': False}]
    iterations = 0
    clipped = False
    # an iterate that needed clipping is not accepted as converged
    while err > tol or clipped:
        if iterations >= max_iter:
            state = ', last step clipped' if clipped else ''
            raise NonConvergenceError(
                f'Newton did not converge in {max_iter} iterations (residual {err:.3e}{state})', trace=trace)
        derivative = model.derivative(u0.values + phi, eps)

        def matvec(x, derivative=derivative):
            x = np.asarray(x, dtype=float).reshape(domain.n, domain.n)
            return (apply_laplacian(domain, x) + derivative * x).ravel()

        delta, stats = gmres_solve(
            matvec, -r.ravel(),
            preconditioner=shifted_preconditioner(domain, preconditioner_shift(derivative)),
            rtol=max(settings_value('KRYLOV_TOL'), min(1e-2, 0.1 * err)),
        )
        delta = delta.reshape(domain.n, domain.n)
        t = 1.0
        while t >= MIN_STEP:
            trial, clipped = _clip(u0, phi + t * delta, model)
            try:
                r_new, err_new = evaluate(trial)
            except OutOfBranchError:
                t *= 0.5
                continue
            if err_new < (1.0 - 1e-4 * t) * err:
                break
            t *= 0.5
        else:
            raise NonConvergenceError(f'Newton line search exhausted at residual {err:.3e}', trace=trace)
        phi, r, err = trial, r_new, err_new
        iterations += 1
        trace.append({'iteration': iterations, 'residual': err, 'step': t, 'clipped': clipped,
                      'krylov': stats.iterations})
        logger.info('Newton: iteration %d, residual %.3e, step %.3g', iterations, err, t)

    solution = Solution(
        phi=Field(domain, phi, name='phi'),
        u0=u0,
        eps=float(eps),
        model=model,
        report=SolveReport(converged=True, eps=float(eps), model=model.name, newton_trace=trace,
                           iterations=iterations, clipped=clipped),
    )
    if forcing is None:
        measure(solution, cfg)
        check_branch(solution.report)
    return solution


def quasilinear_residual(solution, g, cfg, points, h=1e-3):
    """
    div((1 - e^v) grad v) + eps^-2 e^v (1 - e^v)^2 - 4 pi N / |Omega| at points
    away from the vortex points, relative to 4 pi N / |Omega|.

    v is read off u = u0 + phi through the Higgs map and differenced in
    conservative form, which checks the substitution independently of the
    semilinear residual. Meaningful for the generalized model only.
    """
    sampler = FieldSampler(solution.phi)
    model = solution.model
    points = np.asarray(points, dtype=float)

    def v_at(y):
        return model.v_of_u(u0_eval(g, cfg, y) + sampler(y))

    v = v_at(points)
    total = np.zeros(len(points))
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        plus, minus = v_at(points + e), v_at(points - e)
        total += (-np.expm1(0.5 * (plus + v)) * (plus - v) + np.expm1(0.5 * (v + minus)) * (v - minus)) / (h * h)
    nonlinear = np.exp(v) * np.expm1(v) ** 2 / solution.eps ** 2
    source = flux_source(cfg, solution.domain)
    return (total + nonlinear - source) / source
