"""
Inner correction of the reduction.

Finds eta on the ansatz grid with int Z_a eta = 0 for every kernel and

    Lap eta + N(1 + u0 + W~ + eta) + Lap W~ - 4 pi N / |Omega| = c0 Z0 + sum c_ij Z_ij

by damped Newton on the system bordered with the 2k + 1 multipliers,
each linear step solved by GMRES.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from apps.core.conf import settings_value
from apps.core.exceptions import NonConvergenceError, OutOfBranchError
from apps.higgs.branch import get_model
from apps.torus.krylov import gmres_solve, preconditioner_shift, shifted_preconditioner
from apps.torus.spectral import Field, apply_laplacian

from .kernels import build_kernels, h_mu
from .norms import make_weighted_norms, weighted_norm_X, weighted_norm_Y
from .projection import project_Q

logger = logging.getLogger(__name__)

MIN_STEP = 1.0 / 64


@dataclass(eq=False)
class InnerCorrection:
    eta: Field
    coefficients: np.ndarray
    iterations: int
    trace: list = field(default_factory=list)
    eta_sup: float = 0.0
    eta_x: float = None
    h_y: float = None
    mu: float = None
    alpha: float = None

    @property
    def ratio(self):
        """(||eta||_inf + ||eta||_X) / (ln mu ||h||_Y) with h = Q L eta"""
        if self.eta_x is None or not self.h_y:
            return None
        return (self.eta_sup + self.eta_x) / (np.log(self.mu) * self.h_y)

    @property
    def scaled_sup(self):
        """||eta||_inf mu^(2 - alpha/2) / ln mu, the constant of the a priori bound"""
        if self.alpha is None:
            return None
        return self.eta_sup * self.mu ** (2.0 - 0.5 * self.alpha) / np.log(self.mu)


class _BorderedSystem:
    """Residual and Jacobian of the bordered inner problem in flat vectors"""

    def __init__(self, ansatz, kernels, model):
        domain = ansatz.domain
        self.domain = domain
        self.n = domain.n
        self.size = domain.n ** 2
        self.model = model
        self.eps = ansatz.params.eps
        self.base = (1.0 + ansatz.u0.values + ansatz.W_tilde.values).ravel()
        self.source = 4 * np.pi * ansatz.vortices.N / domain.area
        self.forcing = ansatz.laplacian().values.ravel() - self.source
        Z = np.stack([z.values.ravel() for z in kernels.Z])
        # unit-norm columns and rows keep the border on the grid's scale
        self.znorm = np.sqrt(domain.cell_area * np.sum(Z ** 2, axis=1))
        self.Z = Z / self.znorm[:, None]
        self.border = len(Z)
        self.scale = max(self.source, float(np.max(np.abs(self.forcing))))
        self.derivative = None

    def split(self, x):
        return x[:self.size], x[self.size:]

    def lap(self, eta):
        return apply_laplacian(self.domain, eta.reshape(self.n, self.n)).ravel()

    def residual(self, x):
        eta, gamma = self.split(x)
        u = self.base + eta
        if np.any(u > self.model.max_u):
            index = int(np.argmax(u))
            raise OutOfBranchError(f'Inner iterate leaves the branch at node {index}',
                                   worst_value=float(u[index]), worst_index=index)
        value, self.derivative = self.model.both(u, self.eps)
        first = self.lap(eta) + value + self.forcing - gamma @ self.Z
        second = self.domain.cell_area * (self.Z @ eta)
        return np.concatenate([first, second])

    def jacobian(self, x):
        derivative = self.derivative

        def matvec(v):
            d_eta, d_gamma = self.split(np.asarray(v, dtype=float).ravel())
            first = self.lap(d_eta) + derivative * d_eta - d_gamma @ self.Z
            return np.concatenate([first, self.domain.cell_area * (self.Z @ d_eta)])

        return matvec

    def error(self, r):
        return float(np.max(np.abs(r))) / self.scale


def inner_correction(ansatz, kernels=None, model=None, tol=None, max_iter=None, measure=True, norms=None):
    """
    Solve the projected problem for eta.

    measure=True adds the X norm of eta and the Y norm of h = Q L eta with
    L = Lap + h_mu, which enter the a priori bound.
    """
    model = get_model(model)
    tol = settings_value('NEWTON_TOL') if tol is None else tol
    max_iter = settings_value('NEWTON_MAX_ITER') if max_iter is None else max_iter
    kernels = kernels or build_kernels(ansatz.params, ansatz.domain)
    system = _BorderedSystem(ansatz, kernels, model)
    x = np.zeros(system.size + system.border)
    r = system.residual(x)
    err = system.error(r)
    trace = [{'iteration': 0, 'residual': err, 'step': 0.0}]
    iterations = 0
    while err > tol:
        if iterations >= max_iter:
            raise NonConvergenceError(
                f'Inner correction did not converge in {max_iter} iterations (residual {err:.3e})', trace=trace)
        shift = preconditioner_shift(system.derivative)
        delta, stats = gmres_solve(
            system.jacobian(x), -r,
            preconditioner=shifted_preconditioner(system.domain, shift, system.border),
            rtol=max(settings_value('KRYLOV_TOL'), min(1e-2, 0.1 * err)),
        )
        t = 1.0
        while t >= MIN_STEP:
            try:
                r_new = system.residual(x + t * delta)
            except OutOfBranchError:
                t *= 0.5
                continue
            err_new = system.error(r_new)
            if err_new < err:
                break
            t *= 0.5
        else:
            raise NonConvergenceError('Inner correction line search exhausted', trace=trace)
        x = x + t * delta
        r, err = r_new, err_new
        iterations += 1
        trace.append({'iteration': iterations, 'residual': err, 'step': t, 'krylov': stats.iterations})
        logger.info('Inner correction: iteration %d, residual %.3e, step %.3g', iterations, err, t)

    eta_values, gamma = system.split(x)
    eta = Field(system.domain, eta_values.reshape(system.n, system.n), name='eta')
    result = InnerCorrection(
        eta=eta,
        coefficients=gamma / system.znorm,
        iterations=iterations,
        trace=trace,
        eta_sup=eta.sup_norm(),
        mu=ansatz.params.mu,
    )
    if measure:
        norms = norms or make_weighted_norms()
        params = ansatz.params
        L_eta = Field(eta.domain, apply_laplacian(eta.domain, eta.values)
                      + h_mu(params, eta.domain.nodes) * eta.values, name='L eta')
        h = project_Q(L_eta, kernels).field
        result.eta_x = weighted_norm_X(eta, params, norms)
        result.h_y = weighted_norm_Y(h, params, norms)
        result.alpha = norms.alpha
        logger.info('Inner correction: |eta|_inf=%.3e, |eta|_X=%.3e, |h|_Y=%.3e',
                    result.eta_sup, result.eta_x, result.h_y)
    return result
