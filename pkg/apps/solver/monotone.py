"""
The maximal (topological) solution by monotone iteration from u = 0.

u = 0 is a supersolution, so the iterates

    (Lap - K) phi_{n+1} = -K phi_n - N_eps(u0 + phi_n) + 4 pi N / |Omega|

decrease pointwise as long as K >= sup |N'_eps| along the way. A Newton
polish finishes the solve once the iterates have settled.
"""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from apps.core.conf import settings_value, thread_count
from apps.core.exceptions import NoSolutionDetectedError, OutOfBranchError
from apps.green.ewald import u0_field
from apps.higgs.branch import get_model
from apps.torus.spectral import Field, shifted_poisson_solve

from .newton import flux_source, newton_solve

logger = logging.getLogger(__name__)

MONOTONE_TOL = 1e-6
MONOTONE_MAX_ITER = 4000
K_FACTOR = 1.1
# iterates below this everywhere have lost the vortex equation: e^v underflows
DIVERGENCE_LEVEL = -50.0


def monotone_iterates(u0, eps, cfg, model=None, tol=MONOTONE_TOL, max_iter=MONOTONE_MAX_ITER):
    """
    Run the monotone iteration from phi = -u0 and return (phi, trace).

    The trace records the sup of each update and the monotonicity defect
    max(u_{n+1} - u_n), which must stay at roundoff level.
    """
    model = get_model(model)
    domain = u0.domain
    source = flux_source(cfg, domain)
    phi = -u0.values
    trace = []
    for n in range(1, max_iter + 1):
        u = u0.values + phi
        value, derivative = model.both(u, eps)
        K = max(K_FACTOR * float(np.max(np.abs(derivative))), 1.0)
        new = shifted_poisson_solve(domain, -K * phi - value + source, K)
        update = new - phi
        change = float(np.max(np.abs(update)))
        increase = float(np.max(update))
        trace.append({'iteration': n, 'change': change, 'increase': increase, 'K': K})
        if increase > 1e-9 * max(1.0, float(np.max(np.abs(phi)))):
            logger.warning('Monotone iteration %d increased u by %.3e', n, increase)
        phi = new
        if float(np.max(u0.values + phi)) < DIVERGENCE_LEVEL:
            raise NoSolutionDetectedError(
                f'Monotone iterates diverge to -infinity at eps = {eps}; eps is likely above the critical value',
                trace=trace,
            )
        if n % 100 == 0:
            logger.info('Monotone iteration %d, change %.3e', n, change)
        if change <= tol:
            logger.info('Monotone iteration settled after %d steps', n)
            return phi, trace
    raise NoSolutionDetectedError(
        f'Monotone iteration did not settle in {max_iter} steps at eps = {eps}', trace=trace)


def maximal_solution(eps, g, cfg, domain, model=None, tol=None, monotone_tol=MONOTONE_TOL,
                     max_iter=MONOTONE_MAX_ITER):
    """Monotone iteration followed by a Newton polish"""
    model = get_model(model)
    u0 = u0_field(g, cfg, domain)
    try:
        phi, trace = monotone_iterates(u0, eps, cfg, model, tol=monotone_tol, max_iter=max_iter)
    except OutOfBranchError as exc:
        raise NoSolutionDetectedError(f'Monotone iterate left the branch: {exc}', trace=[]) from exc
    solution = newton_solve(Field(domain, phi, name='phi'), eps, g, cfg, model=model, tol=tol, u0=u0)
    solution.report.branch_label = 'topological'
    solution.report.newton_trace = [dict(entry, stage='monotone') for entry in trace[-5:]] \
        + solution.report.newton_trace
    return solution


def maximal_family(eps_values, g, cfg, domain, model=None, tol=None, workers=None):
    """maximal_solution at every eps, run concurrently up to CSVL_THREADS jobs"""
    workers = workers or thread_count()
    eps_values = list(eps_values)
    tol = settings_value('NEWTON_TOL') if tol is None else tol

    def job(eps):
        return maximal_solution(eps, g, cfg, domain, model=model, tol=tol)

    if workers == 1:
        return [job(eps) for eps in eps_values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, eps_values))


def pointwise_gap(upper, lower):
    """min over the grid of upper.v - lower.v"""
    return float(np.min(upper.v.values - lower.v.values))
