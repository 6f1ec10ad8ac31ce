"""
eps-continuation of either branch and the topological / non-topological
classification of a family of solutions.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from apps.ansatz.profile import build_ansatz
from apps.core.exceptions import InvalidArgumentError, NonConvergenceError, OutOfBranchError
from apps.green.ewald import u0_field
from apps.reduction.system import solve_reduced
from apps.torus.spectral import Field, prolong

from .monotone import maximal_family
from .newton import newton_solve

logger = logging.getLogger(__name__)

TOPOLOGICAL = 'topological'
NON_TOPOLOGICAL = 'non-topological'
UNDETERMINED = 'undetermined'
BRANCHES = ('bubbling', 'maximal')
MIN_POINTS = 3
# relative change below which a sequence counts as flat
TREND_TOL = 1e-6


@dataclass(eq=False)
class ContinuationRun:
    eps_schedule: list
    branch: str
    solutions: list = field(default_factory=list)
    reduced: list = field(default_factory=list)
    reuse: str = 'previous correction on the re-centred ansatz'
    label: str = UNDETERMINED

    @property
    def reports(self):
        return [s.report for s in self.solutions]


def _check_schedule(eps_schedule):
    eps = [float(e) for e in eps_schedule]
    if not eps:
        raise InvalidArgumentError('The eps schedule is empty')
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise InvalidArgumentError(f'The eps schedule must be positive and strictly decreasing, got {eps}')
    return eps


def _seed(ansatz, correction=None):
    """phi = 1 + W~ (+ previous correction)"""
    values = 1.0 + ansatz.W_tilde.values
    if correction is not None:
        values = values + correction
    return Field(ansatz.domain, values, name='phi0')


def bubbling_solve(params, eps, g, cfg, domain, previous=None, model=None, tol=None, reduced_tol=None,
                   **reduced_kwargs):
    """
    solve_reduced for (x, mu) at eps, then Newton from the ansatz there.

    previous, a Solution at the last eps, contributes its correction
    phi - 1 - W~ to the seed; a failed warm start falls back to the bare ansatz.
    """
    reduced = solve_reduced(params, eps, g, cfg, model=model, tol=reduced_tol, **reduced_kwargs)
    ansatz = build_ansatz(reduced.params, g, cfg, domain)
    u0 = u0_field(g, cfg, domain)
    solution = None
    if previous is not None:
        correction = previous.phi.values - 1.0 - previous.ansatz.W_tilde.values
        try:
            solution = newton_solve(_seed(ansatz, correction), eps, g, cfg, model=model, tol=tol, u0=u0)
        except (NonConvergenceError, OutOfBranchError) as exc:
            logger.warning('Warm start at eps=%s failed (%s); restarting from the ansatz', eps, exc)
    if solution is None:
        solution = newton_solve(_seed(ansatz), eps, g, cfg, model=model, tol=tol, u0=u0)
    solution.ansatz = ansatz
    solution.report.concentration = concentration(solution, reduced.x, 0.1)[0].tolist()
    return solution, reduced


def continuation(eps_schedule, g, cfg, domain, branch='bubbling', params0=None, model=None, tol=None,
                 **reduced_kwargs):
    """ContinuationRun along a strictly decreasing eps schedule"""
    if branch not in BRANCHES:
        raise InvalidArgumentError(f'Unknown branch {branch!r}; choose from {list(BRANCHES)}')
    eps_schedule = _check_schedule(eps_schedule)
    run = ContinuationRun(eps_schedule=eps_schedule, branch=branch)
    if branch == 'maximal':
        run.reuse = 'independent solves from u = 0'
        run.solutions = maximal_family(eps_schedule, g, cfg, domain, model=model, tol=tol)
        return run
    if params0 is None:
        raise InvalidArgumentError('The bubbling branch needs seed bubble parameters')
    params, previous = params0, None
    for eps in eps_schedule:
        solution, reduced = bubbling_solve(params, eps, g, cfg, domain, previous, model=model, tol=tol,
                                           **reduced_kwargs)
        logger.info('Continuation: eps=%s, mu=%.6g, sup v=%.6g', eps, reduced.mu, solution.report.sup_v)
        run.solutions.append(solution)
        run.reduced.append(reduced)
        params, previous = reduced.params, solution
    return run


def seeded_continuation(phi0, eps_schedule, g, cfg, branch='bubbling', model=None, tol=None):
    """Natural continuation from a stored phi: each Newton solve starts from the previous one"""
    eps_schedule = _check_schedule(eps_schedule)
    run = ContinuationRun(eps_schedule=eps_schedule, branch=branch, reuse='stored field, then previous solution')
    u0 = u0_field(g, cfg, phi0.domain)
    phi = phi0
    for eps in eps_schedule:
        solution = newton_solve(phi, eps, g, cfg, model=model, tol=tol, u0=u0)
        logger.info('Seeded continuation: eps=%s, sup v=%.6g', eps, solution.report.sup_v)
        run.solutions.append(solution)
        phi = solution.phi
    return run


def _trend(values):
    """+1 increasing, -1 decreasing, 0 flat or mixed"""
    values = np.asarray(values, dtype=float)
    steps = np.diff(values)
    scale = TREND_TOL * max(1.0, float(np.max(np.abs(values))))
    if np.all(steps > scale):
        return 1
    if np.all(steps < -scale):
        return -1
    return 0


def family_trends(reports):
    """Trend (+1, -1 or 0) of each classification quantity along the family"""
    sup_v = [r.sup_v for r in reports]
    return {
        'sup_v': _trend(sup_v),
        'abs_sup_v': _trend(np.abs(sup_v)),
        'L2_of_v': _trend([r.L2_of_v for r in reports]),
        'exp_mean_u': _trend([r.exp_mean_u for r in reports]),
    }


def classify(run):
    """
    Label a family by the trends of its reports along decreasing eps.

    topological: |sup v| and ||v||_2 decrease and e^{d_eps} increases toward 1;
    non-topological: sup v and e^{d_eps} both decrease; undetermined otherwise.
    The thresholds are heuristics reported with the data.
    """
    reports = run.reports if isinstance(run, ContinuationRun) else list(run)
    label = UNDETERMINED
    if len(reports) >= MIN_POINTS:
        trends = family_trends(reports)
        if (trends['abs_sup_v'] < 0 and trends['L2_of_v'] < 0 and trends['exp_mean_u'] > 0
                and reports[-1].exp_mean_u > 0.5):
            label = TOPOLOGICAL
        elif trends['sup_v'] < 0 and trends['exp_mean_u'] < 0:
            label = NON_TOPOLOGICAL
    for r in reports:
        r.branch_label = label
    if isinstance(run, ContinuationRun):
        run.label = label
    logger.info('Classified %d solutions as %s', len(reports), label)
    return label


def concentration(solution, q, delta):
    """Fractions of int e^v inside each B_delta(q_i), and their sum"""
    domain = solution.domain
    weight = np.exp(solution.v.values)
    total = float(np.sum(weight))
    centers = np.asarray(q, dtype=float).reshape(-1, 2)
    fractions = np.array([
        float(np.sum(weight[domain.distance(domain.nodes, c) < delta])) / total for c in centers
    ])
    return fractions, float(np.sum(fractions))


def sup_u_slope(run):
    """Slope of sup u against ln mu(eps) along a bubbling run"""
    if len(run.reduced) < 2:
        return None
    mu = np.log([r.mu for r in run.reduced])
    sup_u = [s.report.sup_u for s in run.solutions]
    return float(np.polyfit(mu, sup_u, 1)[0])


def resolution_check(solution, g, cfg, n_new=None, tol=None):
    """Re-solve on a finer grid from the prolonged solution; returns (|change of sup v|, fine solution)"""
    n_new = n_new or 2 * solution.domain.n
    phi = prolong(solution.phi, n_new)
    fine = newton_solve(phi, solution.eps, g, cfg, model=solution.model, tol=tol)
    change = abs(fine.report.sup_v - solution.report.sup_v)
    logger.info('Resolution check %d -> %d: sup v changes by %.3e', solution.domain.n, n_new, change)
    return change, fine
