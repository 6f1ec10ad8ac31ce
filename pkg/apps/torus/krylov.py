"""
GMRES on grid unknowns, optionally bordered by a few scalar unknowns,
preconditioned by the shifted inverse Laplacian (Lap - sigma)^-1.
"""
import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from apps.core.conf import settings_value
from apps.core.exceptions import LinearSolveFailureError

from .spectral import shifted_poisson_solve

logger = logging.getLogger(__name__)

RESTART = 60
# a step that does not reduce the linear residual at least this much is useless to Newton
STAGNATION = 0.5


@dataclass(frozen=True)
class KrylovStats:
    iterations: int
    relative_residual: float
    info: int


def preconditioner_shift(derivative):
    """sigma = max(|median N'|, 1)"""
    return max(abs(float(np.median(derivative))), 1.0)


def shifted_preconditioner(domain, shift, border=0):
    """(Lap - shift)^-1 on the grid block, identity on the border"""
    n = domain.n
    size = n * n

    def apply(x):
        x = np.asarray(x, dtype=float).ravel()
        out = x.copy()
        out[:size] = shifted_poisson_solve(domain, x[:size].reshape(n, n), shift).ravel()
        return out

    return LinearOperator((size + border, size + border), matvec=apply, dtype=float)


def gmres_solve(matvec, rhs, preconditioner=None, rtol=None, restart=RESTART, max_iter=None):
    """Solve A x = rhs; raises LinearSolveFailureError on breakdown or stagnation"""
    rhs = np.asarray(rhs, dtype=float)
    size = len(rhs)
    rtol = settings_value('KRYLOV_TOL') if rtol is None else rtol
    max_iter = settings_value('KRYLOV_MAX_ITER') if max_iter is None else max_iter
    operator = LinearOperator((size, size), matvec=matvec, dtype=float)
    count = [0]

    def callback(_):
        count[0] += 1

    x, info = gmres(operator, rhs, rtol=rtol, atol=0.0, restart=restart,
                    maxiter=max(1, max_iter // restart), M=preconditioner,
                    callback=callback, callback_type='pr_norm')
    scale = float(np.linalg.norm(rhs)) or 1.0
    achieved = float(np.linalg.norm(matvec(x) - rhs)) / scale
    logger.debug('GMRES: %d iterations, relative residual %.3e, info %d', count[0], achieved, info)
    stats = KrylovStats(iterations=count[0], relative_residual=achieved, info=int(info))
    if info < 0 or not np.all(np.isfinite(x)):
        raise LinearSolveFailureError('GMRES broke down', trace=[asdict(stats)])
    if info > 0 and achieved > STAGNATION:
        raise LinearSolveFailureError(
            f'GMRES stagnated at relative residual {achieved:.3e} after {count[0]} iterations',
            trace=[asdict(stats)],
        )
    return x, stats
