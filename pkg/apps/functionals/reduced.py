"""
The reduced energy G*(q) = sum_i u0(q_i) + 8 pi sum_{i != j} G(q_i, q_j),
its derivatives and critical points, and the localized profiles f_{q,i}.
"""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from apps.core.exceptions import (
    DegenerateCriticalPointWarning,
    InvalidConfigurationError,
    SearchFailureError,
    SingularPointError,
)
from apps.green.ewald import grad_u0, hess_u0, u0_eval

logger = logging.getLogger(__name__)

ADMISSIBLE_MARGIN = 1e-8


def as_configuration(q):
    """q as a (k, 2) array"""
    return np.asarray(q, dtype=float).reshape(-1, 2)


def check_admissible(g, cfg, q, margin=ADMISSIBLE_MARGIN):
    """Raise InvalidConfigurationError unless q_i are distinct and avoid the vortex points"""
    q = as_configuration(q)
    periods = np.asarray(g.periods)
    tol = margin * max(g.periods)

    def dist(a, b):
        delta = a - b
        return float(np.linalg.norm(delta - periods * np.round(delta / periods)))

    for i in range(len(q)):
        for j in range(i + 1, len(q)):
            if dist(q[i], q[j]) <= tol:
                raise InvalidConfigurationError(f'q_{i} and q_{j} coincide')
        for j, p in enumerate(cfg.points):
            if dist(q[i], np.asarray(p)) <= tol:
                raise InvalidConfigurationError(f'q_{i} sits on vortex point p_{j}')
    return q


def g_star(g, cfg, q):
    q = check_admissible(g, cfg, q)
    total = float(np.sum(u0_eval(g, cfg, q))) if len(cfg) else 0.0
    for i in range(len(q)):
        for j in range(len(q)):
            if i != j:
                total += 8 * np.pi * float(g.green(q[i], q[j]))
    return total


def grad_g_star(g, cfg, q):
    """Gradient of G* as a 2k-vector ordered (q_1, q_2, ...)"""
    q = check_admissible(g, cfg, q)
    grad = grad_u0(g, cfg, q) if len(cfg) else np.zeros_like(q)
    for i in range(len(q)):
        for j in range(len(q)):
            if i != j:
                grad[i] += 16 * np.pi * g.grad_green(q[i], q[j])
    return grad.ravel()


def hessian_g_star(g, cfg, q):
    q = check_admissible(g, cfg, q)
    k = len(q)
    H = np.zeros((2 * k, 2 * k))
    for i in range(k):
        block = hess_u0(g, cfg, q[i]) if len(cfg) else np.zeros((2, 2))
        for j in range(k):
            if j == i:
                continue
            mixed = g.hess_green(q[i], q[j])
            block = block + 16 * np.pi * mixed
            H[2 * i:2 * i + 2, 2 * j:2 * j + 2] = -16 * np.pi * mixed
        H[2 * i:2 * i + 2, 2 * i:2 * i + 2] = block
    return 0.5 * (H + H.T)


@dataclass
class CriticalPointCertificate:
    """Hessian spectrum and convergence data of a critical point of G*"""
    q: np.ndarray
    value: float
    gradient_norm: float
    eigenvalues: np.ndarray
    iterations: int
    trace: list = field(default_factory=list)

    @property
    def min_abs_eigenvalue(self):
        return float(np.min(np.abs(self.eigenvalues)))

    @property
    def kind(self):
        if np.all(self.eigenvalues < 0):
            return 'maximum'
        if np.all(self.eigenvalues > 0):
            return 'minimum'
        return 'saddle'

    @property
    def nondegenerate(self):
        scale = max(1.0, float(np.max(np.abs(self.eigenvalues))))
        return self.min_abs_eigenvalue > 1e-8 * scale


def find_critical_point(g, cfg, q0, tol=1e-9, max_iter=50):
    """
    Damped Newton iteration on grad G* = 0.

    Steps are halved until |grad G*| decreases; if no admissible step
    decreases it the search fails with its trace.
    """
    q = check_admissible(g, cfg, q0).copy()
    periods = np.asarray(g.periods)
    trace = []
    iterations = 0
    while True:
        grad = grad_g_star(g, cfg, q)
        gnorm = float(np.linalg.norm(grad))
        trace.append({'iteration': iterations, 'gradient_norm': gnorm, 'q': q.ravel().tolist()})
        logger.info('Critical point search: iteration %d, |grad G*| = %.3e', iterations, gnorm)
        if gnorm <= tol:
            break
        if iterations >= max_iter:
            raise SearchFailureError(
                f'No critical point within {max_iter} iterations (|grad| = {gnorm:.3e})', trace=trace)
        H = hessian_g_star(g, cfg, q)
        step = np.linalg.lstsq(H, -grad, rcond=None)[0].reshape(q.shape)
        t = 1.0
        while t >= 1.0 / 1024:
            candidate = np.mod(q + t * step, periods)
            try:
                new = float(np.linalg.norm(grad_g_star(g, cfg, candidate)))
            except (InvalidConfigurationError, SingularPointError):
                new = np.inf
            if new < gnorm:
                break
            t *= 0.5
        else:
            raise SearchFailureError(
                'Critical point search left the admissible set or stalled', trace=trace)
        q = candidate
        iterations += 1

    certificate = CriticalPointCertificate(
        q=q,
        value=g_star(g, cfg, q),
        gradient_norm=gnorm,
        eigenvalues=np.linalg.eigvalsh(hessian_g_star(g, cfg, q)),
        iterations=iterations,
        trace=trace,
    )
    if not certificate.nondegenerate:
        message = f'Critical point at {q.ravel().tolist()} has a numerically singular Hessian'
        logger.warning(message)
        warnings.warn(message, DegenerateCriticalPointWarning)
    return q, certificate


def f_profile(g, cfg, q, i, y):
    """
    f_{q,i}(y) = 8 pi (gamma(y, q_i) - gamma(q_i, q_i)
                 + sum_{j != i} (G(y, q_j) - G(q_i, q_j))) + u0(y) - u0(q_i)
    """
    q = as_configuration(q)
    y = np.asarray(y, dtype=float)
    qi = q[i]
    total = 8 * np.pi * (g.gamma(y, qi) - g.gamma(qi, qi))
    for j in range(len(q)):
        if j != i:
            total = total + 8 * np.pi * (g.green(y, q[j]) - g.green(qi, q[j]))
    if len(cfg):
        total = total + u0_eval(g, cfg, y) - u0_eval(g, cfg, qi)
    return float(total) if np.ndim(total) == 0 else total


def grad_f_profile_at_center(g, cfg, q, i):
    """Gradient of f_{q,i} at q_i, the odd Taylor coefficient"""
    q = as_configuration(q)
    qi = q[i]
    grad = 8 * np.pi * g.grad_gamma(qi, qi)
    for j in range(len(q)):
        if j != i:
            grad = grad + 8 * np.pi * g.grad_green(qi, q[j])
    if len(cfg):
        grad = grad + grad_u0(g, cfg, qi)
    return grad
