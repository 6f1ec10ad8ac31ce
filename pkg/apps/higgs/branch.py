"""
The substitution u = F(v) = 1 + v - e^v on the branch v <= 0, its inverse,
and the nonlinearities of the semilinear equation in u.

Every function accepts scalars or numpy arrays; array inputs are handled
elementwise and return arrays of the same shape.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from apps.core.conf import settings_value
from apps.core.exceptions import InvalidArgumentError, IterationFailureError, OutOfBranchError
from apps.torus.spectral import Field

SERIES_RADIUS = 1e-2


def _check_branch(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(x > 0):
        index = int(np.argmax(x)) if x.ndim else None
        worst = float(np.max(x))
        raise OutOfBranchError(
            f'{name} = {worst:.3e} > 0 lies outside the branch (-inf, 0]',
            worst_value=worst,
            worst_index=None if index is None else np.unravel_index(index, x.shape),
        )
    return x


def _scalar_or_array(value, like):
    return float(value) if np.ndim(like) == 0 else value


def _F(v):
    """1 + v - e^v without cancellation near 0"""
    small = np.abs(v) < SERIES_RADIUS
    vs = np.where(small, v, 0.0)
    series = -vs ** 2 * (
        1 / 2 + vs * (1 / 6 + vs * (1 / 24 + vs * (1 / 120 + vs * (1 / 720 + vs / 5040))))
    )
    return np.where(small, series, v - np.expm1(v))


@dataclass(frozen=True)
class HiggsBranch:
    """Root-finding parameters for the inverse of F on (-inf, 0]"""
    tolerance: float = field(default_factory=lambda: settings_value('HIGGS_TOL'))
    max_iter: int = field(default_factory=lambda: settings_value('HIGGS_MAX_ITER'))

    def F(self, v):
        v = _check_branch(v, 'v')
        return _scalar_or_array(_F(v), v)

    def F_inverse(self, u):
        """Safeguarded Newton on F(v) = u inside the bracket [u - 1, u]"""
        u = _check_branch(u, 'u')
        flat = np.atleast_1d(u).astype(float).ravel()
        lo = flat - 1.0
        hi = flat.copy()
        v = np.where(flat <= -2.0, flat - 1.0, -np.sqrt(-2.0 * flat))
        v = np.clip(v, lo, hi)
        scale = self.tolerance * (1.0 + np.abs(flat))
        active = flat < 0.0
        v[~active] = 0.0
        for _ in range(self.max_iter):
            if not np.any(active):
                break
            va = v[active]
            fa = _F(va) - flat[active]
            done = np.abs(fa) <= scale[active]
            # Tighten the bracket with the sign of the defect
            lo_a, hi_a = lo[active], hi[active]
            lo_a = np.where(fa < 0, va, lo_a)
            hi_a = np.where(fa > 0, va, hi_a)
            slope = -np.expm1(va)
            with np.errstate(divide='ignore', invalid='ignore'):
                step = fa / slope
            candidate = va - step
            outside = ~np.isfinite(candidate) | (candidate <= lo_a) | (candidate >= hi_a)
            candidate = np.where(outside, 0.5 * (lo_a + hi_a), candidate)
            stalled = np.abs(candidate - va) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(va))
            v[active] = np.where(done, va, candidate)
            lo[active], hi[active] = lo_a, hi_a
            idx = np.flatnonzero(active)
            active[idx[done | stalled]] = False
        else:
            if np.any(active):
                worst = int(np.flatnonzero(active)[0])
                raise IterationFailureError(
                    f'F_inverse did not converge for u = {flat[worst]!r} '
                    f'in {self.max_iter} iterations',
                    u=float(flat[worst]),
                )
        v = np.minimum(v, 0.0).reshape(np.shape(u))
        return _scalar_or_array(v, u)

    def apply(self, f, fn=None):
        """Map F_inverse (or another branch function) over a Field"""
        fn = fn or self.F_inverse
        return Field(f.domain, fn(f.values), name=f'v({f.name})')


@lru_cache(maxsize=1)
def default_branch():
    return HiggsBranch()


def F(v):
    return default_branch().F(v)


def F_inverse(u):
    return default_branch().F_inverse(u)


# ============================================
# NONLINEARITIES
# ============================================

class GeneralizedModel:
    """eps^-2 e^V (1 - e^V)^2 with V = F_inverse(u), the generalized self-dual model"""
    name = 'generalized'
    max_u = 0.0

    def __init__(self, branch=None):
        self.branch = branch or default_branch()

    def __call__(self, u, eps):
        V = self.branch.F_inverse(u)
        return np.exp(V) * np.expm1(V) ** 2 / eps ** 2

    def derivative(self, u, eps):
        # Cancelled closed form, bounded as u -> 0-
        eV = np.exp(self.branch.F_inverse(u))
        return eV * (1.0 - 3.0 * eV) / eps ** 2

    def both(self, u, eps):
        """Value and derivative sharing one inversion"""
        V = self.branch.F_inverse(u)
        eV = np.exp(V)
        return eV * np.expm1(V) ** 2 / eps ** 2, eV * (1.0 - 3.0 * eV) / eps ** 2

    def v_of_u(self, u):
        """The Higgs variable v = F_inverse(u)"""
        return self.branch.F_inverse(u)


class RelativisticModel:
    """
    eps^-2 e^s (1 - e^s) with s = u - 1, the relativistic Chern-Simons
    nonlinearity. It agrees with GeneralizedModel up to O(e^{3s} / eps^2).
    """
    name = 'relativistic'
    max_u = 1.0

    def __call__(self, u, eps):
        s = np.asarray(u, dtype=float) - 1.0
        _check_branch(s, 'u - 1')
        value = -np.exp(s) * np.expm1(s) / eps ** 2
        return _scalar_or_array(value, u)

    def derivative(self, u, eps):
        s = np.asarray(u, dtype=float) - 1.0
        _check_branch(s, 'u - 1')
        es = np.exp(s)
        return _scalar_or_array(es * (1.0 - 2.0 * es) / eps ** 2, u)

    def both(self, u, eps):
        return self(u, eps), self.derivative(u, eps)

    def v_of_u(self, u):
        s = np.asarray(u, dtype=float) - 1.0
        _check_branch(s, 'u - 1')
        return _scalar_or_array(s, u)


MODELS = {
    GeneralizedModel.name: GeneralizedModel,
    RelativisticModel.name: RelativisticModel,
}


def get_model(name_or_model=None):
    if name_or_model is None:
        return GeneralizedModel()
    if isinstance(name_or_model, str):
        try:
            return MODELS[name_or_model]()
        except KeyError:
            raise InvalidArgumentError(
                f'Unknown model {name_or_model!r}; choose from {sorted(MODELS)}'
            )
    return name_or_model


def nonlinearity(u, eps):
    """N_eps(u) = eps^-2 e^V (1 - e^V)^2, V = F_inverse(u)"""
    return _scalar_or_array(GeneralizedModel()(u, eps), u)


def nonlinearity_derivative(u, eps):
    """dN_eps/du = eps^-2 e^V (1 - 3 e^V)"""
    return _scalar_or_array(GeneralizedModel().derivative(u, eps), u)
