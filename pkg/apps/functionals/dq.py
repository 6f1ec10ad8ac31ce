"""
The regularized integral

    D(q) = lim_{r -> 0} sum_i rho_i ( int_{Omega_i - B_r(q_i)} (e^{f_{q,i}} - 1) / |y - q_i|^4
                                      - int_{R^2 - Omega_i} |y - q_i|^-4 )

evaluated on a geometric sequence of inner radii and extrapolated in r.
Near q_i the odd Taylor term grad f . (y - q_i) is subtracted; it
integrates to zero on every ring.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from apps.ansatz.bubbles import rho_weights
from apps.core.exceptions import InvalidArgumentError, LimitUnstableError

from .quadrature import (
    CELL_ORDER,
    RING_ANGLES,
    RING_ORDER,
    cell_integral,
    outside_cell_tail,
    power_partition,
    ring_integral,
    voronoi_partition,
)
from .reduced import as_configuration, check_admissible, f_profile, grad_f_profile_at_center

logger = logging.getLogger(__name__)

STABILITY = 1e-4


@dataclass(frozen=True)
class ReducedConfig:
    """Points q, their partition and the quadrature of D(q)"""
    q: tuple
    partition: object
    r0: float
    levels: int = 12
    ring_angles: int = RING_ANGLES
    ring_order: int = RING_ORDER
    cell_order: int = CELL_ORDER

    @property
    def r_sequence(self):
        return self.r0 * 2.0 ** -np.arange(self.levels + 1)


def make_reduced_config(g, cfg, q, weights=None, levels=12, r0=None,
                        ring_angles=RING_ANGLES, ring_order=RING_ORDER, cell_order=CELL_ORDER):
    q = check_admissible(g, cfg, q)
    if weights is None:
        partition = voronoi_partition(q, g.periods)
    else:
        partition = power_partition(q, g.periods, weights)
    inradius = min(c.inradius for c in partition.cells())
    if r0 is None:
        r0 = 0.5 * inradius
    if not 0 < r0 < inradius:
        raise InvalidArgumentError(f'r0 = {r0} must lie in (0, {inradius})')
    if levels < 3:
        raise InvalidArgumentError('At least three radii are needed to extrapolate')
    return ReducedConfig(
        q=tuple(map(tuple, q)),
        partition=partition,
        r0=float(r0),
        levels=int(levels),
        ring_angles=ring_angles,
        ring_order=ring_order,
        cell_order=cell_order,
    )


@dataclass
class DqReport:
    value: float
    r_tail: list
    farfield_tail: float
    per_bubble: list
    monotone_tail: bool = True
    stable: bool = True
    rho: list = field(default_factory=list)

    @property
    def negative(self):
        return self.value < 0

    def table_rows(self):
        """(r, partial_sum, extrapolant) rows, extrapolant empty on the first row"""
        return [
            (r, partial, '' if extrapolant is None else extrapolant)
            for r, partial, extrapolant in self.r_tail
        ]


def richardson(values, ratio=2.0, power=2):
    """First Richardson column for an error ~ r^power on r halving"""
    factor = ratio ** power
    out = [None]
    for prev, cur in zip(values[:-1], values[1:]):
        out.append((factor * cur - prev) / (factor - 1.0))
    return out


def _tail_is_monotone(values, count=4):
    steps = np.diff(values[-count:])
    return bool(np.all(steps >= 0) or np.all(steps <= 0))


def d_of_q(g, cfg, q, rc=None, rho=None, include_profile=True, tol=STABILITY):
    """
    D(q) with its extrapolation table.

    include_profile=False drops the e^f - 1 term, leaving minus the
    weighted far-field tail.
    """
    q = as_configuration(q)
    rc = rc or make_reduced_config(g, cfg, q)
    rho = rho_weights(cfg, g, q) if rho is None else np.asarray(rho, dtype=float)
    radii = rc.r_sequence
    partial = np.zeros(len(radii))
    per_bubble = []
    tails = 0.0
    for i, cell in enumerate(rc.partition.cells()):
        qi = q[i]
        slope = grad_f_profile_at_center(g, cfg, q, i)

        def integrand(delta, qi=qi, i=i):
            if not include_profile:
                return np.zeros(len(delta))
            f = f_profile(g, cfg, q, i, qi + delta)
            return np.expm1(f) / np.sum(delta ** 2, axis=-1) ** 2

        def ring_integrand(delta, slope=slope, integrand=integrand):
            # the odd term integrates to zero on every ring
            if not include_profile:
                return np.zeros(len(delta))
            return integrand(delta) - (delta @ slope) / np.sum(delta ** 2, axis=-1) ** 2

        inradius = cell.inradius
        tail = outside_cell_tail(cell, order=rc.cell_order)
        base = cell_integral(integrand, cell, inradius, rc.cell_order)
        base += ring_integral(ring_integrand, radii[0], inradius, rc.ring_order, rc.ring_angles)
        rings = [
            ring_integral(ring_integrand, radii[m], radii[m - 1], rc.ring_order, rc.ring_angles)
            for m in range(1, len(radii))
        ]
        bubble = base - tail + np.concatenate([[0.0], np.cumsum(rings)])
        partial += rho[i] * bubble
        tails += rho[i] * tail
        per_bubble.append(bubble)
        logger.debug('D(q): bubble %d, inradius %.4g, tail %.6g', i, inradius, tail)

    extrapolants = richardson(list(partial))
    table = [(float(r), float(p), None if e is None else float(e))
             for r, p, e in zip(radii, partial, extrapolants)]
    value = extrapolants[-1]
    drift = abs(extrapolants[-1] - extrapolants[-2])
    stable = drift <= tol * (1 + abs(value))
    if not stable:
        raise LimitUnstableError(
            f'D(q) extrapolation did not settle: last iterates differ by {drift:.3e}', table=table)
    monotone = _tail_is_monotone(partial)
    if not monotone:
        logger.warning('D(q) partial sums are not monotone in the tail')
    per_value = [float(v) for v in (richardson(list(b))[-1] for b in per_bubble)]
    logger.info('D(q) = %.8g (tail %.6g)', value, tails)
    return DqReport(
        value=float(value),
        r_tail=table,
        farfield_tail=float(tails),
        per_bubble=per_value,
        monotone_tail=monotone,
        stable=stable,
        rho=rho.tolist(),
    )
