from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import InvalidConfigurationError


@dataclass(frozen=True)
class VortexConfig:
    """Vortex points p_j with multiplicities; N = sum of multiplicities"""
    points: tuple = ()
    multiplicities: tuple = ()

    @property
    def N(self):
        return int(sum(self.multiplicities))

    @property
    def k(self):
        return self.N // 2

    def __len__(self):
        return len(self.points)

    def as_array(self):
        return np.asarray(self.points, dtype=float).reshape(-1, 2)

    def weights(self):
        return np.asarray(self.multiplicities, dtype=float)


def make_vortex_config(points, multiplicities=None, periods=(1.0, 1.0), require_even=True):
    """Validated VortexConfig with points reduced into the fundamental cell"""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if multiplicities is None:
        multiplicities = [1] * len(pts)
    mults = tuple(int(m) for m in multiplicities)
    if len(mults) != len(pts):
        raise InvalidConfigurationError(
            f'{len(pts)} vortex points but {len(mults)} multiplicities'
        )
    if any(m <= 0 for m in mults):
        raise InvalidConfigurationError(f'Multiplicities must be positive, got {mults}')
    periods = np.asarray(periods, dtype=float)
    pts = np.mod(pts, periods)
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            delta = pts[i] - pts[j]
            delta -= periods * np.round(delta / periods)
            if np.linalg.norm(delta) < 1e-12:
                raise InvalidConfigurationError(
                    f'Vortex points {i} and {j} coincide on the torus'
                )
    N = sum(mults)
    if require_even and N % 2:
        raise InvalidConfigurationError(f'Total vortex number N = {N} must be even')
    return VortexConfig(
        points=tuple((float(p[0]), float(p[1])) for p in pts),
        multiplicities=mults,
    )
