"""
The projection Q xi = xi - c0 Z0 - sum c_ij Z_ij onto the functions
orthogonal to every Y, in the discrete L^2 product of the kernel grid.
"""
import logging
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import InvalidArgumentError, ProjectionDegenerateError
from apps.torus.spectral import Field

from .norms import weighted_norm_Y

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12


def grid_products(kernels, values):
    """<Y_a, f> for every kernel, f given by its node values"""
    w = kernels.domain.cell_area
    return np.array([w * float(np.sum(Y.values * values)) for Y in kernels.Y])


def gram_matrix(kernels):
    """M_ab = <Y_a, Z_b>"""
    return np.column_stack([grid_products(kernels, Z.values) for Z in kernels.Z])


@dataclass(frozen=True, eq=False)
class Projection:
    field: Field
    coefficients: np.ndarray
    gram: np.ndarray
    input_norm: float = None
    output_norm: float = None

    @property
    def c0(self):
        return float(self.coefficients[0])

    @property
    def cij(self):
        return self.coefficients[1:].reshape(-1, 2)

    @property
    def bound_ratio(self):
        """||Q f||_Y / ||f||_Y"""
        if not self.input_norm:
            return None
        return self.output_norm / self.input_norm


def solve_gram(gram, rhs):
    condition = np.linalg.cond(gram)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise ProjectionDegenerateError(
            f'Kernel Gram matrix is singular (condition {condition:.3e})', condition=condition)
    return np.linalg.solve(gram, rhs)


def project_Q(f, kernels, measure=False, norms=None):
    """
    Q f with the coefficients (c0, c_ij); measure=True also reports the
    Y norms of f and Q f.
    """
    if f.domain != kernels.domain:
        raise InvalidArgumentError('f must live on the kernel grid')
    gram = gram_matrix(kernels)
    coefficients = solve_gram(gram, grid_products(kernels, f.values))
    values = f.values - sum(c * Z.values for c, Z in zip(coefficients, kernels.Z))
    out = Field(f.domain, values, name=f'Q({f.name})')
    input_norm = output_norm = None
    if measure:
        input_norm = weighted_norm_Y(f, kernels.params, norms)
        output_norm = weighted_norm_Y(out, kernels.params, norms)
        logger.debug('Projection: |f|_Y=%.3e, |Qf|_Y=%.3e', input_norm, output_norm)
    return Projection(field=out, coefficients=coefficients, gram=gram,
                      input_norm=input_norm, output_norm=output_norm)
