import logging

import numpy as np

from homoglab.fields.coefficients import CoefficientSpec
from homoglab.strip.grid import StripGrid
from homoglab.strip.solver import normal_derivative, strip_operator

log = logging.getLogger(__name__)


def dtn_apply(spec: CoefficientSpec, grid: StripGrid, u_boundary) -> np.ndarray:
    r"""Dirichlet-to-Neumann map :math:`I^r(u)` of the strip ``grid``.

    Solves the problem with ``u_boundary`` on :math:`\Sigma_0` and zero data on
    :math:`\Sigma_r` and returns the discrete normal derivative on
    :math:`\Sigma_0`. The map is linear in ``u_boundary``. Macroscale grids with
    ``r = 1`` give :math:`I^1`, microscale grids with ``r = 1/eps`` give
    :math:`I^{1/\varepsilon}`.

    Args:
        spec: Validated coefficients.
        grid: Strip grid, its factorization is shared across calls.
        u_boundary: Scalar or array of the :math:`\Sigma_0` shape.

    Returns:
        np.ndarray: One-dimensional trace of the normal derivative.
    """
    u = strip_operator(spec, grid).solve_dirichlet(top=0.0, bottom=u_boundary)
    return normal_derivative(u)
