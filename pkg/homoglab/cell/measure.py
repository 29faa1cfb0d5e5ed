import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from homoglab.cell.operator import MonotoneOperator, assemble_generator
from homoglab.errors import NoConvergence, NonPositive, NullSpaceDimension
from homoglab.fields.coefficients import CoefficientSpec, torus_points

log = logging.getLogger(__name__)

SHIFT = -1.0
STEP_TOL = 1e-12
ADJOINT_TOL = 1e-8
MAX_ITERATIONS = 200
UNIQUENESS_TOL = 1e-6
CENTERING_TOL = 1e-10
CENTERING_ITERATIONS = 50


def _power_iteration(lu, adjoint, start, weight, tol, max_iterations):
    m = start / (start.sum() * weight)
    for _ in range(max_iterations):
        update = lu.solve(m)
        update /= update.sum() * weight
        step = np.abs(update - m).max()
        m = update
        if step <= STEP_TOL * np.abs(m).max():
            break
        if np.abs(adjoint @ m).max() <= tol * np.abs(m).max():
            break
    return m


def invariant_measure(
    op: MonotoneOperator,
    shift: float = SHIFT,
    tol: float = 1e-10,
    max_iterations: int = MAX_ITERATIONS,
) -> np.ndarray:
    r"""Invariant measure of ``op``: the positive null vector of :math:`L_h^*`.

    Computed by inverse power iteration on :math:`L_h^* - \sigma I` (one sparse
    LU factorization, reused). The iteration runs from two different positive
    starts; distinct limits reveal a second null direction.

    Args:
        op: Periodic monotone generator.
        shift: The shift :math:`\sigma`, any nonzero value off the spectrum.
        tol: Target relative adjoint residual of the iteration.
        max_iterations: Iteration budget per start.

    Returns:
        np.ndarray: Grid shaped ``m`` with ``sum(m) * h**D == 1``.

    Raises:
        NullSpaceDimension: If the two starts converge to different vectors.
        NonPositive: If ``m`` has a nonpositive entry.
        NoConvergence: If the adjoint residual stays above ``1e-8 * |m|``.
    """
    adjoint = sp.csc_matrix(op.matrix.T)
    n = adjoint.shape[0]
    lu = splu(sp.csc_matrix(adjoint - shift * sp.identity(n)))
    weight = op.cell_volume

    y = op.flat(torus_points(op.dim, op.N))
    starts = [
        np.ones(n),
        1.0 + 0.5 * np.cos(2 * np.pi * y.sum(axis=-1)),
    ]
    limits = [
        _power_iteration(lu, adjoint, start, weight, tol, max_iterations)
        for start in starts
    ]
    m = limits[0]
    gap = np.abs(limits[1] - m).max()
    if gap > UNIQUENESS_TOL * np.abs(m).max():
        raise NullSpaceDimension(
            f"Inverse iteration reached two limits {gap:.3e} apart; "
            "the adjoint null space is not one-dimensional"
        )

    residual = np.abs(adjoint @ m).max()
    if residual > ADJOINT_TOL * np.abs(m).max():
        raise NoConvergence(
            f"Adjoint residual {residual:.3e} exceeds {ADJOINT_TOL:.0e} x |m|"
        )
    if m.min() <= 0:
        raise NonPositive(
            f"Invariant measure has minimum {m.min():.3e}; monotonicity was lost"
        )
    return m.reshape(op.shape)


def drift_average(B: np.ndarray, m: np.ndarray, cell_volume: float) -> np.ndarray:
    r"""Compatibility defect :math:`\bar b = \sum_i B(y_i) m(y_i) h^D`."""
    dim = B.shape[-1]
    return np.tensordot(m, B.reshape(m.shape + (dim,)), axes=m.ndim) * cell_volume


def center_drift(
    spec: CoefficientSpec,
    N: int,
    tol: float = CENTERING_TOL,
    max_iterations: int = CENTERING_ITERATIONS,
) -> CoefficientSpec:
    r"""Shifts the constant mode of B until :math:`|\bar b| \le` ``tol``.

    Iterates :math:`B_{k+1} = B_k - \bar b(B_k, m(B_k))`.

    Raises:
        NoConvergence: If ``max_iterations`` shifts do not reach ``tol``.
    """
    zero = (0,) * spec.dim
    current = spec
    defect = np.zeros(spec.dim)
    for iteration in range(1, max_iterations + 1):
        op = assemble_generator(current, N)
        m = invariant_measure(op)
        defect = drift_average(op.B, m, op.cell_volume)
        log.info(
            f"Drift centering iteration {iteration}: |b| = {np.abs(defect).max():.3e}"
        )
        if np.abs(defect).max() <= tol:
            return current
        b_modes = dict(current.b_modes)
        b_modes[zero] = np.asarray(b_modes.get(zero, np.zeros(spec.dim)), complex)
        b_modes[zero] = b_modes[zero] - defect
        current = current.with_drift(b_modes)
    raise NoConvergence(
        f"Drift centering did not reach {tol:.0e} after {max_iterations} "
        f"iterations, last defect {np.abs(defect).max():.3e}"
    )
