from typing import Sequence, Tuple

import numpy as np

from homoglab.errors import DegenerateFit

DEGENERATE_ERROR = 1e-12


def fit_order(
    errors: Sequence[float], eps_list: Sequence[float]
) -> Tuple[float, float, float]:
    r"""Least-squares fit of ``log(error) = slope * log(eps) + intercept``.

    Args:
        errors: At least three positive error values.
        eps_list: Matching scales.

    Returns:
        tuple: ``(slope, intercept, residual)`` where ``residual`` is the root mean
        square misfit in log space. The slope is the observed order.

    Raises:
        DegenerateFit: If fewer than three entries are given or some error is
            at most 1e-12 (exact case).
    """
    errors = np.asarray(errors, dtype=float)
    eps = np.asarray(eps_list, dtype=float)
    if errors.shape != eps.shape or errors.size < 3:
        raise DegenerateFit(
            f"Need at least three matching (eps, error) pairs, got {errors.size}"
        )
    if np.any(errors <= DEGENERATE_ERROR):
        raise DegenerateFit(
            f"Error {errors.min():.3e} is at most {DEGENERATE_ERROR:.0e}; "
            "the case is exact"
        )
    x, y = np.log(eps), np.log(errors)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), float(intercept), residual
