import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from homoglab.cell.correctors import solve_cell
from homoglab.errors import DegenerateFit, InputRejection
from homoglab.fields.coefficients import CoefficientSpec
from homoglab.fields.direction import Direction
from homoglab.strip.grid import StripGrid, macro_grid
from homoglab.strip.solver import effective_operator, strip_operator
from homoglab.utils.fitting import fit_order

log = logging.getLogger(__name__)

EXACT_TOL = 1e-9
PERIODIC_DATA_TOL = 1e-9
CELL_RESOLUTION = 64

BoundaryData = Union[float, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True, eq=False)
class RateReport:
    r"""Dirichlet rate study :math:`\|w^\varepsilon - \bar w\|_\infty` against ``eps``.

    Attributes:
        table: One row per ``eps`` with columns ``eps``, ``error`` and, when
            refined, ``refined_error`` and ``relative_change``.
        Abar: Effective matrix used for :math:`\bar w`.
        order: Fitted order, ``None`` when the fit is degenerate or too short.
        intercept: Intercept of the log-log fit.
        C: ``max(error / eps)``.
        degenerate: True when every error is at most 1e-9 (exact case).
    """

    table: pd.DataFrame
    Abar: np.ndarray
    order: Optional[float]
    intercept: Optional[float]
    C: float
    degenerate: bool

    @property
    def status(self) -> str:
        if self.degenerate:
            return "degenerate-exact"
        return "fitted" if self.order is not None else "unfitted"

    def to_dict(self):
        return {
            "table": self.table,
            "Abar": self.Abar,
            "order": self.order,
            "intercept": self.intercept,
            "C": self.C,
            "status": self.status,
        }


def _boundary_values(data: BoundaryData, grid: StripGrid) -> np.ndarray:
    if not callable(data):
        return grid.as_trace(data)
    points = grid.points()[..., 0, :]
    values = np.asarray(data(points), dtype=float)
    if grid.dim == 2:
        shifted = np.asarray(data(points + grid.window * grid.direction.tangent), dtype=float)
        gap = np.abs(shifted - values).max(initial=0.0)
        if gap > PERIODIC_DATA_TOL * max(1.0, np.abs(values).max(initial=0.0)):
            raise InputRejection(
                f"Dirichlet data differs by {gap:.3e} across the window "
                f"{grid.window:.6g}; it must be periodic along the boundary"
            )
    return grid.as_trace(values)


def _dirichlet_error(spec, Abar, grid, data) -> float:
    f = _boundary_values(data, grid)
    oscillating = strip_operator(spec, grid).solve_dirichlet(top=0.0, bottom=f)
    effective = effective_operator(Abar, grid).solve_dirichlet(top=0.0, bottom=f)
    return float(np.abs(oscillating.values - effective.values).max())


def rate_study(
    spec: CoefficientSpec,
    direction: Direction,
    eps_list: Sequence[float],
    data: BoundaryData = 1.0,
    resolution: int = 8,
    Abar: Optional[np.ndarray] = None,
    refine: bool = False,
    periods: int = 1,
    cell_resolution: int = CELL_RESOLUTION,
    progress: bool = False,
) -> RateReport:
    r"""Compares the oscillating Dirichlet problem with its homogenized limit.

    For each ``eps`` both :math:`w^\varepsilon` and :math:`\bar w` solve the
    problem with ``w = 0`` on :math:`\Sigma_1` and ``w = f`` on :math:`\Sigma_0`
    on the same grid with ``h = eps / resolution``; the error is their sup
    distance.

    Args:
        spec: Validated coefficients.
        direction: Boundary direction.
        eps_list: Scales, decreasing.
        data: Constant or callable ``f(x)`` of the physical points of :math:`\Sigma_0`.
        resolution: Nodes per cell period.
        Abar: Effective matrix, computed by :func:`solve_cell` when omitted.
        refine: Repeat each ``eps`` at twice the resolution.
        periods: Lattice periods in the tangential window.
        cell_resolution: Cell grid size for the effective matrix.
        progress: Show a progress bar.

    Raises:
        InputRejection: If callable ``data`` is not periodic over the
            tangential window.
    """
    if Abar is None:
        Abar = solve_cell(spec, cell_resolution).Abar
    Abar = np.atleast_2d(Abar)

    rows = []
    for eps in tqdm(list(eps_list), desc="rates", disable=not progress):
        grid = macro_grid(direction, eps, resolution, periods=periods, spec=spec)
        row = {"eps": eps, "error": _dirichlet_error(spec, Abar, grid, data)}
        if refine:
            fine = macro_grid(direction, eps, 2 * resolution, periods=periods, spec=spec)
            row["refined_error"] = _dirichlet_error(spec, Abar, fine, data)
            row["relative_change"] = abs(row["refined_error"] - row["error"]) / max(
                row["error"], EXACT_TOL
            )
        log.info(f"Rate study eps={eps:.6g}: error {row['error']:.6e}")
        rows.append(row)
    table = pd.DataFrame(rows)

    degenerate = bool((table["error"] <= EXACT_TOL).all())
    order = intercept = None
    if not degenerate:
        try:
            order, intercept, _ = fit_order(table["error"], table["eps"])
        except DegenerateFit as e:
            log.warning(f"Rate fit skipped: {e}")
    C = float((table["error"] / table["eps"]).max())
    return RateReport(
        table=table,
        Abar=Abar,
        order=order,
        intercept=intercept,
        C=C,
        degenerate=degenerate,
    )
