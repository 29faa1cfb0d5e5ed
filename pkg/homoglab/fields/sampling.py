from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from homoglab.errors import IncommensurateWindow
from homoglab.fields.coefficients import CoefficientSpec

if TYPE_CHECKING:
    from homoglab.strip.grid import StripGrid

WINDOW_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StripSample:
    r"""Coefficients evaluated at the nodes of a strip grid.

    ``A`` and ``B`` are given in the original coordinates, ``A_rot`` and
    ``B_rot`` in strip coordinates (tangent first, normal last), and ``g`` on
    the :math:`\Sigma_0` column.
    """

    A: np.ndarray
    B: np.ndarray
    g: np.ndarray
    rotation: np.ndarray

    @property
    def A_rot(self) -> np.ndarray:
        r = self.rotation
        return np.einsum("ia,...ab,jb->...ij", r, self.A, r)

    @property
    def B_rot(self) -> np.ndarray:
        return np.einsum("ia,...a->...i", self.rotation, self.B)


def _check_window(spec: CoefficientSpec, grid: "StripGrid", bottom: np.ndarray) -> None:
    r"""Compares every field on the :math:`\Sigma_0` column with its translate by one window."""
    shift = grid.window * grid.direction.tangent / grid.cell_size
    for name in ("A", "B", "g"):
        field = getattr(spec, name)
        here = np.asarray(field(bottom))
        gap = np.abs(np.asarray(field(bottom + shift)) - here).max(initial=0.0)
        if gap > WINDOW_TOL * max(1.0, np.abs(here).max(initial=0.0)):
            raise IncommensurateWindow(
                f"{name} differs by {gap:.3e} across the window {grid.window:.6g} "
                f"of direction {grid.direction}; the window is not a lattice period"
            )


def sample_on_strip(spec: CoefficientSpec, grid: "StripGrid") -> StripSample:
    r"""Evaluates A(x/c), B(x/c) and g(x/c) at the nodes of ``grid``.

    ``c`` is the grid's cell size: ``eps`` for macroscale grids, 1 for microscale
    grids.

    Raises:
        IncommensurateWindow: If some field is not periodic over the tangential
            window.
    """
    y = grid.points() / grid.cell_size
    if grid.dim == 2:
        _check_window(spec, grid, y[:, 0, :])
    return StripSample(
        A=spec.A(y),
        B=spec.B(y),
        g=np.atleast_1d(spec.g(y[..., 0, :])),
        rotation=grid.direction.rotation,
    )
