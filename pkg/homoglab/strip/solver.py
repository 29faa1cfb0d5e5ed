import logging
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp

from homoglab.cell.operator import DOMINANCE_MARGIN, monotone_stencil, stencil_matrix
from homoglab.errors import MaximumPrincipleViolation
from homoglab.fields.coefficients import CoefficientSpec, constant_spec
from homoglab.fields.sampling import sample_on_strip
from homoglab.strip.grid import StripField, StripGrid
from homoglab.utils.linalg import SparseSolver

log = logging.getLogger(__name__)

MAX_PRINCIPLE_TOL = 1e-8


class StripOperator:
    r"""Monotone discretization of :math:`\mathrm{Tr}(A D^2u) + c^{-1} B\cdot\nabla u` on a strip.

    The coefficients are sampled at ``y = x / c`` with ``c`` the grid's cell size
    and rotated into strip coordinates. Rows of interior nodes carry the
    monotone stencil, rows of :math:`\Sigma_r` are Dirichlet rows, and rows of
    :math:`\Sigma_0` are either Dirichlet rows or second-order Neumann rows.
    Both system matrices are factorized lazily and reused across solves.

    Args:
        spec: Validated coefficients.
        grid: Strip grid.
        delta0: Dominance margin of the stencil.
    """

    def __init__(
        self,
        spec: CoefficientSpec,
        grid: StripGrid,
        delta0: float = DOMINANCE_MARGIN,
    ):
        self.spec = spec
        self.grid = grid
        self.sample = sample_on_strip(spec, grid)
        self.stencil = monotone_stencil(
            self.sample.A_rot,
            self.sample.B_rot,
            grid.spacings,
            drift_scale=1.0 / grid.cell_size,
            delta0=delta0,
        )
        self.index = np.arange(int(np.prod(grid.shape))).reshape(grid.shape)
        self.bottom = self.index[..., 0].ravel()
        self.top = self.index[..., -1].ravel()
        self.fallback_rows = 0

    @property
    def size(self) -> int:
        return self.index.size

    @cached_property
    def interior(self) -> sp.csr_matrix:
        rows = np.zeros(self.grid.shape, dtype=bool)
        rows[..., 1:-1] = True
        return stencil_matrix(self.stencil, self.grid.shape, self.grid.periodic, rows)

    def _placement(self, nodes: np.ndarray) -> sp.csr_matrix:
        """``n x len(nodes)`` matrix moving boundary rows into place."""
        ones = np.ones(nodes.size)
        return sp.csr_matrix(
            (ones, (nodes, np.arange(nodes.size))), shape=(self.size, nodes.size)
        )

    def _identity_rows(self, nodes: np.ndarray) -> sp.csr_matrix:
        diagonal = np.zeros(self.size)
        diagonal[nodes] = 1.0
        return sp.diags(diagonal, format="csr")

    @cached_property
    def dirichlet_solver(self) -> SparseSolver:
        matrix = (
            self.interior
            + self._identity_rows(self.bottom)
            + self._identity_rows(self.top)
        )
        return SparseSolver(matrix)

    @cached_property
    def neumann_rows(self):
        r"""Folded :math:`\Sigma_0` rows and their right-hand side scale.

        The row ``-3u_0 + 4u_1 - u_2 = 2hg`` is combined with ``1/c`` times the
        interior row of node 1, ``c`` being that row's weight on ``u_2``. The
        result has nonnegative off-diagonal entries exactly when ``4c`` is at
        least the total off-diagonal weight of node 1; other rows fall back to
        ``-u_0 + u_1 = hg``.

        Returns:
            tuple: ``(rows, scale)`` with ``rows`` of shape ``(n_bottom, n)`` and
            the right-hand side of row ``k`` equal to ``scale[k] * h * g[k]``.
        """
        up = (0,) * (self.grid.dim - 1) + (1,)
        c_up = self.stencil.weights[up][..., 1].ravel()
        off_total = -self.stencil.center[..., 1].ravel()
        monotone = (c_up > 0) & (4 * c_up >= off_total * (1 - 1e-12))
        inverse = np.divide(1.0, c_up, out=np.zeros_like(c_up), where=c_up > 0)

        first = self.index[..., 1].ravel()
        second = self.index[..., 2].ravel()
        count = self.bottom.size
        rows = np.arange(count)

        folded = sp.coo_matrix(
            (
                np.concatenate([-3 * np.ones(count), 4 * np.ones(count), -np.ones(count)]),
                (np.tile(rows, 3), np.concatenate([self.bottom, first, second])),
            ),
            shape=(count, self.size),
        ).tocsr()
        folded = folded + sp.diags(inverse) @ self.interior[first]
        fallback = sp.coo_matrix(
            (
                np.concatenate([-np.ones(count), np.ones(count)]),
                (np.tile(rows, 2), np.concatenate([self.bottom, first])),
            ),
            shape=(count, self.size),
        ).tocsr()
        keep = sp.diags(monotone.astype(float))
        rows_matrix = keep @ folded + sp.diags((~monotone).astype(float)) @ fallback
        rows_matrix.eliminate_zeros()

        self.fallback_rows = int((~monotone).sum())
        if self.fallback_rows:
            log.warning(
                f"{self.fallback_rows} of {count} Neumann rows use the first-order "
                f"one-sided difference (grid {self.grid.shape}, eps={self.grid.eps:.6g})"
            )
        scale = np.where(monotone, 2.0, 1.0)
        return rows_matrix.tocsr(), scale

    @cached_property
    def neumann_solver(self) -> SparseSolver:
        rows, _ = self.neumann_rows
        matrix = (
            self.interior
            + self._placement(self.bottom) @ rows
            + self._identity_rows(self.top)
        )
        return SparseSolver(matrix)

    def solve_dirichlet(self, top=0.0, bottom=0.0, check: bool = True) -> StripField:
        r"""Solves with ``u = top`` on :math:`\Sigma_r` and ``u = bottom`` on :math:`\Sigma_0`.

        Raises:
            MaximumPrincipleViolation: If ``check`` and the solution leaves the
                range of the boundary data.
        """
        top = self.grid.as_trace(top)
        bottom = self.grid.as_trace(bottom)
        rhs = np.zeros(self.size)
        rhs[self.bottom] = bottom.ravel()
        rhs[self.top] = top.ravel()
        values = self.dirichlet_solver.solve(rhs).reshape(self.grid.shape)
        field = StripField(
            grid=self.grid,
            values=values,
            role="dirichlet",
            meta={"residual": self.dirichlet_solver.residual(values.ravel(), rhs)},
        )
        if check:
            max_principle_check(field, np.concatenate([top.ravel(), bottom.ravel()]))
        return field

    def solve_neumann(self, g: Optional[np.ndarray] = None) -> StripField:
        r"""Solves with ``u = 0`` on :math:`\Sigma_r` and :math:`\partial_n u = g` on :math:`\Sigma_0`.

        ``g`` defaults to the sampled datum ``g(x / c)`` of the spec. The field's
        ``meta`` holds the bound constant ``|u| / |g|`` and the number of
        fallback Neumann rows.
        """
        g = self.sample.g if g is None else g
        g = self.grid.as_trace(g).ravel()
        rows, scale = self.neumann_rows
        rhs = np.zeros(self.size)
        rhs[self.bottom] = scale * self.grid.h * g
        values = self.neumann_solver.solve(rhs).reshape(self.grid.shape)
        g_norm = float(np.abs(g).max())
        u_norm = float(np.abs(values).max())
        return StripField(
            grid=self.grid,
            values=values,
            role="neumann",
            meta={
                "residual": self.neumann_solver.residual(values.ravel(), rhs),
                "bound_constant": u_norm / g_norm if g_norm > 0 else 0.0,
                "fallback_rows": self.fallback_rows,
            },
        )


@lru_cache(maxsize=32)
def strip_operator(
    spec: CoefficientSpec, grid: StripGrid, delta0: float = DOMINANCE_MARGIN
) -> StripOperator:
    """Shared :class:`StripOperator` per ``(spec, grid)``; factorizations are reused."""
    return StripOperator(spec, grid, delta0=delta0)


def max_principle_check(field: StripField, boundary: np.ndarray) -> float:
    """Largest excursion of ``field`` outside the boundary data range.

    Raises:
        MaximumPrincipleViolation: If the excursion exceeds the tolerance.
    """
    low, high = float(np.min(boundary)), float(np.max(boundary))
    excursion = max(low - field.values.min(), field.values.max() - high, 0.0)
    tol = MAX_PRINCIPLE_TOL * max(1.0, abs(low), abs(high))
    if excursion > tol:
        raise MaximumPrincipleViolation(
            f"Dirichlet solution leaves [{low:.6g}, {high:.6g}] by {excursion:.3e}"
        )
    return excursion


def solve_dirichlet(
    spec: CoefficientSpec, grid: StripGrid, top=0.0, bottom=0.0
) -> StripField:
    """Dirichlet problem on ``grid``, see :meth:`StripOperator.solve_dirichlet`."""
    return strip_operator(spec, grid).solve_dirichlet(top, bottom)


def solve_neumann(
    spec: CoefficientSpec, grid: StripGrid, g: Optional[np.ndarray] = None
) -> StripField:
    """Mixed problem on ``grid``, see :meth:`StripOperator.solve_neumann`."""
    return strip_operator(spec, grid).solve_neumann(g)


def normal_derivative(u: StripField) -> np.ndarray:
    r"""Second-order one-sided :math:`\partial_n u` on :math:`\Sigma_0`, pointing into the strip."""
    values = u.values
    h = u.grid.h
    derivative = (-3 * values[..., 0] + 4 * values[..., 1] - values[..., 2]) / (2 * h)
    return np.atleast_1d(derivative)


def effective_operator(Abar: np.ndarray, grid: StripGrid) -> StripOperator:
    r"""Operator of the constant coefficient equation :math:`\mathrm{Tr}(\bar A D^2 w) = 0`."""
    return strip_operator(constant_spec(Abar), grid)
