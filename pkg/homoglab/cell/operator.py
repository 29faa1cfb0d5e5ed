import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from homoglab.errors import MonotonicityUnavailable
from homoglab.fields.coefficients import CoefficientSpec, sample_on_torus

log = logging.getLogger(__name__)

DOMINANCE_MARGIN = 1e-6

Offset = Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class Stencil:
    """Nodewise weights of a monotone finite-difference stencil.

    Attributes:
        weights: Map from neighbor offset to weight array (grid shaped). The zero
            offset holds the center weight, every other weight is nonnegative and
            all weights of a node sum to zero.
        upwind: Boolean array of shape ``(D,) + grid shape``; True where the drift
            along that axis is upwinded instead of centered.
    """

    weights: Dict[Offset, np.ndarray]
    upwind: np.ndarray

    @property
    def center(self) -> np.ndarray:
        return self.weights[(0,) * self.upwind.shape[0]]


def _unit(dim: int, axis: int, step: int) -> Offset:
    offset = [0] * dim
    offset[axis] = step
    return tuple(offset)


def monotone_stencil(
    A: np.ndarray,
    B: np.ndarray,
    spacings: Sequence[float],
    drift_scale: float = 1.0,
    delta0: float = DOMINANCE_MARGIN,
) -> Stencil:
    r"""Monotone stencil of :math:`\mathrm{Tr}(A D^2 u) + s\,B\cdot\nabla u`.

    Second derivatives use central differences. Each mixed term
    :math:`2A_{ij}\partial_{ij}` is split over the diagonal pair selected by the
    sign of :math:`A_{ij}` (7-point stencil in 2D), which keeps every
    off-diagonal weight nonnegative as long as

    .. math:: A_{ii} - \sum_{j\ne i} |A_{ij}|\,h_i/h_j \ge \delta_0 .

    The drift is centered where the axis weights dominate ``|b|/(2h)`` and
    upwinded elsewhere.

    Args:
        A (np.ndarray): Diffusion samples, shape ``grid + (D, D)``.
        B (np.ndarray): Drift samples, shape ``grid + (D,)``.
        spacings: Grid spacing per axis.
        drift_scale: Factor ``s`` in front of the drift.
        delta0: Dominance margin.

    Raises:
        MonotonicityUnavailable: If the dominance condition fails at some node.
    """
    h = np.asarray(spacings, dtype=float)
    dim = h.size
    shape = A.shape[:-2]
    abs_a = np.abs(A)

    for i in range(dim):
        margin = A[..., i, i].copy()
        for j in range(dim):
            if j != i:
                margin -= abs_a[..., i, j] * h[i] / h[j]
        bad = margin < delta0
        if np.any(bad):
            raise MonotonicityUnavailable(
                f"Cross-term dominance fails on axis {i} at {int(bad.sum())} nodes "
                f"(minimum margin {margin.min():.3e} < {delta0:.0e})"
            )

    weights = defaultdict(lambda: np.zeros(shape))
    upwind = np.zeros((dim,) + shape, dtype=bool)
    for i in range(dim):
        axis_weight = A[..., i, i] / h[i] ** 2
        for j in range(dim):
            if j != i:
                axis_weight = axis_weight - abs_a[..., i, j] / (h[i] * h[j])
        b = drift_scale * B[..., i]
        central = axis_weight >= np.abs(b) / (2 * h[i])
        forward = np.where(
            central, axis_weight + b / (2 * h[i]), axis_weight + np.maximum(b, 0) / h[i]
        )
        backward = np.where(
            central, axis_weight - b / (2 * h[i]), axis_weight + np.maximum(-b, 0) / h[i]
        )
        weights[_unit(dim, i, 1)] += forward
        weights[_unit(dim, i, -1)] += backward
        upwind[i] = ~central

    for i in range(dim):
        for j in range(i + 1, dim):
            cross = A[..., i, j] / (h[i] * h[j])
            positive = np.where(cross > 0, cross, 0.0)
            negative = np.where(cross < 0, -cross, 0.0)
            plus_plus = tuple(np.add(_unit(dim, i, 1), _unit(dim, j, 1)))
            plus_minus = tuple(np.add(_unit(dim, i, 1), _unit(dim, j, -1)))
            weights[plus_plus] += positive
            weights[tuple(-k for k in plus_plus)] += positive
            weights[plus_minus] += negative
            weights[tuple(-k for k in plus_minus)] += negative

    weights = {tuple(int(k) for k in offset): w for offset, w in weights.items()}
    weights[(0,) * dim] = -sum(weights.values())
    return Stencil(weights=weights, upwind=upwind)


def stencil_matrix(
    stencil: Stencil,
    shape: Tuple[int, ...],
    periodic: Sequence[bool],
    rows: Optional[np.ndarray] = None,
) -> sp.csr_matrix:
    r"""Assembles the rows of a stencil into a sparse matrix.

    Args:
        stencil: Stencil weights on a grid of the given shape.
        shape: Grid shape; unknowns are numbered in C order.
        periodic: Per axis, whether neighbors wrap around.
        rows: Boolean mask of the rows to assemble (all by default). Rows whose
            stencil leaves a non-periodic axis must be masked out.

    Returns:
        sp.csr_matrix: ``n x n`` matrix with the selected rows filled.
    """
    n = int(np.prod(shape))
    index = np.arange(n).reshape(shape)
    if rows is None:
        rows = np.ones(shape, dtype=bool)
    row_ids, col_ids, data = [], [], []
    for offset, weight in stencil.weights.items():
        neighbor = index
        for axis, step in enumerate(offset):
            if step:
                neighbor = np.roll(neighbor, -step, axis=axis)
        mask = rows & (weight != 0)
        row_ids.append(index[mask])
        col_ids.append(neighbor[mask])
        data.append(weight[mask])
    matrix = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(row_ids), np.concatenate(col_ids))),
        shape=(n, n),
    )
    return matrix.tocsr()


@dataclass(frozen=True, eq=False)
class MonotoneOperator:
    r"""Discrete periodic generator :math:`L_h = A:D^2_h + B\cdot\nabla_h` on the torus.

    Attributes:
        dim: Dimension D.
        N: Nodes per axis, ``h = 1/N``.
        matrix: ``N**D x N**D`` sparse matrix, nodes in C order.
        upwind: Drift upwinding flags, shape ``(D,) + (N,)*D``.
        A: Diffusion samples, shape ``(N,)*D + (D, D)``.
        B: Drift samples, shape ``(N,)*D + (D,)``.
    """

    dim: int
    N: int
    matrix: sp.csr_matrix
    upwind: np.ndarray
    A: np.ndarray
    B: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def flat(self, values: np.ndarray) -> np.ndarray:
        """Flattens grid shaped (possibly vector valued) samples to ``(n, ...)``."""
        return values.reshape((-1,) + values.shape[self.dim :])

    def invariant_defect(self) -> Tuple[float, float]:
        """Most negative off-diagonal entry and largest absolute row sum."""
        off = self.matrix - sp.diags(self.matrix.diagonal())
        min_off = float(off.min()) if off.nnz else 0.0
        row_sums = np.asarray(self.matrix.sum(axis=1)).ravel()
        return min_off, float(np.abs(row_sums).max())


def assemble_generator(
    spec: CoefficientSpec, N: int, delta0: float = DOMINANCE_MARGIN
) -> MonotoneOperator:
    r"""Assembles the periodic monotone generator of ``spec`` on an ``N**D`` grid.

    Raises:
        MonotonicityUnavailable: If the cross-term dominance condition fails.
    """
    if N < 4:
        raise ValueError(f"Cell grids need at least 4 nodes per axis, got {N}")
    A, B = sample_on_torus(spec, N)
    shape = (N,) * spec.dim
    stencil = monotone_stencil(A, B, (1.0 / N,) * spec.dim, delta0=delta0)
    matrix = stencil_matrix(stencil, shape, (True,) * spec.dim)
    log.debug(
        f"Cell generator N={N}, D={spec.dim}: {matrix.nnz} nonzeros, "
        f"{int(stencil.upwind.sum())} upwinded entries"
    )
    return MonotoneOperator(
        dim=spec.dim, N=N, matrix=matrix, upwind=stencil.upwind, A=A, B=B
    )
