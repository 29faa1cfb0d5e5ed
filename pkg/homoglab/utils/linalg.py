import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, bicgstab, spilu, splu

from homoglab.errors import SolverDivergence

log = logging.getLogger(__name__)

DIRECT_LIMIT = 300_000
KRYLOV_RTOL = 1e-10
RESIDUAL_TOL = 1e-10


class SparseSolver:
    r"""Factorizes a sparse system once and solves it for many right-hand sides.

    Systems with fewer than ``DIRECT_LIMIT`` unknowns use a sparse LU
    factorization. Larger systems use BiCGStab preconditioned by an incomplete
    LU factorization with relative tolerance ``KRYLOV_RTOL``.

    Every solution is checked against the relative residual
    :math:`\|Mx - b\|_\infty \le tol\,(\|M\|_\infty \|x\|_\infty + \|b\|_\infty)`.

    Args:
        matrix: Square sparse matrix.
        residual_tol: Tolerance of the residual check.
    """

    def __init__(self, matrix: sp.spmatrix, residual_tol: float = RESIDUAL_TOL):
        self.matrix = sp.csc_matrix(matrix)
        self.residual_tol = residual_tol
        self.norm = float(abs(self.matrix).sum(axis=1).max())
        n = self.matrix.shape[0]
        self.direct = n < DIRECT_LIMIT
        if self.direct:
            log.debug(f"Sparse LU factorization of {n} unknowns")
            self._lu = splu(self.matrix)
        else:
            log.debug(f"ILU-preconditioned BiCGStab for {n} unknowns")
            ilu = spilu(self.matrix, drop_tol=1e-6, fill_factor=20)
            self._preconditioner = LinearOperator(self.matrix.shape, ilu.solve)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solves ``M x = rhs``.

        Raises:
            SolverDivergence: If the Krylov iteration fails or the residual check
                does not pass.
        """
        rhs = np.asarray(rhs, dtype=float)
        if self.direct:
            x = self._lu.solve(rhs)
        else:
            x, info = bicgstab(
                self.matrix,
                rhs,
                rtol=KRYLOV_RTOL,
                atol=0.0,
                maxiter=10 * self.matrix.shape[0],
                M=self._preconditioner,
            )
            if info != 0:
                raise SolverDivergence(f"BiCGStab stopped with info={info}")
        self.check_residual(x, rhs)
        return x

    def residual(self, x: np.ndarray, rhs: np.ndarray) -> float:
        return float(np.abs(self.matrix @ x - rhs).max())

    def check_residual(self, x: np.ndarray, rhs: np.ndarray) -> float:
        residual = self.residual(x, rhs)
        scale = self.norm * np.abs(x).max() + np.abs(rhs).max()
        if residual > self.residual_tol * max(scale, 1e-300):
            raise SolverDivergence(
                f"Residual {residual:.3e} exceeds {self.residual_tol:.1e} x {scale:.3e}"
            )
        return residual
