import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
import scipy.sparse as sp

from homoglab.cell.measure import center_drift, drift_average, invariant_measure
from homoglab.cell.operator import DOMINANCE_MARGIN, MonotoneOperator, assemble_generator
from homoglab.errors import IndefiniteEffectiveMatrix, Insolvable
from homoglab.fields.coefficients import CoefficientSpec
from homoglab.utils.fitting import fit_order
from homoglab.utils.linalg import SparseSolver

log = logging.getLogger(__name__)

CENTERING_REQUIRED = 1e-8
ORTHOGONALITY_TOL = 1e-6
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CellSolution:
    r"""Everything the cell problem produces at one resolution.

    Attributes:
        N: Nodes per axis.
        m: Invariant measure, grid shaped, ``sum(m) h^D = 1``.
        chi: Correctors, shape ``(D,) + grid``, each with zero m-weighted mean.
        Abar: Effective matrix, symmetric positive definite.
        drift_defect: :math:`\int B m`, the centering defect.
        residuals: Solver residuals keyed by solve name.
        chi2: Second correctors, shape ``(D, D) + grid``, if requested.
    """

    N: int
    m: np.ndarray
    chi: np.ndarray
    Abar: np.ndarray
    drift_defect: np.ndarray
    residuals: Dict[str, float] = field(default_factory=dict)
    chi2: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.chi.shape[0]

    def to_dict(self) -> Dict:
        payload = {
            "N": self.N,
            "dim": self.dim,
            "Abar": self.Abar,
            "drift_defect": self.drift_defect,
            "residuals": self.residuals,
            "m": self.m,
            "chi": self.chi,
        }
        if self.chi2 is not None:
            payload["chi2"] = self.chi2
        return payload


class PeriodicSolver:
    r"""Solves :math:`L_h u = f - \mu` with :math:`\sum u\, m\, h^D = 0`.

    The bordered system ``[[L, 1], [m h^D, 0]]`` is factorized once; the
    multiplier :math:`\mu = \langle f, m\rangle h^D` returned with every solution
    measures how far ``f`` is from the range of :math:`L_h`.
    """

    def __init__(self, op: MonotoneOperator, m: np.ndarray):
        self.op = op
        self.weight = op.flat(m) * op.cell_volume

    @cached_property
    def _solver(self) -> SparseSolver:
        n = self.op.matrix.shape[0]
        bordered = sp.bmat(
            [
                [self.op.matrix, sp.csr_matrix(np.ones((n, 1)))],
                [sp.csr_matrix(self.weight[None, :]), None],
            ]
        )
        return SparseSolver(bordered)

    def solve(self, rhs: np.ndarray):
        """Returns ``(u, mu, residual)`` with ``u`` grid shaped."""
        rhs = self.op.flat(rhs)
        solution = self._solver.solve(np.append(rhs, 0.0))
        u, mu = solution[:-1], float(solution[-1])
        residual = float(np.abs(self.op.matrix @ u - (rhs - mu)).max())
        return u.reshape(self.op.shape), mu, residual


def gradient(u: np.ndarray, h: float) -> np.ndarray:
    """Periodic central differences, shape ``(D,) + u.shape``."""
    return np.stack(
        [
            (np.roll(u, -1, axis=p) - np.roll(u, 1, axis=p)) / (2 * h)
            for p in range(u.ndim)
        ]
    )


def solve_corrector(
    op: MonotoneOperator,
    m: np.ndarray,
    l: int,
    solver: Optional[PeriodicSolver] = None,
):
    r"""Corrector :math:`\chi^l` with :math:`L_h\chi^l = -B^l` and zero m-mean.

    Returns:
        tuple: ``(chi, residual)``.

    Raises:
        Insolvable: If :math:`|\bar b| > 10^{-8}`, i.e. the drift is not centered.
    """
    defect = drift_average(op.B, m, op.cell_volume)
    if np.abs(defect).max() > CENTERING_REQUIRED:
        raise Insolvable(
            f"Drift is not centered: |int B m| = {np.abs(defect).max():.3e} "
            f"> {CENTERING_REQUIRED:.0e}"
        )
    solver = solver or PeriodicSolver(op, m)
    chi, _, residual = solver.solve(-op.B[..., l])
    return chi, residual


def _flux_terms(op: MonotoneOperator, chi: np.ndarray) -> np.ndarray:
    r"""Nodewise :math:`F_{mn} = A_{mn} + A_{pm}\partial_p\chi^n + A_{pn}\partial_p\chi^m + \tfrac12(B^m\chi^n + B^n\chi^m)`.

    Returns an array of shape ``grid + (D, D)``.
    """
    grads = np.stack([gradient(c, op.h) for c in chi])
    A, B = op.A, op.B
    coupling = np.einsum("...pm,np...->...mn", A, grads)
    drift = np.einsum("...m,n...->...mn", B, chi)
    return A + coupling + np.swapaxes(coupling, -1, -2) + 0.5 * (
        drift + np.swapaxes(drift, -1, -2)
    )


def effective_matrix(op: MonotoneOperator, m: np.ndarray, chi: np.ndarray) -> np.ndarray:
    r"""Effective matrix :math:`\bar A_{mn} = \sum F_{mn}\, m\, h^D`.

    Raises:
        IndefiniteEffectiveMatrix: If the symmetrized result is not positive
            definite.
    """
    flux = _flux_terms(op, chi)
    Abar = np.tensordot(m, flux, axes=m.ndim) * op.cell_volume
    asymmetry = np.abs(Abar - Abar.T).max()
    if asymmetry > SYMMETRY_TOL * max(1.0, np.abs(Abar).max()):
        log.debug(f"Effective matrix asymmetry {asymmetry:.3e} removed")
    Abar = 0.5 * (Abar + Abar.T)
    eigenvalues = np.linalg.eigvalsh(Abar)
    if eigenvalues.min() <= 0:
        raise IndefiniteEffectiveMatrix(
            f"Effective matrix has eigenvalue {eigenvalues.min():.3e}"
        )
    return Abar


def solve_second_corrector(
    op: MonotoneOperator,
    m: np.ndarray,
    chi: np.ndarray,
    Abar: np.ndarray,
    i: int,
    j: int,
    solver: Optional[PeriodicSolver] = None,
):
    r"""Second corrector :math:`\chi^{ij}` with :math:`L_h\chi^{ij} = \bar a_{ij} - F_{ij}`.

    Returns:
        tuple: ``(chi_ij, residual)``.

    Raises:
        Insolvable: If the right side is not m-orthogonal within 1e-6.
    """
    rhs = Abar[i, j] - _flux_terms(op, chi)[..., i, j]
    solver = solver or PeriodicSolver(op, m)
    chi_ij, mu, residual = solver.solve(rhs)
    if abs(mu) > ORTHOGONALITY_TOL:
        raise Insolvable(
            f"Right side of the ({i},{j}) second corrector has m-mean {mu:.3e}; "
            "Abar and chi are inconsistent"
        )
    return chi_ij, residual


def lambda_of_Q(Abar: np.ndarray, Q: np.ndarray) -> float:
    r"""Double contraction :math:`\bar a_{mn} Q_{mn}`."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    Abar = np.atleast_2d(Abar)
    if Q.shape != Abar.shape:
        raise ValueError(f"Q has shape {Q.shape}, expected {Abar.shape}")
    return float(np.sum(Abar * Q))


def solve_cell(
    spec: CoefficientSpec,
    N: int,
    second_order: bool = False,
    center: bool = False,
    delta0: float = DOMINANCE_MARGIN,
) -> CellSolution:
    r"""Runs the cell pipeline: generator, measure, correctors and :math:`\bar A`.

    Args:
        spec: Validated coefficients.
        N: Nodes per axis.
        second_order: Also compute the second correctors.
        center: Center the drift first (see :func:`center_drift`).
        delta0: Dominance margin of the stencil.
    """
    if center:
        spec = center_drift(spec, N)
    op = assemble_generator(spec, N, delta0=delta0)
    m = invariant_measure(op)
    defect = drift_average(op.B, m, op.cell_volume)
    solver = PeriodicSolver(op, m)
    residuals = {
        "adjoint": float(np.abs(op.matrix.T @ op.flat(m)).max()),
    }

    chi = np.zeros((spec.dim,) + op.shape)
    for l in range(spec.dim):
        chi[l], residuals[f"chi_{l}"] = solve_corrector(op, m, l, solver=solver)
    Abar = effective_matrix(op, m, chi)

    chi2 = None
    if second_order:
        chi2 = np.zeros((spec.dim, spec.dim) + op.shape)
        for i in range(spec.dim):
            for j in range(i, spec.dim):
                chi2[i, j], residuals[f"chi2_{i}{j}"] = solve_second_corrector(
                    op, m, chi, Abar, i, j, solver=solver
                )
                chi2[j, i] = chi2[i, j]

    log.info(f"Cell N={N}: Abar = {np.array2string(Abar, precision=8)}")
    return CellSolution(
        N=N,
        m=m,
        chi=chi,
        Abar=Abar,
        drift_defect=defect,
        residuals=residuals,
        chi2=chi2,
    )


def refinement_study(
    spec: CoefficientSpec,
    resolutions: Sequence[int] = (32, 64, 128),
    oracle: Optional[np.ndarray] = None,
    center: bool = False,
) -> pd.DataFrame:
    r"""Effective matrix across resolutions, one row per ``N``.

    With an ``oracle`` the table also holds the error ``max|Abar - oracle|`` and
    the frame attribute ``attrs["order"]`` the observed order in ``h = 1/N``.
    """
    rows = []
    for N in resolutions:
        solution = solve_cell(spec, N, center=center)
        row = {"N": N}
        for (a, b), value in np.ndenumerate(solution.Abar):
            row[f"Abar_{a}{b}"] = value
        if oracle is not None:
            row["error"] = float(np.abs(solution.Abar - np.atleast_2d(oracle)).max())
        rows.append(row)
    frame = pd.DataFrame(rows)
    if oracle is not None and len(frame) >= 3 and (frame["error"] > 1e-12).all():
        frame.attrs["order"] = fit_order(frame["error"], 1.0 / frame["N"])[0]
    return frame
