import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple, Union

import numpy as np
from einops import rearrange

from homoglab.errors import (
    AsymmetricCoefficient,
    EllipticityViolation,
    InputRejection,
)

log = logging.getLogger(__name__)

Wave = Tuple[int, ...]
Modes = Dict[Wave, np.ndarray]

VALIDATION_GRID = 64
VALIDATION_TOL = 1e-10


@dataclass(frozen=True)
class ValidationCertificate:
    """Sampled eigenvalue range of A on a uniform torus grid."""

    eigenvalue_min: float
    eigenvalue_max: float
    grid_size: int


@dataclass(frozen=True, eq=False)
class CoefficientSpec:
    r"""Periodic coefficients A, B, g on the unit torus as truncated Fourier series.

    Each mode dictionary maps an integer wave vector ``k`` to the complex
    coefficient of :math:`e^{2\pi i k\cdot y}`. Real fields are represented by
    Hermitian pairs, the coefficient at ``-k`` being the conjugate of the one at
    ``k``.

    Attributes:
        dim: Dimension D of the torus.
        a_modes: Coefficients of A, each a symmetric (D, D) complex array.
        b_modes: Coefficients of B, each a (D,) complex array.
        g_modes: Coefficients of the Neumann datum g, 0-d complex arrays.
        lambda_min: Declared lower ellipticity bound.
        lambda_max: Declared upper ellipticity bound.
        certificate: Set by :func:`build_matrix_field` once the spec is validated.
    """

    dim: int
    a_modes: Modes
    b_modes: Modes = field(default_factory=dict)
    g_modes: Modes = field(default_factory=dict)
    lambda_min: float = 1.0
    lambda_max: float = 1.0
    certificate: Optional[ValidationCertificate] = None

    @property
    def validated(self) -> bool:
        return self.certificate is not None

    def A(self, y: np.ndarray) -> np.ndarray:
        return evaluate(self.a_modes, y, (self.dim, self.dim))

    def B(self, y: np.ndarray) -> np.ndarray:
        return evaluate(self.b_modes, y, (self.dim,))

    def g(self, y: np.ndarray) -> np.ndarray:
        return evaluate(self.g_modes, y, ())

    def with_drift(self, b_modes: Modes) -> "CoefficientSpec":
        return replace(self, b_modes=dict(b_modes))

    def drift_norm(self, grid_size: int = VALIDATION_GRID) -> float:
        """Sampled sup of the Euclidean norm of B."""
        if not self.b_modes:
            return 0.0
        _, b = sample_on_torus(self, grid_size)
        return float(np.linalg.norm(b, axis=-1).max())


def evaluate(modes: Modes, y: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    r"""Evaluates a Fourier field at arbitrary points.

    Args:
        modes: Wave vector to coefficient map.
        y (np.ndarray): Points of shape (..., D).
        shape: Value shape of the field, e.g. ``(D, D)`` for a matrix field.

    Returns:
        np.ndarray: Real values of shape ``y.shape[:-1] + shape``.
    """
    y = np.asarray(y, dtype=float)
    out_shape = y.shape[:-1] + tuple(shape)
    if not modes:
        return np.zeros(out_shape)
    waves = np.array(list(modes.keys()), dtype=float)
    coeffs = np.stack(
        [np.broadcast_to(np.asarray(c, dtype=complex), shape) for c in modes.values()]
    )
    phase = np.exp(2j * np.pi * (y @ waves.T))
    values = np.tensordot(phase, coeffs, axes=([-1], [0]))
    return np.real(values).reshape(out_shape)


def torus_points(dim: int, grid_size: int) -> np.ndarray:
    """Nodes ``i/N`` of the uniform torus grid, shape ``(N,)*D + (D,)``."""
    axis = np.arange(grid_size) / grid_size
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"))
    return rearrange(mesh, "d ... -> ... d")


def sample_on_torus(
    spec: CoefficientSpec, grid_size: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Samples A and B on the uniform ``grid_size**D`` torus grid."""
    y = torus_points(spec.dim, grid_size)
    return spec.A(y), spec.B(y)


def add_real_mode(
    modes: Modes,
    wave: Wave,
    amplitude: Union[float, np.ndarray],
    phase: str = "cos",
) -> None:
    r"""Adds ``amplitude * cos(2πk·y)`` or ``amplitude * sin(2πk·y)`` in place."""
    wave = tuple(int(k) for k in wave)
    amplitude = np.asarray(amplitude, dtype=complex)
    negative = tuple(-k for k in wave)
    zero = not any(wave)
    if phase == "cos":
        plus, minus = (amplitude, None) if zero else (amplitude / 2, amplitude / 2)
    elif phase == "sin":
        if zero:
            return
        plus, minus = amplitude / 2j, -amplitude / 2j
    else:
        raise InputRejection(f"Unknown mode phase {phase!r}, expected 'cos' or 'sin'")

    modes[wave] = modes.get(wave, 0) + plus
    if minus is not None:
        modes[negative] = modes.get(negative, 0) + minus


def _check_hermitian(modes: Modes, name: str) -> None:
    for wave, coeff in modes.items():
        partner = tuple(-k for k in wave)
        other = modes.get(partner)
        if other is None:
            if np.any(np.abs(coeff) > VALIDATION_TOL):
                raise AsymmetricCoefficient(
                    f"{name} mode {wave} has no conjugate partner {partner}, "
                    "the field would not be real"
                )
            continue
        if not np.allclose(np.conj(coeff), other, atol=VALIDATION_TOL, rtol=0.0):
            raise AsymmetricCoefficient(
                f"{name} modes {wave} and {partner} are not complex conjugates"
            )


def build_matrix_field(
    spec: CoefficientSpec,
    grid_size: int = VALIDATION_GRID,
    tol: float = VALIDATION_TOL,
) -> CoefficientSpec:
    r"""Validates a coefficient spec and attaches a :class:`ValidationCertificate`.

    A is sampled on a ``grid_size**D`` torus grid; its eigenvalues must lie in
    ``[lambda_min - tol, lambda_max + tol]``.

    Raises:
        InputRejection: If A has no modes or the declared bounds are not positive.
        AsymmetricCoefficient: If some mode of A is not symmetric or a field is
            not real.
        EllipticityViolation: If a sampled eigenvalue is outside the declared bounds.
    """
    if not spec.a_modes:
        raise InputRejection("A needs at least one Fourier mode")
    if spec.lambda_min <= 0 or spec.lambda_max < spec.lambda_min:
        raise InputRejection(
            f"Ellipticity bounds must satisfy 0 < lambda <= Lambda, "
            f"got ({spec.lambda_min}, {spec.lambda_max})"
        )
    for fields_name, modes, shape in (
        ("A", spec.a_modes, (spec.dim, spec.dim)),
        ("B", spec.b_modes, (spec.dim,)),
        ("g", spec.g_modes, ()),
    ):
        for wave, coeff in modes.items():
            if len(wave) != spec.dim or np.shape(coeff) != shape:
                raise InputRejection(
                    f"{fields_name} mode {wave} does not match dimension {spec.dim}"
                )
        _check_hermitian(modes, fields_name)

    for wave, coeff in spec.a_modes.items():
        if not np.allclose(coeff, np.swapaxes(coeff, -1, -2), atol=tol, rtol=0.0):
            raise AsymmetricCoefficient(f"A mode {wave} is not a symmetric matrix")

    a, _ = sample_on_torus(spec, grid_size)
    eigenvalues = np.linalg.eigvalsh(a)
    low, high = float(eigenvalues.min()), float(eigenvalues.max())
    if low < spec.lambda_min - tol or high > spec.lambda_max + tol:
        raise EllipticityViolation(
            f"Sampled eigenvalues of A span [{low:.6g}, {high:.6g}], outside the "
            f"declared bounds [{spec.lambda_min}, {spec.lambda_max}]"
        )
    log.debug(f"Validated A on {grid_size}^{spec.dim} nodes: [{low:.6g}, {high:.6g}]")
    return replace(
        spec,
        certificate=ValidationCertificate(
            eigenvalue_min=low, eigenvalue_max=high, grid_size=grid_size
        ),
    )


def divergence_drift(spec: CoefficientSpec) -> Modes:
    r"""Spectral divergence of A, :math:`B^l_k = \sum_j 2\pi i k_j (A_{jl})_k`.

    The result is centered with respect to Lebesgue measure and, for the
    invariant measure of the resulting operator, with respect to ``m``.
    """
    b_modes = {}
    for wave, coeff in spec.a_modes.items():
        k = np.asarray(wave, dtype=float)
        vector = 2j * np.pi * (k @ np.asarray(coeff, dtype=complex))
        if np.any(vector != 0):
            b_modes[wave] = vector
    return b_modes


def lipschitz_bound(modes: Modes) -> float:
    r"""Upper bound :math:`\sum_k |c_k|\, 2\pi |k|` on the Lipschitz constant."""
    total = 0.0
    for wave, coeff in modes.items():
        total += float(np.abs(coeff).max()) * 2 * np.pi * float(np.linalg.norm(wave))
    return total


def lattice_translate(spec: CoefficientSpec, shift: Wave) -> CoefficientSpec:
    """Returns the spec of ``y -> field(y + shift)``; identical for integer shifts."""
    shift = np.asarray(shift, dtype=float)

    def move(modes):
        return {
            wave: coeff * np.exp(2j * np.pi * float(np.dot(wave, shift)))
            for wave, coeff in modes.items()
        }

    return replace(
        spec,
        a_modes=move(spec.a_modes),
        b_modes=move(spec.b_modes),
        g_modes=move(spec.g_modes),
    )


def constant_spec(matrix: np.ndarray, lambda_min=None, lambda_max=None):
    """Validated spec of a constant coefficient matrix without drift."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    eigenvalues = np.linalg.eigvalsh(matrix)
    dim = matrix.shape[0]
    spec = CoefficientSpec(
        dim=dim,
        a_modes={(0,) * dim: matrix.astype(complex)},
        lambda_min=float(eigenvalues.min()) if lambda_min is None else lambda_min,
        lambda_max=float(eigenvalues.max()) if lambda_max is None else lambda_max,
    )
    return build_matrix_field(spec, grid_size=4)

