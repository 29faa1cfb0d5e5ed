import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from homoglab.errors import InputRejection


@dataclass(frozen=True)
class Direction:
    r"""Rational boundary direction with normal :math:`n = (p, q)/L`.

    In 2D the tangent is :math:`\hat\tau = (q, -p)/L` so that the lattice vector
    ``(q, -p)`` lies on the boundary line and every Z²-periodic field is
    periodic along it with period ``L = sqrt(p² + q²)``. In 1D the direction is
    the positive axis and there is no tangential variable.

    Attributes:
        dim: Dimension of the ambient space (1 or 2).
        p: First normal component, a nonnegative integer.
        q: Second normal component, a nonnegative integer coprime with ``p``.
        slope: Irrational slope that ``p/q`` approximates, if any.
    """

    dim: int = 2
    p: int = 0
    q: int = 1
    slope: Optional[float] = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InputRejection(
                f"Strip directions are available for D in (1, 2), got {self.dim}"
            )
        if self.dim == 2:
            if self.p < 0 or self.q < 0 or (self.p == 0 and self.q == 0):
                raise InputRejection(
                    f"Direction ({self.p}, {self.q}) needs nonnegative, "
                    "not both zero, components"
                )
            if math.gcd(self.p, self.q) != 1:
                raise InputRejection(
                    f"Direction ({self.p}, {self.q}) is not in lowest terms"
                )

    @classmethod
    def axis(cls, dim: int) -> "Direction":
        return cls(dim=dim, p=0, q=1)

    @classmethod
    def from_slope(cls, slope: float, index: int) -> "Direction":
        r"""Direction given by the ``index``-th convergent ``p/q`` of ``slope``.

        The normal ``(p, q)`` approximates ``(slope, 1)``.
        """
        from homoglab.quasiperiod import convergents

        p, q = convergents(slope, index + 1)[index]
        return cls(dim=2, p=p, q=q, slope=float(slope))

    @property
    def tangent_period(self) -> float:
        if self.dim == 1:
            return 0.0
        return math.hypot(self.p, self.q)

    @property
    def theta(self) -> float:
        """Angle of the normal with the first axis."""
        if self.dim == 1:
            return 0.0
        return math.atan2(self.q, self.p)

    @property
    def normal(self) -> np.ndarray:
        if self.dim == 1:
            return np.ones(1)
        return np.array([self.p, self.q], dtype=float) / self.tangent_period

    @property
    def tangent(self) -> np.ndarray:
        if self.dim == 1:
            return np.zeros(1)
        return np.array([self.q, -self.p], dtype=float) / self.tangent_period

    @property
    def lattice_period(self) -> np.ndarray:
        """Integer lattice vector spanning one tangential period."""
        return np.array([self.q, -self.p])

    @property
    def rotation(self) -> np.ndarray:
        """Orthogonal matrix whose rows are the strip axes (tangent, normal)."""
        if self.dim == 1:
            return np.ones((1, 1))
        return np.stack([self.tangent, self.normal])

    def __str__(self) -> str:
        if self.dim == 1:
            return "axis"
        return f"({self.p},{self.q})"
