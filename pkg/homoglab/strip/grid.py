import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from homoglab.errors import (
    IncommensurateWindow,
    InputRejection,
    ResolutionTooCoarse,
)
from homoglab.fields.coefficients import CoefficientSpec
from homoglab.fields.direction import Direction

log = logging.getLogger(__name__)

MIN_RESOLUTION = 8
DIVISIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class StripGrid:
    r"""Node layout of the strip :math:`\Sigma^r = \{0 < x\cdot n < r\}`.

    Nodes sit at ``x = t τ̂ + s n`` with ``s = j h``, ``j = 0..n_s`` and, in 2D,
    ``t = i h_t``, ``i = 0..n_t - 1`` periodic over the window ``W``. The
    tangential spacing ``h_t = W / floor(W / h)`` is the smallest spacing not
    below ``h`` that closes the window exactly.

    Attributes:
        direction: Boundary direction.
        r: Strip height.
        eps: Oscillation scale.
        h: Normal spacing.
        scale: ``"macro"`` (coefficients at ``x/eps``, drift scaled by ``1/eps``)
            or ``"micro"`` (coefficients at ``x``).
        periods: Number of lattice periods in the tangential window.
    """

    direction: Direction
    r: float
    eps: float
    h: float
    scale: str = "macro"
    periods: int = 1

    @property
    def dim(self) -> int:
        return self.direction.dim

    @property
    def cell_size(self) -> float:
        return self.eps if self.scale == "macro" else 1.0

    @property
    def window(self) -> float:
        return self.periods * self.direction.tangent_period * self.cell_size

    @property
    def n_s(self) -> int:
        return int(round(self.r / self.h))

    @property
    def n_t(self) -> int:
        if self.dim == 1:
            return 1
        return max(int(math.floor(self.window / self.h + DIVISIBILITY_TOL)), 4)

    @property
    def ht(self) -> float:
        if self.dim == 1:
            return 0.0
        return self.window / self.n_t

    @property
    def shape(self) -> Tuple[int, ...]:
        if self.dim == 1:
            return (self.n_s + 1,)
        return (self.n_t, self.n_s + 1)

    @property
    def trace_shape(self) -> Tuple[int, ...]:
        return self.shape[:-1]

    @property
    def spacings(self) -> Tuple[float, ...]:
        if self.dim == 1:
            return (self.h,)
        return (self.ht, self.h)

    @property
    def periodic(self) -> Tuple[bool, ...]:
        return (False,) if self.dim == 1 else (True, False)

    @property
    def s(self) -> np.ndarray:
        return np.arange(self.n_s + 1) * self.h

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_t) * self.ht

    def normal_coordinate(self) -> np.ndarray:
        """``s`` broadcast to the grid shape."""
        return np.broadcast_to(self.s, self.shape)

    def points(self) -> np.ndarray:
        """Physical coordinates of every node, shape ``shape + (D,)``."""
        n = self.direction.normal
        if self.dim == 1:
            return self.s[:, None] * n
        tau = self.direction.tangent
        t, s = np.meshgrid(self.t, self.s, indexing="ij")
        return t[..., None] * tau + s[..., None] * n

    def as_trace(self, data) -> np.ndarray:
        r"""Broadcasts scalar or column data to the :math:`\Sigma_0` shape."""
        values = np.asarray(data, dtype=float)
        if values.size == 1:
            return np.full(self.trace_shape, float(values.reshape(-1)[0]))
        return values.reshape(self.trace_shape)

    def matches(self, other: "StripGrid", scale: float = 1.0) -> bool:
        """True if ``other`` has the same nodes once lengths are divided by ``scale``."""
        return (
            self.shape == other.shape
            and math.isclose(self.h / scale, other.h, rel_tol=1e-12)
            and math.isclose(self.r / scale, other.r, rel_tol=1e-12)
        )


@dataclass(frozen=True, eq=False)
class StripField:
    """Grid function on a strip; ``values`` has the grid shape (t periodic, s last)."""

    grid: StripGrid
    values: np.ndarray
    role: str = "solution"
    meta: Dict[str, Any] = field(default_factory=dict)

    @cached_property
    def trace(self) -> np.ndarray:
        r"""Values on :math:`\Sigma_0`, always one-dimensional."""
        return np.atleast_1d(self.values[..., 0])

    def sup(self) -> float:
        return float(np.abs(self.values).max())

    def to_frame(self) -> pd.DataFrame:
        """Rows ``(t, s, value)``, including the closing ``t = W`` column."""
        grid = self.grid
        if grid.dim == 1:
            return pd.DataFrame(
                {"t": np.zeros(grid.n_s + 1), "s": grid.s, "value": self.values}
            )
        closed = np.concatenate([self.values, self.values[:1]], axis=0)
        t = np.append(grid.t, grid.window)
        tt, ss = np.meshgrid(t, grid.s, indexing="ij")
        return pd.DataFrame(
            {"t": tt.ravel(), "s": ss.ravel(), "value": closed.ravel()}
        )

    def trace_frame(self) -> pd.DataFrame:
        grid = self.grid
        if grid.dim == 1:
            return pd.DataFrame({"t": [0.0], "value": self.trace})
        return pd.DataFrame(
            {
                "t": np.append(grid.t, grid.window),
                "value": np.append(self.trace, self.trace[0]),
            }
        )


def build_strip_grid(
    direction: Direction,
    r: float,
    eps: float,
    resolution: Optional[int] = None,
    h: Optional[float] = None,
    scale: str = "macro",
    periods: float = 1,
    spec: Optional[CoefficientSpec] = None,
) -> StripGrid:
    r"""Builds a :class:`StripGrid` and checks its alignment guards.

    Args:
        direction: Boundary direction.
        r: Strip height.
        eps: Oscillation scale in ``(0, 1]``.
        resolution: Nodes per coefficient period; sets ``h = cell_size / resolution``.
        h: Explicit normal spacing, used when ``resolution`` is not given.
        scale: ``"macro"`` or ``"micro"``.
        periods: Lattice periods in the tangential window, a positive integer.
        spec: When given, the drift Péclet guard
            ``h <= cell_size * lambda / (2 |B|)`` is enforced.

    Raises:
        IncommensurateWindow: If ``h`` does not divide ``r`` or ``periods`` is
            not an integer.
        ResolutionTooCoarse: If there are fewer than 8 nodes per coefficient
            period or the Péclet guard fails.
    """
    if not 0 < eps <= 1:
        raise InputRejection(f"eps must lie in (0, 1], got {eps}")
    if scale not in ("macro", "micro"):
        raise InputRejection(f"Unknown grid scale {scale!r}")
    if r <= 0:
        raise InputRejection(f"Strip height must be positive, got {r}")
    cell_size = eps if scale == "macro" else 1.0
    if resolution is not None:
        if resolution < MIN_RESOLUTION:
            raise ResolutionTooCoarse(
                f"resolution {resolution} is below {MIN_RESOLUTION} nodes per period"
            )
        h = cell_size / resolution
    if h is None or h <= 0:
        raise InputRejection("Either a resolution or a positive spacing h is needed")
    if h > cell_size / MIN_RESOLUTION * (1 + DIVISIBILITY_TOL):
        raise ResolutionTooCoarse(
            f"h = {h:.6g} exceeds cell_size / {MIN_RESOLUTION} = "
            f"{cell_size / MIN_RESOLUTION:.6g}"
        )
    count = r / h
    if abs(count - round(count)) > DIVISIBILITY_TOL * max(1.0, count):
        raise IncommensurateWindow(f"h = {h:.6g} does not divide r = {r:.6g}")
    if periods < 1 or abs(periods - round(periods)) > DIVISIBILITY_TOL:
        raise IncommensurateWindow(
            f"The window must hold a whole number of lattice periods, got {periods}"
        )
    if spec is not None:
        drift = spec.drift_norm()
        if drift > 0:
            limit = cell_size * spec.lambda_min / (2 * drift)
            if h > limit * (1 + DIVISIBILITY_TOL):
                raise ResolutionTooCoarse(
                    f"h = {h:.6g} violates the Péclet guard h <= {limit:.6g} "
                    f"(|B| = {drift:.6g}, lambda = {spec.lambda_min})"
                )

    grid = StripGrid(
        direction=direction,
        r=float(r),
        eps=float(eps),
        h=float(h),
        scale=scale,
        periods=int(round(periods)),
    )
    log.debug(
        f"Strip grid {grid.shape} ({scale}, eps={eps:.6g}, h={h:.6g}, "
        f"ht={grid.ht:.6g}, window={grid.window:.6g})"
    )
    return grid


def macro_grid(direction, eps, resolution, periods=1, spec=None) -> StripGrid:
    r"""Grid of :math:`\Sigma^1` with ``h = eps / resolution``."""
    return build_strip_grid(
        direction, 1.0, eps, resolution=resolution, periods=periods, spec=spec
    )


def micro_grid(direction, eps, resolution, periods=1, spec=None) -> StripGrid:
    r"""Grid of :math:`\Sigma^{1/\varepsilon}` in microscale variables, ``h = 1/resolution``."""
    return build_strip_grid(
        direction,
        1.0 / eps,
        eps,
        resolution=resolution,
        scale="micro",
        periods=periods,
        spec=spec,
    )
