import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from homoglab.dtn.barrier import solve_phi_and_f
from homoglab.dtn.operators import dtn_apply
from homoglab.errors import BoundViolation, GridMismatch, InputRejection, NegativeInput
from homoglab.fields.coefficients import CoefficientSpec
from homoglab.fields.direction import Direction
from homoglab.strip.grid import StripGrid, macro_grid, micro_grid
from homoglab.strip.solver import strip_operator

log = logging.getLogger(__name__)

LEVEL_TOL = 1e-8


def check_constant_shift(
    spec: CoefficientSpec,
    direction: Direction,
    eps: float,
    phi_data,
    c: float,
    resolution: int = 16,
    periods: int = 1,
) -> float:
    r"""Defect of :math:`I^{1/\varepsilon}(\varphi + c) = I^{1/\varepsilon}(\varphi) - c f^\varepsilon`.

    Returns:
        float: ``max |dtn(phi + c) - dtn(phi) + c f|`` on the microscale grid.
    """
    grid = micro_grid(direction, eps, resolution, periods=periods, spec=spec)
    f_eps = solve_phi_and_f(spec, direction, eps, resolution, periods).f_eps
    phi_data = grid.as_trace(phi_data)
    shifted = dtn_apply(spec, grid, phi_data + c)
    base = dtn_apply(spec, grid, phi_data)
    return float(np.abs(shifted - base + c * f_eps).max())


def check_rescaling(
    spec: CoefficientSpec, macro: StripGrid, micro: StripGrid, v
) -> float:
    r"""Defect of :math:`I^1(\varepsilon v(\cdot/\varepsilon), x) = I^{1/\varepsilon}(v, x/\varepsilon)`.

    ``macro`` must be the image of ``micro`` under ``y -> eps * y``: the same
    direction, window periods and node counts, with lengths scaled by ``eps``.
    ``v`` is given on the shared :math:`\Sigma_0` nodes.

    Raises:
        GridMismatch: If the grids do not correspond node by node or ``v`` does
            not have the trace shape.
    """
    eps = macro.eps
    if (
        macro.scale != "macro"
        or micro.scale != "micro"
        or macro.direction != micro.direction
        or macro.periods != micro.periods
        or not macro.matches(micro, scale=eps)
    ):
        raise GridMismatch(
            f"Macroscale grid {macro.shape} (h={macro.h:.6g}) is not the eps={eps} "
            f"image of microscale grid {micro.shape} (h={micro.h:.6g})"
        )
    v = np.asarray(v, dtype=float)
    if v.size != 1 and v.size != int(np.prod(micro.trace_shape)):
        raise GridMismatch(
            f"Trace data has {v.size} entries, grid expects {micro.trace_shape}"
        )
    v = micro.as_trace(v)
    macro_side = dtn_apply(spec, macro, eps * v)
    micro_side = dtn_apply(spec, micro, v)
    return float(np.abs(macro_side - micro_side).max())


def check_domain_monotonicity(
    spec: CoefficientSpec,
    direction: Direction,
    eps1: float,
    eps2: float,
    u,
    resolution: int = 16,
    periods: int = 1,
) -> float:
    r"""Signed minimum of :math:`I^{1/\varepsilon_2}(u) - I^{1/\varepsilon_1}(u)` for ``u >= 0``.

    Both strips use the microscale spacing ``1 / resolution`` and share their
    :math:`\Sigma_0` nodes.

    Raises:
        NegativeInput: If ``u`` has a negative entry.
        InputRejection: If ``eps2 > eps1``.
    """
    if eps2 > eps1:
        raise InputRejection(f"Need eps2 <= eps1, got eps1={eps1}, eps2={eps2}")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise NegativeInput(f"Boundary data has minimum {u.min():.3e} < 0")
    short = micro_grid(direction, eps1, resolution, periods=periods, spec=spec)
    tall = micro_grid(direction, eps2, resolution, periods=periods, spec=spec)
    u = short.as_trace(u)
    return float(np.min(dtn_apply(spec, tall, u) - dtn_apply(spec, short, u)))


@dataclass(frozen=True)
class LevelBoundReport:
    r"""Outcome of the global level bound :math:`\|w^\varepsilon\| \le \|g\| / (c_1\varepsilon)`."""

    eps: float
    w_sup: float
    g_sup: float
    c1: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - self.w_sup


def global_level_bound(
    spec: CoefficientSpec,
    direction: Direction,
    eps: float,
    g=None,
    resolution: int = 16,
    periods: int = 1,
    c1: Optional[float] = None,
) -> LevelBoundReport:
    r"""Checks the unscaled Neumann solution against the barrier bound.

    :math:`w^\varepsilon(y) = u^\varepsilon(\varepsilon y)/\varepsilon` where
    :math:`u^\varepsilon` solves the macroscale Neumann problem with
    ``h = eps / resolution``; ``c1`` is measured on the matching microscale
    grid unless given.

    Raises:
        BoundViolation: If :math:`\|w\| > \|g\|/(c_1\varepsilon) + 10^{-8}`.
    """
    grid = macro_grid(direction, eps, resolution, periods=periods, spec=spec)
    operator = strip_operator(spec, grid)
    u = operator.solve_neumann(g)
    g_values = operator.sample.g if g is None else grid.as_trace(g)
    g_sup = float(np.abs(g_values).max())
    if c1 is None:
        c1 = solve_phi_and_f(spec, direction, eps, resolution, periods).c1
    w_sup = u.sup() / eps
    bound = g_sup / (c1 * eps)
    if w_sup > bound + LEVEL_TOL:
        raise BoundViolation(
            f"|w| = {w_sup:.10g} exceeds |g|/(c1 eps) = {bound:.10g} at eps={eps}"
        )
    log.info(f"Level bound at eps={eps:.6g}: |w| = {w_sup:.6g} <= {bound:.6g}")
    return LevelBoundReport(eps=eps, w_sup=w_sup, g_sup=g_sup, c1=c1, bound=bound)
