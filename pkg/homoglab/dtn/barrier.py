import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from homoglab.errors import InputRejection, NonNegativityViolation
from homoglab.fields.coefficients import CoefficientSpec
from homoglab.fields.direction import Direction
from homoglab.strip.grid import StripField, StripGrid, build_strip_grid, micro_grid
from homoglab.strip.solver import normal_derivative, strip_operator

log = logging.getLogger(__name__)

S_STAR = 10.0
DRIFT_FACTOR = 1.1
NEGATIVITY_TOL = 1e-10
DEFAULT_RATE_CONSTANT = 1.0


@dataclass(frozen=True)
class ClosedFormBarriers:
    r"""Exponential barriers of the half-space comparison argument.

    ``upper(t) = a0 / C2 * (exp(C2 t) - 1)`` decreases from 0 to -1 on
    ``[0, t_star]`` and ``lower(t) = a1 / C3 * (1 - exp(-C3 t))`` decreases from
    0 to ``-10 - C`` on ``[0, s_star]``.
    """

    C: float
    C2: float
    C3: float
    t_star: float
    s_star: float
    a0: float
    a1: float

    def upper(self, t) -> np.ndarray:
        return self.a0 / self.C2 * np.expm1(self.C2 * np.asarray(t, dtype=float))

    def lower(self, t) -> np.ndarray:
        return self.a1 / self.C3 * -np.expm1(-self.C3 * np.asarray(t, dtype=float))


def closed_form_barriers(
    Lambda: float, lambda_: float, B_norm: float, C_rate: float
) -> ClosedFormBarriers:
    r"""Builds the barriers for ellipticity ``[lambda, Lambda]`` and drift bound ``B_norm``.

    ``C2 = max(C, 1.1 Lambda |B| / lambda) / Lambda`` and
    ``C3 = max(C, 1.1 |B|) / lambda``; without drift these are ``C / Lambda`` and
    ``C / lambda``. ``t_star = C + 1`` and ``s_star = 10``.

    Raises:
        InputRejection: If an ellipticity bound or ``C_rate`` is not positive or
            ``B_norm`` is negative.
    """
    if Lambda <= 0 or lambda_ <= 0 or C_rate <= 0 or B_norm < 0:
        raise InputRejection(
            f"Barrier inputs must be positive, got Lambda={Lambda}, "
            f"lambda={lambda_}, |B|={B_norm}, C={C_rate}"
        )
    C2 = max(C_rate, DRIFT_FACTOR * Lambda * B_norm / lambda_) / Lambda
    C3 = max(C_rate, DRIFT_FACTOR * B_norm) / lambda_
    t_star = C_rate + 1.0
    a0 = -C2 / math.expm1(C2 * t_star)
    a1 = C3 * (-S_STAR - C_rate) / -math.expm1(-S_STAR * C3)
    return ClosedFormBarriers(
        C=C_rate, C2=C2, C3=C3, t_star=t_star, s_star=S_STAR, a0=a0, a1=a1
    )


@dataclass(frozen=True, eq=False)
class BarrierProbe:
    r"""Barrier :math:`\varphi^\varepsilon` and shift function :math:`f^\varepsilon` at one scale.

    Attributes:
        eps: Scale.
        grid: Microscale grid of :math:`\Sigma^{1/\varepsilon}`.
        phi: Barrier, ``1/eps`` on :math:`\Sigma_0` and 0 on :math:`\Sigma_{1/\varepsilon}`.
        f_eps: :math:`-\varepsilon\,\partial_n\varphi^\varepsilon` on :math:`\Sigma_0`.
        c1: ``min(f_eps) / eps``.
        c2: ``max(f_eps) / eps``.
        psi_trace: :math:`\varphi^\varepsilon - 1/\varepsilon` on the nodes with ``s <= 1``.
        c_phi: ``max |phi - (1/eps - s)|``.
        barriers: Closed form barriers with ``t_star`` on a grid node.
    """

    eps: float
    grid: StripGrid
    phi: StripField
    f_eps: np.ndarray
    c1: float
    c2: float
    psi_trace: np.ndarray
    c_phi: float
    barriers: ClosedFormBarriers
    meta: Dict = field(default_factory=dict)

    def macro_barrier(self) -> StripField:
        r""":math:`\rho^\varepsilon = \varepsilon\varphi^\varepsilon(\cdot/\varepsilon)` on the matching macroscale grid."""
        grid = build_strip_grid(
            self.grid.direction,
            self.grid.r * self.eps,
            self.eps,
            h=self.grid.h * self.eps,
            periods=self.grid.periods,
        )
        return StripField(grid=grid, values=self.eps * self.phi.values, role="barrier")

    def to_dict(self) -> Dict:
        return {
            "eps": self.eps,
            "c1": self.c1,
            "c2": self.c2,
            "c_phi": self.c_phi,
            "f_eps": self.f_eps,
            "barriers": self.barriers,
            "sandwich_defect": sandwich_defect(self),
        }


def _snap_rate_constant(C: float, h: float) -> float:
    """Smallest ``C' >= C`` with ``C' + 1`` on the grid ``h * Z``."""
    nodes = math.ceil((C + 1.0) / h - 1e-9)
    return nodes * h - 1.0


def solve_phi_and_f(
    spec: CoefficientSpec,
    direction: Direction,
    eps: float,
    resolution: int = 16,
    periods: int = 1,
    C_rate: Optional[float] = None,
) -> BarrierProbe:
    r"""Solves for the barrier :math:`\varphi^\varepsilon` on :math:`\Sigma^{1/\varepsilon}`.

    The microscale grid has ``h = 1 / resolution``. The rate constant of the
    closed form barriers is the larger of ``C_rate`` (1 when not given) and the
    measured distance of :math:`\varphi^\varepsilon` from the affine profile
    ``1/eps - s``.

    Raises:
        NonNegativityViolation: If :math:`f^\varepsilon < -10^{-10}` somewhere or
            ``c1 <= 0``.
    """
    grid = micro_grid(direction, eps, resolution, periods=periods, spec=spec)
    phi = strip_operator(spec, grid).solve_dirichlet(top=0.0, bottom=1.0 / eps)
    phi = StripField(grid=grid, values=phi.values, role="barrier", meta=phi.meta)
    f_eps = -eps * normal_derivative(phi)
    if f_eps.min() < -NEGATIVITY_TOL:
        raise NonNegativityViolation(
            f"f^eps has minimum {f_eps.min():.3e} < -{NEGATIVITY_TOL:.0e} at eps={eps}"
        )
    c1, c2 = float(f_eps.min() / eps), float(f_eps.max() / eps)
    if c1 <= 0:
        raise NonNegativityViolation(f"c1 = {c1:.3e} is not positive at eps={eps}")

    s = grid.normal_coordinate()
    c_phi = float(np.abs(phi.values - (1.0 / eps - s)).max())
    unit = int(round(1.0 / grid.h))
    psi_trace = phi.values[..., : unit + 1] - 1.0 / eps

    C = max(DEFAULT_RATE_CONSTANT if C_rate is None else C_rate, c_phi)
    C = _snap_rate_constant(C, grid.h)
    barriers = closed_form_barriers(
        spec.lambda_max, spec.lambda_min, spec.drift_norm(), C
    )
    log.info(f"Barrier at eps={eps:.6g}: c1={c1:.6g}, c2={c2:.6g}, C={C:.6g}")
    return BarrierProbe(
        eps=float(eps),
        grid=grid,
        phi=phi,
        f_eps=f_eps,
        c1=c1,
        c2=c2,
        psi_trace=psi_trace,
        c_phi=c_phi,
        barriers=barriers,
    )


def sandwich_defect(probe: BarrierProbe) -> float:
    r"""Largest violation of ``lower(s) <= phi - 1/eps <= upper(s)``.

    The upper barrier is tested for ``s <= min(t_star, 1/eps)`` and the lower
    one for ``s <= min(s_star, 1/eps)``. Zero means the sandwich holds.
    """
    barriers = probe.barriers
    s = probe.grid.normal_coordinate()
    psi = probe.phi.values - 1.0 / probe.eps
    tol = 1e-12
    upper_nodes = s <= min(barriers.t_star, probe.grid.r) + tol
    lower_nodes = s <= min(barriers.s_star, probe.grid.r) + tol
    above = np.max((psi - barriers.upper(s))[upper_nodes], initial=0.0)
    below = np.max((barriers.lower(s) - psi)[lower_nodes], initial=0.0)
    return float(max(above, below, 0.0))


def psi_cauchy(
    spec: CoefficientSpec,
    direction: Direction,
    eps_list: Sequence[float],
    resolution: int = 16,
    periods: int = 1,
) -> np.ndarray:
    r"""Sup distances between the :math:`\psi^\varepsilon` probes of consecutive scales.

    All probes share the microscale spacing, so their :math:`\Sigma^1` nodes
    coincide.
    """
    traces = [
        solve_phi_and_f(spec, direction, eps, resolution, periods).psi_trace
        for eps in eps_list
    ]
    return np.array(
        [float(np.abs(b - a).max()) for a, b in zip(traces[:-1], traces[1:])]
    )
