import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from homoglab.dtn.barrier import solve_phi_and_f
from homoglab.errors import DegenerateFit, InputRejection, OscillationNotDecaying
from homoglab.fields.coefficients import CoefficientSpec
from homoglab.fields.direction import Direction
from homoglab.homogenize.rates import RateReport
from homoglab.strip.grid import StripField, StripGrid, macro_grid
from homoglab.strip.solver import strip_operator
from homoglab.utils.fitting import fit_order

log = logging.getLogger(__name__)

DECAY_SLACK = 1e-3
PAIR_TOL = 0.05


@dataclass(frozen=True, eq=False)
class SweepEntry:
    r"""Neumann solve at one scale.

    Attributes:
        eps: Scale.
        trace: :math:`v^\varepsilon` on the :math:`\Sigma_0` nodes.
        t: Tangential coordinates of the trace nodes.
        mean: Mean of the trace.
        osc: ``max(trace) - min(trace)``.
        u_sup: :math:`\|u^\varepsilon\|_\infty`.
        bound_constant: :math:`\|u^\varepsilon\| / \|g\|`.
        ishii_defect: :math:`\|v^\varepsilon - v^\varepsilon(0)\|_\infty`.
        c1: Lower barrier constant at this scale.
        c2: Upper barrier constant at this scale.
        holder: Fitted oscillation exponent of the trace, if measurable.
        fallback_rows: Neumann rows that used the first-order difference.
    """

    eps: float
    trace: np.ndarray
    t: np.ndarray
    mean: float
    osc: float
    u_sup: float
    bound_constant: float
    ishii_defect: float
    c1: float
    c2: float
    holder: Optional[float]
    fallback_rows: int
    solution: Optional[StripField] = field(default=None, repr=False)

    def to_dict(self) -> Dict:
        return {
            "eps": self.eps,
            "mean": self.mean,
            "osc": self.osc,
            "u_sup": self.u_sup,
            "bound_constant": self.bound_constant,
            "ishii_defect": self.ishii_defect,
            "c1": self.c1,
            "c2": self.c2,
            "holder": self.holder,
            "fallback_rows": self.fallback_rows,
            "trace": self.trace,
        }


@dataclass(frozen=True, eq=False)
class SweepReport:
    r"""Outcome of an ``eps`` sweep of the oscillating Neumann problem.

    ``gbar`` is ``-cbar`` by definition. ``diagnostics`` holds the named
    checks that failed without stopping the sweep.
    """

    eps_list: List[float]
    entries: List[SweepEntry]
    cbar: float
    gbar: float
    richardson_pairs: List[float]
    pair_agreement: Optional[float]
    interior_defect: float
    interior_bound: float
    diagnostics: List[Dict] = field(default_factory=list)
    effective_matrix: Optional[np.ndarray] = None
    rates: Optional[RateReport] = None

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {k: v for k, v in entry.to_dict().items() if k != "trace"}
            for entry in self.entries
        ]
        return pd.DataFrame(rows)

    def to_dict(self) -> Dict:
        payload = {
            "eps_list": self.eps_list,
            "entries": [entry.to_dict() for entry in self.entries],
            "cbar": self.cbar,
            "gbar": self.gbar,
            "richardson_pairs": self.richardson_pairs,
            "pair_agreement": self.pair_agreement,
            "interior_defect": self.interior_defect,
            "interior_bound": self.interior_bound,
            "diagnostics": self.diagnostics,
            "effective_matrix": self.effective_matrix,
        }
        if self.rates is not None:
            payload["rates"] = self.rates.to_dict()
        return payload


def holder_exponent(
    trace: np.ndarray, spacing: float, radii: Sequence[float]
) -> float:
    r"""Fits ``osc(B_rho) ~ rho^gamma`` on a periodic trace.

    The oscillation over balls of radius ``rho`` is the largest range of the
    trace over any periodic window of ``2k + 1`` nodes, ``k = max(1, round(rho / spacing))``.

    Raises:
        DegenerateFit: If fewer than three radii are given or the trace is flat.
    """
    trace = np.asarray(trace, dtype=float).ravel()
    oscillations = []
    for rho in radii:
        k = max(1, int(round(rho / spacing)))
        k = min(k, (trace.size - 1) // 2)
        if k < 1:
            raise DegenerateFit(f"Trace of {trace.size} nodes has no window of radius {rho}")
        padded = np.pad(trace, k, mode="wrap")
        windows = np.lib.stride_tricks.sliding_window_view(padded, 2 * k + 1)
        oscillations.append(float(np.max(windows.max(axis=-1) - windows.min(axis=-1))))
    gamma, _, _ = fit_order(oscillations, radii)
    return gamma


def effective_solution(cbar: float, grid: StripGrid) -> StripField:
    r"""Homogenized profile :math:`\bar u = \bar c\,(1 - x\cdot n)` on ``grid``."""
    values = cbar * (1.0 - grid.normal_coordinate())
    return StripField(grid=grid, values=np.array(values), role="effective")


def interior_defect(u: StripField, cbar: float) -> float:
    return float(np.abs(u.values - effective_solution(cbar, u.grid).values).max())


def richardson(eps_a: float, mean_a: float, eps_b: float, mean_b: float) -> float:
    r"""First-order extrapolation to ``eps = 0`` through two ``(eps, mean)`` points."""
    return (eps_a * mean_b - eps_b * mean_a) / (eps_a - eps_b)


def _solve_entry(spec, direction, eps, resolution, periods, radii, keep_solution):
    grid = macro_grid(direction, eps, resolution, periods=periods, spec=spec)
    u = strip_operator(spec, grid).solve_neumann()
    trace = u.trace
    probe = solve_phi_and_f(spec, direction, eps, resolution, periods)
    holder = None
    if grid.dim == 2 and radii:
        try:
            holder = holder_exponent(trace, grid.ht, [r * eps for r in radii])
        except DegenerateFit:
            holder = None
    return SweepEntry(
        eps=eps,
        trace=trace,
        t=grid.t if grid.dim == 2 else np.zeros(1),
        mean=float(trace.mean()),
        osc=float(trace.max() - trace.min()),
        u_sup=u.sup(),
        bound_constant=u.meta["bound_constant"],
        ishii_defect=float(np.abs(trace - trace[0]).max()),
        c1=probe.c1,
        c2=probe.c2,
        holder=holder,
        fallback_rows=u.meta["fallback_rows"],
        solution=u if keep_solution else None,
    )


def run_sweep(
    spec: CoefficientSpec,
    direction: Direction,
    eps_list: Sequence[float],
    resolution: int = 8,
    periods: int = 1,
    rates: Optional[RateReport] = None,
    radii: Sequence[float] = (0.5, 1.0, 2.0),
    workers: int = 1,
    progress: bool = False,
) -> SweepReport:
    r"""Solves the oscillating Neumann problem across ``eps_list`` and extracts :math:`\bar c`.

    :math:`\bar c` is the first-order Richardson extrapolation of the trace means
    over the two finest scales and is clipped to the range of the finest trace.
    Oscillation growth beyond ``1e-3`` between consecutive scales and a failed
    interior limit check are logged and recorded as diagnostics.

    Args:
        spec: Validated coefficients with centered drift.
        direction: Boundary direction.
        eps_list: Strictly decreasing scales.
        resolution: Nodes per cell period, ``h = eps / resolution``.
        periods: Lattice periods in the tangential window.
        rates: Rate study whose constant bounds the interior error; without it
            the Richardson slope is used.
        radii: Ball radii, in cell units, of the Hölder fit.
        workers: Threads solving different scales concurrently.
        progress: Show a progress bar.

    Raises:
        InputRejection: If ``eps_list`` is empty or not strictly decreasing.
    """
    eps_list = [float(eps) for eps in eps_list]
    if not eps_list or any(b >= a for a, b in zip(eps_list[:-1], eps_list[1:])):
        raise InputRejection(f"eps_list must be strictly decreasing, got {eps_list}")

    def solve(eps):
        return _solve_entry(
            spec, direction, eps, resolution, periods, radii, eps == eps_list[-1]
        )

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        entries = list(
            tqdm(
                pool.map(solve, eps_list),
                total=len(eps_list),
                desc="sweep",
                disable=not progress,
            )
        )

    diagnostics = []
    for coarse, fine in zip(entries[:-1], entries[1:]):
        if fine.osc > coarse.osc + DECAY_SLACK:
            message = (
                f"osc(v) grew from {coarse.osc:.6g} at eps={coarse.eps:.6g} "
                f"to {fine.osc:.6g} at eps={fine.eps:.6g}"
            )
            log.warning(message)
            diagnostics.append(
                {"name": OscillationNotDecaying.__name__, "message": message}
            )

    pairs = [
        richardson(a.eps, a.mean, b.eps, b.mean)
        for a, b in zip(entries[:-1], entries[1:])
    ]
    finest = entries[-1]
    cbar = pairs[-1] if pairs else finest.mean
    pair_agreement = None
    if len(pairs) >= 2:
        pair_agreement = abs(pairs[-1] - pairs[-2]) / max(abs(pairs[-1]), 1e-300)
        if pair_agreement > PAIR_TOL:
            log.warning(f"Richardson pairs disagree by {100 * pair_agreement:.2f}%")
    low, high = float(finest.trace.min()), float(finest.trace.max())
    if not low <= cbar <= high:
        log.warning(
            f"Extrapolated cbar={cbar:.10g} clipped to the finest trace range "
            f"[{low:.10g}, {high:.10g}]"
        )
        cbar = float(np.clip(cbar, low, high))

    if rates is not None:
        rate_bound = rates.C * finest.eps
    elif len(entries) >= 2:
        slope = (entries[-2].mean - finest.mean) / (entries[-2].eps - finest.eps)
        rate_bound = abs(slope) * finest.eps
    else:
        rate_bound = 0.0
    defect = interior_defect(finest.solution, cbar)
    bound = finest.osc + rate_bound
    if defect > bound + 1e-10:
        message = (
            f"Interior limit defect {defect:.6g} exceeds osc + rate bound {bound:.6g} "
            f"at eps={finest.eps:.6g}"
        )
        log.warning(message)
        diagnostics.append({"name": "InteriorLimit", "message": message})

    log.info(f"Sweep over {len(entries)} scales: cbar={cbar:.10g}, gbar={-cbar:.10g}")
    return SweepReport(
        eps_list=eps_list,
        entries=entries,
        cbar=float(cbar),
        gbar=float(-cbar),
        richardson_pairs=[float(p) for p in pairs],
        pair_agreement=pair_agreement,
        interior_defect=defect,
        interior_bound=bound,
        diagnostics=diagnostics,
        effective_matrix=None if rates is None else rates.Abar,
        rates=rates,
    )
