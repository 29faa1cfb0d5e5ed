"""Continued fractions and almost periods of an irrational boundary line."""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from homoglab.errors import InputRejection, RationalSlope, SearchExhausted
from homoglab.fields.direction import Direction
from homoglab.strip.grid import StripField
from homoglab.utils.fitting import fit_order

log = logging.getLogger(__name__)

MAX_DENOMINATOR = 10**6
SCAN_BUDGET = 10**7
TIE_TOL = 1e-12


def continued_fraction(slope: float, count: int) -> List[int]:
    r"""First ``count`` partial quotients of ``slope`` (fewer if its float expansion ends).

    Raises:
        RationalSlope: If ``slope`` equals a fraction with denominator at most
            :math:`10^6` to machine precision.
        InputRejection: If ``slope`` is not a positive finite number.
    """
    if not math.isfinite(slope) or slope <= 0:
        raise InputRejection(f"Slope must be positive and finite, got {slope}")
    nearest = Fraction(slope).limit_denominator(MAX_DENOMINATOR)
    if abs(float(nearest) - slope) <= 4 * np.finfo(float).eps * max(1.0, slope):
        raise RationalSlope(
            f"Slope {slope!r} equals {nearest.numerator}/{nearest.denominator}"
        )
    quotients = []
    x = Fraction(slope)
    while len(quotients) < count:
        a = math.floor(x)
        quotients.append(int(a))
        remainder = x - a
        if remainder == 0:
            break
        x = 1 / remainder
    return quotients


def convergents(slope: float, count: int) -> List[Tuple[int, int]]:
    r"""Continued-fraction convergents ``(p, q)`` of ``slope``, in lowest terms.

    Built with the continuant recurrence :math:`p_k = a_k p_{k-1} + p_{k-2}`.

    Raises:
        RationalSlope: See :func:`continued_fraction`.
    """
    p_prev, p = 0, 1
    q_prev, q = 1, 0
    out = []
    for a in continued_fraction(slope, count):
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        out.append((p, q))
    return out


@dataclass(frozen=True)
class AlmostPeriod:
    r"""A point of :math:`\Sigma_0` that lies within ``rho`` of the lattice.

    Attributes:
        tau: Signed offset along the tangent (2D) or distance from the origin
            within the plane (3D).
        tau_vector: The point itself.
        rho: Its distance from the lattice.
        search_radius: Radius of the window that was scanned around ``z``.
        hat_tau: Nearest lattice point.
        hat_z: ``hat_tau - tau_vector``, orthogonal to the boundary.
    """

    tau: float
    tau_vector: np.ndarray
    rho: float
    search_radius: float
    hat_tau: np.ndarray
    hat_z: np.ndarray


def _true_normal(direction: Direction) -> np.ndarray:
    if direction.slope is None:
        return direction.normal
    normal = np.array([direction.slope, 1.0])
    return normal / np.linalg.norm(normal)


def search_radius(direction: Direction, rho: float) -> float:
    r"""Radius :math:`R(\rho)` within which every ball on :math:`\Sigma_0` holds an almost period.

    For an irrational slope it is ``(q_k + q_{k+1}) / n_2`` with ``k`` the
    first convergent whose successor satisfies ``1 / q_{k+1} <= rho``. For a
    rational direction it is the lattice period ``L``.
    """
    if not 0 < rho < 0.5:
        raise InputRejection(f"rho must lie in (0, 1/2), got {rho}")
    if direction.dim != 2:
        raise InputRejection("search_radius is defined for 2D directions")
    if direction.slope is None:
        return direction.tangent_period
    n2 = _true_normal(direction)[1]
    count = 4
    while True:
        qs = [q for _, q in convergents(direction.slope, count)]
        for k in range(len(qs) - 1):
            if 1.0 / qs[k + 1] <= rho:
                return (qs[k] + qs[k + 1]) / n2
        if len(qs) < count:
            raise SearchExhausted(
                f"Slope {direction.slope} has no convergent with 1/q <= {rho}"
            )
        count *= 2


def _scan_line(normal, z, radius, rho):
    """Lattice points within ``rho`` of the line, projected into ``[z - R, z + R]``."""
    n1, n2 = normal
    tau = np.array([n2, -n1])
    swap = abs(n2) < abs(n1)
    if swap:
        n1, n2 = n2, n1
    # free coordinate a runs over the projection window, b is solved for
    lead = tau[1] if swap else tau[0]
    ends = sorted([(z - radius) * lead, (z + radius) * lead])
    a = np.arange(math.floor(ends[0]) - 1, math.ceil(ends[1]) + 2)
    low = np.ceil((-a * n1 - rho) / n2)
    high = np.floor((-a * n1 + rho) / n2)
    points = []
    for shift in range(int(np.max(high - low, initial=0)) + 1):
        b = low + shift
        valid = b <= high
        pair = np.stack([a[valid], b[valid]], axis=-1)
        points.append(pair[:, ::-1] if swap else pair)
    points = np.concatenate(points) if points else np.zeros((0, 2))
    return points, a.size


def _choose(candidates, positions, z):
    """Nearest candidate to ``z``, excluding the trivial translation; ties go positive."""
    keep = np.any(candidates != 0, axis=-1)
    if candidates.size == 0 or not np.any(keep):
        return None
    candidates, positions = candidates[keep], positions[keep]
    distance = np.abs(positions - z)
    best = distance.min()
    ties = np.flatnonzero(distance <= best + TIE_TOL)
    return ties[np.argmax(positions[ties])], candidates, positions


def find_almost_period(
    direction: Union[Direction, np.ndarray],
    z=0.0,
    rho: float = 0.1,
    budget: int = SCAN_BUDGET,
) -> AlmostPeriod:
    r"""Almost period of :math:`\Sigma_0` nearest to ``z``.

    In 2D the lattice points within ``rho`` of the boundary line are scanned in a
    window around ``z`` starting from :math:`R(\rho)`, doubling until a hit
    other than the origin is found. For a rational direction ``z`` is first
    reduced modulo the lattice period ``L`` and the period is added back, so
    shifting ``z`` by ``L`` shifts ``tau`` by ``L``. ``direction`` may carry an
    irrational slope, in which case the line through the true normal
    ``(slope, 1)`` is used. A unit normal given as an array of length 3 selects
    plain lattice enumeration in a ball around ``z`` (a point of the plane).

    Raises:
        InputRejection: If ``rho`` is outside ``(0, 1/2)``.
        SearchExhausted: If more than ``budget`` lattice points are scanned.
    """
    if not 0 < rho < 0.5:
        raise InputRejection(f"rho must lie in (0, 1/2), got {rho}")
    if not isinstance(direction, Direction):
        return _find_in_plane(np.asarray(direction, dtype=float), z, rho, budget)
    if direction.dim != 2:
        raise InputRejection("Almost periods need a boundary of dimension at least 1")

    normal = _true_normal(direction)
    tangent = np.array([normal[1], -normal[0]])
    z = float(z)
    periods = 0
    if direction.slope is None:
        periods = round(z / direction.tangent_period)
        z -= periods * direction.tangent_period
    radius = search_radius(direction, rho) + 1.0
    scanned = 0
    while True:
        candidates, count = _scan_line(normal, z, radius, rho)
        scanned += count
        if candidates.size:
            positions = candidates @ tangent
            inside = np.abs(positions - z) <= radius
            candidates, positions = candidates[inside], positions[inside]
            chosen = _choose(candidates, positions, z)
            if chosen is not None:
                index, candidates, positions = chosen
                break
        if scanned > budget:
            raise SearchExhausted(
                f"No almost period within rho={rho} after scanning {scanned} "
                f"lattice columns (direction {direction})"
            )
        radius *= 2

    hat_tau = (candidates[index] + periods * direction.lattice_period).astype(float)
    tau = float(positions[index]) + periods * direction.tangent_period
    tau_vector = tau * tangent
    hat_z = hat_tau - tau_vector
    log.debug(f"Almost period tau={tau:.6g} at distance {np.linalg.norm(hat_z):.3e}")
    return AlmostPeriod(
        tau=tau,
        tau_vector=tau_vector,
        rho=float(np.linalg.norm(hat_z)),
        search_radius=radius,
        hat_tau=hat_tau,
        hat_z=hat_z,
    )


def _find_in_plane(normal, z, rho, budget) -> AlmostPeriod:
    if normal.shape != (3,):
        raise InputRejection(f"Lattice enumeration expects a 3D normal, got {normal}")
    normal = normal / np.linalg.norm(normal)
    z = np.zeros(3) if np.ndim(z) == 0 else np.asarray(z, dtype=float)
    radius = 1.0
    while True:
        span = int(math.ceil(radius)) + 1
        count = (2 * span + 1) ** 3
        if count > budget:
            raise SearchExhausted(
                f"Lattice enumeration of {count} points exceeds budget {budget}"
            )
        axis = np.arange(-span, span + 1)
        centre = np.round(z).astype(int)
        grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
        points = grid + centre
        offset = points @ normal
        feet = points - offset[:, None] * normal
        near = (np.abs(offset) <= rho) & (np.linalg.norm(feet - z, axis=-1) <= radius)
        near &= np.any(points != 0, axis=-1)
        if np.any(near):
            distance = np.linalg.norm(feet[near] - z, axis=-1)
            index = int(np.argmin(distance))
            hat_tau = points[near][index].astype(float)
            tau_vector = feet[near][index]
            return AlmostPeriod(
                tau=float(np.linalg.norm(tau_vector)),
                tau_vector=tau_vector,
                rho=float(abs(offset[near][index])),
                search_radius=radius,
                hat_tau=hat_tau,
                hat_z=hat_tau - tau_vector,
            )
        radius *= 2


def translation_defect(
    w_trace: Union[StripField, np.ndarray],
    tau: float,
    window: Optional[float] = None,
) -> float:
    r"""Sup over the nodes of :math:`|w(t + \tau) - w(t)|` on a periodic trace.

    Off-grid values come from a periodic cubic spline through the trace. ``tau``
    is reduced modulo the window.

    Args:
        w_trace: A strip field (its :math:`\Sigma_0` trace is used) or the trace
            values on ``n`` equispaced nodes of ``[0, window)``.
        tau: Translation.
        window: Period of the trace; taken from the field's grid if omitted.
    """
    if isinstance(w_trace, StripField):
        window = w_trace.grid.window if window is None else window
        w_trace = w_trace.trace
    values = np.asarray(w_trace, dtype=float).ravel()
    if values.size < 2:
        return 0.0
    if window is None or window <= 0:
        raise InputRejection("translation_defect needs a positive window")
    t = np.arange(values.size) * (window / values.size)
    spline = CubicSpline(
        np.append(t, window), np.append(values, values[0]), bc_type="periodic"
    )
    shifted = spline(np.mod(t + np.mod(tau, window), window))
    return float(np.abs(shifted - values).max())


def fit_defect_law(
    rhos: Sequence[float], defects: Sequence[float], eps: float
) -> Tuple[float, float]:
    r"""Fits ``defect = C (rho^gamma + rho^gamma / eps)``.

    Returns:
        tuple: ``(C, gamma)``.

    Raises:
        DegenerateFit: Fewer than three points or a vanishing defect.
    """
    gamma, intercept, _ = fit_order(defects, rhos)
    C = math.exp(intercept) / (1.0 + 1.0 / eps)
    return C, gamma
