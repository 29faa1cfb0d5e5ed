import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from homoglab.errors import ConfigParse
from homoglab.fields.coefficients import (
    CoefficientSpec,
    add_real_mode,
    build_matrix_field,
    divergence_drift,
)
from homoglab.fields.direction import Direction

log = logging.getLogger(__name__)

Phase = Literal["cos", "sin"]


class MatrixMode(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: List[int]
    matrix: List[List[float]]
    phase: Phase = "cos"


class VectorMode(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: List[int]
    vector: List[float]
    phase: Phase = "cos"


class ScalarMode(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: List[int]
    value: float
    phase: Phase = "cos"


class DirectionEntry(BaseModel):
    """Either a rational normal ``(p, q)`` or an irrational slope and convergent."""

    model_config = ConfigDict(extra="forbid")

    p: Optional[int] = None
    q: Optional[int] = None
    slope: Optional[float] = None
    convergent: int = 4

    @model_validator(mode="after")
    def _one_form(self):
        rational = self.p is not None and self.q is not None
        if rational == (self.slope is not None):
            raise ValueError("direction needs either both 'p' and 'q' or a 'slope'")
        return self


class ProblemFile(BaseModel):
    r"""Schema of a problem definition file.

    Every mode entry is a real amplitude of ``cos(2πk·y)`` (default) or
    ``sin(2πk·y)``; a cosine entry at ``k = 0`` is a constant. ``B`` may be the
    string ``"div(A)"`` and ``g`` a plain number.
    """

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    dim: int = Field(ge=1, le=3)
    A: List[MatrixMode] = Field(min_length=1)
    B: Union[Literal["div(A)"], List[VectorMode]] = Field(default_factory=list)
    g: Union[float, List[ScalarMode]] = 0.0
    lambda_: float = Field(alias="lambda", gt=0)
    Lambda: float = Field(gt=0)
    direction: Optional[DirectionEntry] = None
    run: Dict[str, Any] = Field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Problem:
    """A validated coefficient spec together with its boundary direction."""

    spec: CoefficientSpec
    direction: Optional[Direction]
    run: Dict[str, Any] = field(default_factory=dict)


def _modes(entries, dim: int, attribute: str, shape) -> Dict:
    modes = {}
    for entry in entries:
        if len(entry.k) != dim:
            raise ConfigParse(f"Wave vector {entry.k} does not have {dim} entries")
        amplitude = np.asarray(getattr(entry, attribute), dtype=float)
        if amplitude.shape != shape:
            raise ConfigParse(
                f"Mode {entry.k} has shape {amplitude.shape}, expected {shape}"
            )
        add_real_mode(modes, tuple(entry.k), amplitude, entry.phase)
    return modes


def parse_problem(payload: Dict[str, Any]) -> Problem:
    r"""Builds a validated :class:`Problem` from a problem file payload.

    Raises:
        ConfigParse: If the payload does not match :class:`ProblemFile`.
        EllipticityViolation: If the declared ellipticity bounds are violated.
        AsymmetricCoefficient: If A is not symmetric.
    """
    try:
        parsed = ProblemFile.model_validate(payload)
    except ValidationError as e:
        raise ConfigParse(f"Invalid problem definition: {e}") from e

    dim = parsed.dim
    a_modes = _modes(parsed.A, dim, "matrix", (dim, dim))
    if parsed.B == "div(A)":
        b_modes = divergence_drift(CoefficientSpec(dim=dim, a_modes=a_modes))
    else:
        b_modes = _modes(parsed.B, dim, "vector", (dim,))
    if isinstance(parsed.g, list):
        g_modes = _modes(parsed.g, dim, "value", ())
    else:
        g_modes = {}
        add_real_mode(g_modes, (0,) * dim, parsed.g)

    spec = build_matrix_field(
        CoefficientSpec(
            dim=dim,
            a_modes=a_modes,
            b_modes=b_modes,
            g_modes=g_modes,
            lambda_min=parsed.lambda_,
            lambda_max=parsed.Lambda,
        )
    )

    if dim == 1:
        direction = Direction.axis(1)
    elif parsed.direction is None:
        direction = Direction.axis(dim) if dim == 2 else None
    elif parsed.direction.slope is not None:
        direction = Direction.from_slope(
            parsed.direction.slope, parsed.direction.convergent
        )
    else:
        direction = Direction(dim=dim, p=parsed.direction.p, q=parsed.direction.q)
    return Problem(spec=spec, direction=direction, run=dict(parsed.run))


def load_problem(source: Union[str, Path, Dict[str, Any]]) -> Problem:
    """Loads a problem from a JSON file path or an already decoded payload."""
    if isinstance(source, dict):
        return parse_problem(source)
    path = Path(source)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigParse(f"Could not read problem file {path}: {e}") from e
    log.info(f"Loaded problem definition from {path}")
    return parse_problem(payload)
