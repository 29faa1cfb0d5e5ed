import copy
import math
from enum import Enum
from typing import Any, Dict

from pydantic.dataclasses import dataclass

from homoglab.fields.io import Problem, load_problem


class ProblemFamily(Enum):
    """Enum defining the benchmark problem families.

    Attributes:
        LAPLACE: Constant identity diffusion, no drift
        LAYERED: Coefficients depending on one cell variable
        DRIFT: Unit diffusion with a centered oscillating drift
        ANISOTROPIC: Matrix valued diffusion with drift ``div(A)``
    """

    LAPLACE = 0
    LAYERED = 1
    DRIFT = 2
    ANISOTROPIC = 3


@dataclass
class ProblemEntry:
    """Specification for a registered benchmark problem.

    Attributes:
        id: Unique numeric ID assigned to this problem
        dim: Dimension of the torus
        family: ProblemFamily of the coefficients
        description: One line summary, shown by the command line front end
        payload: Problem definition in the problem file format
    """

    id: int
    dim: int
    family: ProblemFamily
    description: str
    payload: Dict[str, Any]


PROBLEM_REGISTRY: Dict[str, ProblemEntry] = {}
_ID_TO_PROBLEM: Dict[int, str] = {}


def register_problem(name: str, **kwargs: Any) -> int:
    """Register a new benchmark problem in the global registry.

    Args:
        name: Unique identifier for this problem
        **kwargs: Keyword arguments used to construct the ProblemEntry
            Must include: dim, family, description, payload

    Returns:
        int: Unique numeric ID assigned to this problem

    Raises:
        ValueError: If a problem with the given name already exists
    """
    if name in PROBLEM_REGISTRY:
        raise ValueError(f"Problem {name} already exists in registry")

    next_id = len(PROBLEM_REGISTRY) + 1
    PROBLEM_REGISTRY[name] = ProblemEntry(**kwargs, id=next_id)
    _ID_TO_PROBLEM[next_id] = name
    return next_id


def get_problem_by_id(problem_id: int) -> ProblemEntry:
    """Get a problem entry by its ID.

    Raises:
        KeyError: If no problem exists with the given ID
    """
    if problem_id not in _ID_TO_PROBLEM:
        raise KeyError(f"No problem found with ID {problem_id}")
    return PROBLEM_REGISTRY[_ID_TO_PROBLEM[problem_id]]


def load_registered(name: str) -> Problem:
    """Validated :class:`Problem` of a registered benchmark.

    Raises:
        KeyError: If no problem is registered under ``name``
    """
    if name not in PROBLEM_REGISTRY:
        raise KeyError(f"No problem registered under {name!r}")
    return load_problem(copy.deepcopy(PROBLEM_REGISTRY[name].payload))


IDENTITY_1D = [{"k": [0], "matrix": [[1.0]]}]
IDENTITY_2D = [{"k": [0, 0], "matrix": [[1.0, 0.0], [0.0, 1.0]]}]
LAYERED_1D = [
    {"k": [0], "matrix": [[2.0]]},
    {"k": [1], "matrix": [[1.0]], "phase": "sin"},
]

register_problem(
    "laplace_1d",
    dim=1,
    family=ProblemFamily.LAPLACE,
    description="u'' = 0 with g = 1",
    payload={"dim": 1, "A": IDENTITY_1D, "g": 1.0, "lambda": 1.0, "Lambda": 1.0},
)

register_problem(
    "laplace_2d",
    dim=2,
    family=ProblemFamily.LAPLACE,
    description="Laplace equation, g = 1, boundary normal (2, 3)",
    payload={
        "dim": 2,
        "A": IDENTITY_2D,
        "g": 1.0,
        "lambda": 1.0,
        "Lambda": 1.0,
        "direction": {"p": 2, "q": 3},
    },
)

register_problem(
    "laplace_oscillatory_2d",
    dim=2,
    family=ProblemFamily.LAPLACE,
    description="Laplace equation, g = 1 + cos(2 pi y1), boundary normal (2, 3)",
    payload={
        "dim": 2,
        "A": IDENTITY_2D,
        "g": [{"k": [0, 0], "value": 1.0}, {"k": [1, 0], "value": 1.0}],
        "lambda": 1.0,
        "Lambda": 1.0,
        "direction": {"p": 2, "q": 3},
        "run": {"eps": [0.25, 0.125, 0.0625, 0.03125]},
    },
)

register_problem(
    "layered_1d",
    dim=1,
    family=ProblemFamily.LAYERED,
    description="a(y) = 2 + sin(2 pi y), no drift, effective coefficient sqrt(3)",
    payload={
        "dim": 1,
        "A": LAYERED_1D,
        "B": [],
        "g": 1.0,
        "lambda": 1.0,
        "Lambda": 3.0,
        "run": {"cell": {"oracle": [[math.sqrt(3.0)]]}},
    },
)

register_problem(
    "divergence_layered_1d",
    dim=1,
    family=ProblemFamily.LAYERED,
    description="a(y) = 2 + sin(2 pi y) with drift a'(y)",
    payload={
        "dim": 1,
        "A": LAYERED_1D,
        "B": "div(A)",
        "g": 1.0,
        "lambda": 1.0,
        "Lambda": 3.0,
        "run": {"resolution": 16},
    },
)

register_problem(
    "drift_1d",
    dim=1,
    family=ProblemFamily.DRIFT,
    description="a = 1, B = V' with V = cos(2 pi y)",
    payload={
        "dim": 1,
        "A": IDENTITY_1D,
        "B": [{"k": [1], "vector": [-2 * math.pi], "phase": "sin"}],
        "g": 1.0,
        "lambda": 1.0,
        "Lambda": 1.0,
        "run": {"resolution": 16},
    },
)

register_problem(
    "anisotropic_2d",
    dim=2,
    family=ProblemFamily.ANISOTROPIC,
    description="A = Id + 0.2 cos(2 pi y1) e1 e1^T, B = div(A), boundary normal (2, 3)",
    payload={
        "dim": 2,
        "A": IDENTITY_2D
        + [{"k": [1, 0], "matrix": [[0.2, 0.0], [0.0, 0.0]]}],
        "B": "div(A)",
        "g": 1.0,
        "lambda": 0.8,
        "Lambda": 1.2,
        "direction": {"p": 2, "q": 3},
        "run": {"eps": [0.125, 0.0625, 0.03125]},
    },
)
