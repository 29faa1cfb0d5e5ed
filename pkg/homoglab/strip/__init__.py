from .grid import (
    MIN_RESOLUTION,
    StripField,
    StripGrid,
    build_strip_grid,
    macro_grid,
    micro_grid,
)
from .solver import (
    StripOperator,
    effective_operator,
    max_principle_check,
    normal_derivative,
    solve_dirichlet,
    solve_neumann,
    strip_operator,
)
