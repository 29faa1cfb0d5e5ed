from .operator import (
    DOMINANCE_MARGIN,
    MonotoneOperator,
    Stencil,
    assemble_generator,
    monotone_stencil,
    stencil_matrix,
)
from .measure import center_drift, drift_average, invariant_measure
from .correctors import (
    CellSolution,
    PeriodicSolver,
    effective_matrix,
    gradient,
    lambda_of_Q,
    refinement_study,
    solve_cell,
    solve_corrector,
    solve_second_corrector,
)
