from .operators import dtn_apply
from .barrier import (
    BarrierProbe,
    ClosedFormBarriers,
    closed_form_barriers,
    psi_cauchy,
    sandwich_defect,
    solve_phi_and_f,
)
from .laws import (
    LevelBoundReport,
    check_constant_shift,
    check_domain_monotonicity,
    check_rescaling,
    global_level_bound,
)
