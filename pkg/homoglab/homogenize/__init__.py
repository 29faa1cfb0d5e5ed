from homoglab.utils.fitting import fit_order

from .rates import RateReport, rate_study
from .sweep import (
    SweepEntry,
    SweepReport,
    effective_solution,
    holder_exponent,
    interior_defect,
    richardson,
    run_sweep,
)
