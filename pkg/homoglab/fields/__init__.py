from .coefficients import (
    CoefficientSpec,
    ValidationCertificate,
    add_real_mode,
    build_matrix_field,
    constant_spec,
    divergence_drift,
    evaluate,
    lattice_translate,
    lipschitz_bound,
    sample_on_torus,
    torus_points,
)
from .direction import Direction
from .sampling import StripSample, sample_on_strip
from .io import Problem, ProblemFile, load_problem, parse_problem
