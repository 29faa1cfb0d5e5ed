import numpy as np
import pytest

from homoglab.dtn import (
    check_constant_shift,
    check_domain_monotonicity,
    check_rescaling,
    closed_form_barriers,
    dtn_apply,
    global_level_bound,
    psi_cauchy,
    sandwich_defect,
    solve_phi_and_f,
)
from homoglab.errors import BoundViolation, GridMismatch, InputRejection, NegativeInput
from homoglab.fields import Direction, constant_spec
from homoglab.registry import load_registered
from homoglab.strip import macro_grid, micro_grid

SLANTED = Direction(p=2, q=3)
AXIS = Direction.axis(1)


@pytest.fixture
def laplace():
    return load_registered("laplace_2d").spec


@pytest.fixture
def drift():
    return load_registered("drift_1d").spec


@pytest.fixture
def anisotropic():
    return load_registered("anisotropic_2d").spec


def test_closed_form_barrier_endpoints():
    """Test the boundary values of both barriers."""
    barriers = closed_form_barriers(Lambda=2.0, lambda_=0.5, B_norm=0.0, C_rate=1.5)

    assert barriers.C2 == pytest.approx(1.5 / 2.0)
    assert barriers.C3 == pytest.approx(1.5 / 0.5)
    assert barriers.t_star == pytest.approx(2.5)
    assert barriers.upper(0.0) == 0.0
    assert barriers.upper(barriers.t_star) == pytest.approx(-1.0)
    assert barriers.lower(0.0) == 0.0
    assert barriers.lower(barriers.s_star) == pytest.approx(-10.0 - 1.5)
    t = np.linspace(0, barriers.t_star, 20)
    assert np.all(np.diff(barriers.upper(t)) < 0)


def test_closed_form_barriers_with_drift():
    barriers = closed_form_barriers(Lambda=1.0, lambda_=1.0, B_norm=4.0, C_rate=1.0)
    assert barriers.C2 == pytest.approx(4.4)
    assert barriers.C3 == pytest.approx(4.4)


@pytest.mark.parametrize(
    "args", [(0.0, 1.0, 0.0, 1.0), (1.0, -1.0, 0.0, 1.0), (1.0, 1.0, -1.0, 1.0), (1.0, 1.0, 0.0, 0.0)]
)
def test_closed_form_barriers_reject(args):
    with pytest.raises(InputRejection, match="Barrier inputs must be positive"):
        closed_form_barriers(*args)


@pytest.mark.parametrize("eps", [1 / 4, 1 / 8, 1 / 16])
def test_laplace_shift_function(laplace, eps):
    """Test f/eps = 1 for the Laplace equation, where phi is affine."""
    barrier = solve_phi_and_f(laplace, SLANTED, eps)

    np.testing.assert_allclose(barrier.f_eps / eps, 1.0, atol=1e-8)
    assert barrier.c1 == pytest.approx(1.0, abs=1e-8)
    assert barrier.c2 == pytest.approx(1.0, abs=1e-8)
    assert barrier.c_phi < 1e-8
    assert sandwich_defect(barrier) <= 1e-10


def test_barrier_rate_constant_is_on_the_grid(laplace):
    barrier = solve_phi_and_f(laplace, SLANTED, 0.25, resolution=16, C_rate=1.3)
    nodes = barrier.barriers.t_star / barrier.grid.h

    assert barrier.barriers.C >= 1.3
    assert nodes == pytest.approx(round(nodes), abs=1e-9)


def test_drift_shift_function(drift):
    """Test that the barrier constants of a drift problem are ordered and positive."""
    barrier = solve_phi_and_f(drift, AXIS, 0.25, resolution=16)

    assert 0.01 < barrier.c1 <= barrier.c2
    assert barrier.f_eps.shape == (1,)
    assert barrier.to_dict()["c1"] == barrier.c1


def test_macro_barrier(laplace):
    rho = solve_phi_and_f(laplace, SLANTED, 0.25).macro_barrier()

    assert rho.grid.r == pytest.approx(1.0)
    np.testing.assert_allclose(rho.values, 1.0 - rho.grid.normal_coordinate(), atol=1e-10)


def test_psi_cauchy(laplace, drift):
    """Test that psi does not depend on eps for Laplace or in 1D."""
    np.testing.assert_allclose(
        psi_cauchy(laplace, SLANTED, [1 / 4, 1 / 8, 1 / 16]), 0.0, atol=1e-9
    )
    differences = psi_cauchy(drift, AXIS, [1 / 2, 1 / 4, 1 / 8])
    assert differences.shape == (2,)
    assert np.all(differences < 1e-8)


def test_psi_cauchy_differences_shrink(anisotropic):
    """Test that psi settles as eps goes to zero for the layered 2D medium."""
    differences = psi_cauchy(anisotropic, SLANTED, [1 / 2, 1 / 4, 1 / 8, 1 / 16])

    assert differences.shape == (3,)
    assert differences[0] > 1e-8
    assert differences[-1] < differences[0]


def test_dtn_is_linear(anisotropic):
    grid = micro_grid(SLANTED, 0.25, 16, spec=anisotropic)
    rng = np.random.default_rng(0)
    u = rng.uniform(size=grid.trace_shape)
    v = rng.uniform(size=grid.trace_shape)

    np.testing.assert_allclose(
        dtn_apply(anisotropic, grid, 2 * u - v),
        2 * dtn_apply(anisotropic, grid, u) - dtn_apply(anisotropic, grid, v),
        atol=1e-8,
    )


@pytest.mark.parametrize("name", ["laplace_2d", "anisotropic_2d"])
def test_constant_shift(name):
    """Test dtn(phi + c) = dtn(phi) - c f on random data."""
    problem = load_registered(name)
    grid = micro_grid(problem.direction, 0.25, 16, spec=problem.spec)
    phi = np.random.default_rng(1).uniform(size=grid.trace_shape)

    defect = check_constant_shift(problem.spec, problem.direction, 0.25, phi, 1.7)
    assert defect <= 1e-9


@pytest.mark.parametrize("name", ["laplace_2d", "anisotropic_2d", "drift_1d"])
def test_rescaling(name):
    """Test the exact rescaling identity between matched grids."""
    problem = load_registered(name)
    resolution = problem.run.get("resolution", 16)
    macro = macro_grid(problem.direction, 0.25, resolution, spec=problem.spec)
    micro = micro_grid(problem.direction, 0.25, resolution, spec=problem.spec)
    v = np.random.default_rng(2).uniform(-1, 1, size=micro.trace_shape)

    assert check_rescaling(problem.spec, macro, micro, v) <= 1e-9


def test_rescaling_rejects_mismatched_grids(laplace):
    macro = macro_grid(SLANTED, 0.25, 16)
    with pytest.raises(GridMismatch, match="is not the eps"):
        check_rescaling(laplace, macro, micro_grid(SLANTED, 0.125, 16), 1.0)
    with pytest.raises(GridMismatch, match="Trace data has"):
        check_rescaling(laplace, macro, micro_grid(SLANTED, 0.25, 16), np.ones(3))


@pytest.mark.parametrize("name", ["laplace_2d", "anisotropic_2d", "layered_1d", "drift_1d"])
def test_domain_monotonicity(name):
    """Test that taller strips give larger dtn values on 20 nonnegative traces."""
    problem = load_registered(name)
    resolution = problem.run.get("resolution", 16)
    grid = micro_grid(problem.direction, 0.25, resolution)
    rng = np.random.default_rng(3)

    worst = min(
        check_domain_monotonicity(
            problem.spec,
            problem.direction,
            0.25,
            0.125,
            rng.uniform(0, 1, size=grid.trace_shape),
            resolution=resolution,
        )
        for _ in range(20)
    )
    assert worst >= -1e-10


def test_domain_monotonicity_guards(laplace):
    with pytest.raises(NegativeInput):
        check_domain_monotonicity(laplace, SLANTED, 0.25, 0.125, -1.0)
    with pytest.raises(InputRejection, match="Need eps2 <= eps1"):
        check_domain_monotonicity(laplace, SLANTED, 0.125, 0.25, 1.0)


@pytest.mark.parametrize("eps", [1 / 4, 1 / 8])
def test_global_level_bound(laplace, eps):
    """Test the level bound, attained by the Laplace equation with g = 1."""
    report = global_level_bound(laplace, SLANTED, eps)

    assert report.w_sup == pytest.approx(1 / eps, rel=1e-8)
    assert report.bound == pytest.approx(1 / eps, rel=1e-8)
    assert report.slack >= -1e-8


def test_global_level_bound_violation(laplace):
    with pytest.raises(BoundViolation, match="exceeds"):
        global_level_bound(laplace, SLANTED, 0.25, c1=100.0)


def test_constant_spec_has_no_datum():
    """Test that an explicit datum is used when the spec has none."""
    report = global_level_bound(constant_spec(np.eye(1)), AXIS, 0.25, g=2.0)
    assert report.g_sup == 2.0
    assert report.w_sup == pytest.approx(2.0 / 0.25)
