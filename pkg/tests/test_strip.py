import numpy as np
import pytest

from homoglab.errors import (
    IncommensurateWindow,
    InputRejection,
    MaximumPrincipleViolation,
    ResolutionTooCoarse,
)
from homoglab.fields import Direction, constant_spec
from homoglab.registry import load_registered
from homoglab.strip import (
    StripField,
    build_strip_grid,
    effective_operator,
    macro_grid,
    max_principle_check,
    micro_grid,
    normal_derivative,
    solve_dirichlet,
    solve_neumann,
    strip_operator,
)

SLANTED = Direction(p=2, q=3)
AXIS = Direction.axis(1)


@pytest.fixture
def laplace_2d():
    return constant_spec(np.eye(2))


def test_grid_geometry():
    """Test node counts and the tangential spacing that closes the window."""
    grid = macro_grid(SLANTED, 0.25, 8)
    window = np.sqrt(13) * 0.25

    assert grid.h == pytest.approx(1 / 32)
    assert grid.window == pytest.approx(window)
    assert grid.n_t == int(np.floor(window * 32))
    assert grid.ht == pytest.approx(window / grid.n_t)
    assert grid.ht >= grid.h
    assert grid.shape == (grid.n_t, 33)
    assert grid.trace_shape == (grid.n_t,)
    assert grid.periodic == (True, False)


def test_grid_points_follow_rotated_axes():
    grid = macro_grid(SLANTED, 0.5, 8)
    points = grid.points()

    np.testing.assert_allclose(points[..., 0, :] @ grid.direction.normal, 0.0, atol=1e-14)
    np.testing.assert_allclose(points[0, :, :] @ grid.direction.normal, grid.s)
    np.testing.assert_allclose(points[3, 0] @ grid.direction.tangent, 3 * grid.ht)


def test_micro_grid_matches_macro_grid():
    macro = macro_grid(SLANTED, 0.25, 8, periods=2)
    micro = micro_grid(SLANTED, 0.25, 8, periods=2)

    assert micro.r == pytest.approx(4.0)
    assert micro.h == pytest.approx(1 / 8)
    assert macro.matches(micro, scale=0.25)
    assert not macro.matches(micro)


def test_one_dimensional_grid():
    grid = micro_grid(AXIS, 0.25, 8)
    assert grid.shape == (33,)
    assert grid.trace_shape == ()
    assert grid.ht == 0.0


@pytest.mark.parametrize(
    "kwargs, error, match",
    [
        ({"eps": 2.0, "resolution": 8}, InputRejection, "eps must lie in"),
        ({"eps": 0.5, "resolution": 4}, ResolutionTooCoarse, "below 8 nodes"),
        ({"eps": 0.5, "h": 0.1}, ResolutionTooCoarse, "exceeds cell_size"),
        ({"eps": 0.5, "h": 0.03}, IncommensurateWindow, "does not divide"),
        ({"eps": 0.5, "resolution": 8, "periods": 1.5}, IncommensurateWindow, "whole number"),
        ({"eps": 0.5, "resolution": 8, "scale": "meso"}, InputRejection, "Unknown grid scale"),
        ({"eps": 0.5}, InputRejection, "resolution or a positive spacing"),
    ],
)
def test_grid_guards(kwargs, error, match):
    with pytest.raises(error, match=match):
        build_strip_grid(SLANTED, 1.0, **kwargs)


def test_peclet_guard():
    """Test that a drift too strong for the spacing is rejected."""
    drift = load_registered("drift_1d").spec
    with pytest.raises(ResolutionTooCoarse, match="Péclet guard"):
        macro_grid(AXIS, 0.25, 8, spec=drift)
    macro_grid(AXIS, 0.25, 16, spec=drift)


@pytest.mark.parametrize("direction", [SLANTED, Direction(p=0, q=1), AXIS])
def test_dirichlet_affine_solution(direction):
    """Test that the Laplace Dirichlet solution is the affine profile 1 - s."""
    spec = constant_spec(np.eye(direction.dim))
    grid = macro_grid(direction, 0.25, 8)
    u = solve_dirichlet(spec, grid, top=0.0, bottom=1.0)

    np.testing.assert_allclose(u.values, 1.0 - grid.normal_coordinate(), atol=1e-10)
    np.testing.assert_allclose(normal_derivative(u), -1.0, atol=1e-8)
    assert u.meta["residual"] < 1e-10


@pytest.mark.parametrize("direction", [SLANTED, AXIS])
def test_neumann_affine_solution(direction):
    """Test that constant Neumann data give u = g (s - 1) and an exact trace."""
    spec = constant_spec(np.eye(direction.dim))
    grid = macro_grid(direction, 0.125, 8)
    u = solve_neumann(spec, grid, g=2.0)

    np.testing.assert_allclose(u.values, 2.0 * (grid.normal_coordinate() - 1.0), atol=1e-9)
    np.testing.assert_allclose(u.trace, -2.0, atol=1e-9)
    np.testing.assert_allclose(normal_derivative(u), 2.0, atol=1e-7)
    assert u.meta["fallback_rows"] == 0
    assert u.meta["bound_constant"] == pytest.approx(1.0, abs=1e-9)


def test_neumann_uses_sampled_datum():
    problem = load_registered("laplace_oscillatory_2d")
    grid = macro_grid(problem.direction, 0.25, 8)
    operator = strip_operator(problem.spec, grid)
    u = operator.solve_neumann()
    doubled = operator.solve_neumann(2 * operator.sample.g)

    np.testing.assert_allclose(doubled.values, 2 * u.values, atol=1e-10)
    assert u.role == "neumann"
    assert u.meta["residual"] < 1e-8


def test_operator_cache(laplace_2d):
    """Test that operators and their factorizations are shared per (spec, grid)."""
    grid = macro_grid(SLANTED, 0.25, 8)
    first = strip_operator(laplace_2d, grid)
    solver = first.dirichlet_solver

    assert strip_operator(laplace_2d, macro_grid(SLANTED, 0.25, 8)) is first
    assert first.dirichlet_solver is solver


def test_effective_operator_identity(laplace_2d):
    grid = macro_grid(SLANTED, 0.25, 8)
    data = np.linspace(0.0, 1.0, grid.n_t)
    effective = effective_operator(np.eye(2), grid).solve_dirichlet(bottom=data)
    laplace = strip_operator(laplace_2d, grid).solve_dirichlet(bottom=data)

    np.testing.assert_allclose(effective.values, laplace.values, atol=1e-12)


def test_max_principle_check(laplace_2d):
    grid = macro_grid(SLANTED, 0.25, 8)
    inside = StripField(grid=grid, values=np.full(grid.shape, 0.5))
    outside = StripField(grid=grid, values=np.full(grid.shape, 1.5))

    assert max_principle_check(inside, np.array([0.0, 1.0])) == 0.0
    with pytest.raises(MaximumPrincipleViolation, match="leaves"):
        max_principle_check(outside, np.array([0.0, 1.0]))


@pytest.mark.parametrize("name", ["laplace_oscillatory_2d", "anisotropic_2d", "drift_1d"])
def test_neumann_trace_reproduces_the_solution(name):
    """Test that the Neumann trace fed back as Dirichlet data gives the same field."""
    problem = load_registered(name)
    resolution = problem.run.get("resolution", 8)
    grid = macro_grid(problem.direction, 0.25, resolution, spec=problem.spec)

    u = solve_neumann(problem.spec, grid)
    v = solve_dirichlet(problem.spec, grid, top=0.0, bottom=u.trace)
    np.testing.assert_allclose(v.values, u.values, atol=1e-8 * max(1.0, u.sup()))


@pytest.mark.parametrize("scale", [1.0, 100.0])
def test_max_principle_check_allows_round_off(scale):
    """Test that LU sized overshoots pass and real ones fail, relative to the data."""
    grid = macro_grid(SLANTED, 0.25, 8)
    boundary = scale * np.array([0.0, 1.0])
    values = np.full(grid.shape, 0.5 * scale)

    values[2, 3] = scale * (1.0 + 1e-9)
    assert max_principle_check(StripField(grid=grid, values=values), boundary) > 0.0
    values[2, 3] = scale * (1.0 + 1e-6)
    with pytest.raises(MaximumPrincipleViolation):
        max_principle_check(StripField(grid=grid, values=values), boundary)


@pytest.mark.parametrize(
    "name", ["laplace_2d", "anisotropic_2d", "layered_1d", "divergence_layered_1d", "drift_1d"]
)
def test_comparison_of_ordered_data(name):
    """Test that ordered boundary data produce ordered solutions on 50 random pairs."""
    problem = load_registered(name)
    resolution = problem.run.get("resolution", 8)
    grid = macro_grid(problem.direction, 0.25, resolution, spec=problem.spec)
    operator = strip_operator(problem.spec, grid)
    rng = np.random.default_rng(5)

    worst = np.inf
    for _ in range(50):
        low = rng.uniform(-1.0, 1.0, size=grid.trace_shape)
        high = low + rng.uniform(0.0, 1.0, size=grid.trace_shape)
        top_low = rng.uniform(-1.0, 0.0)
        top_high = top_low + rng.uniform(0.0, 1.0)
        u = operator.solve_dirichlet(top=top_low, bottom=low)
        v = operator.solve_dirichlet(top=top_high, bottom=high)
        worst = min(worst, float((v.values - u.values).min()))
    assert worst >= -1e-10


def test_field_exports_close_the_window(laplace_2d):
    """Test that CSV exports repeat the t = 0 column at t = W."""
    grid = macro_grid(SLANTED, 0.25, 8)
    u = solve_dirichlet(laplace_2d, grid, top=0.0, bottom=np.linspace(0, 1, grid.n_t))
    frame = u.to_frame()
    trace = u.trace_frame()

    assert len(frame) == (grid.n_t + 1) * (grid.n_s + 1)
    closing = frame[np.isclose(frame["t"], grid.window)]["value"].to_numpy()
    np.testing.assert_allclose(closing, u.values[0])
    assert trace["t"].iloc[-1] == pytest.approx(grid.window)
    assert trace["value"].iloc[-1] == trace["value"].iloc[0]
