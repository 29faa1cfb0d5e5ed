import numpy as np
import pytest
from scipy.special import i0

from homoglab.cell import (
    PeriodicSolver,
    assemble_generator,
    center_drift,
    drift_average,
    effective_matrix,
    gradient,
    invariant_measure,
    lambda_of_Q,
    monotone_stencil,
    refinement_study,
    solve_cell,
    solve_corrector,
    stencil_matrix,
)
from homoglab.errors import Insolvable, MonotonicityUnavailable
from homoglab.fields import constant_spec, parse_problem, torus_points

DRIFT_ORACLE = 1.0 / i0(1.0) ** 2


@pytest.fixture
def layered():
    return parse_problem(
        {
            "dim": 1,
            "A": [
                {"k": [0], "matrix": [[2.0]]},
                {"k": [1], "matrix": [[1.0]], "phase": "sin"},
            ],
            "lambda": 1.0,
            "Lambda": 3.0,
        }
    ).spec


@pytest.fixture
def drift():
    """a = 1, B = V' with V(y) = cos(2 pi y)."""
    return parse_problem(
        {
            "dim": 1,
            "A": [{"k": [0], "matrix": [[1.0]]}],
            "B": [{"k": [1], "vector": [-2 * np.pi], "phase": "sin"}],
            "lambda": 1.0,
            "Lambda": 1.0,
        }
    ).spec


@pytest.fixture
def anisotropic():
    return parse_problem(
        {
            "dim": 2,
            "A": [
                {"k": [0, 0], "matrix": [[1.0, 0.0], [0.0, 1.0]]},
                {"k": [1, 0], "matrix": [[0.2, 0.0], [0.0, 0.0]]},
            ],
            "B": "div(A)",
            "lambda": 0.8,
            "Lambda": 1.2,
        }
    ).spec


def drift_measure(N):
    y = np.arange(N) / N
    return np.exp(np.cos(2 * np.pi * y)) / i0(1.0)


def test_stencil_is_monotone():
    """Test nonnegative off-center weights and zero row sums."""
    rng = np.random.default_rng(0)
    shape = (6, 5)
    a11 = rng.uniform(1.0, 2.0, shape)
    a22 = rng.uniform(1.0, 2.0, shape)
    a12 = rng.uniform(-0.4, 0.4, shape)
    A = np.stack([np.stack([a11, a12], -1), np.stack([a12, a22], -1)], -2)
    B = rng.uniform(-20, 20, shape + (2,))

    stencil = monotone_stencil(A, B, (0.1, 0.1))
    for offset, weight in stencil.weights.items():
        if any(offset):
            assert np.all(weight >= 0)
    assert np.all(stencil.center <= 0)

    matrix = stencil_matrix(stencil, shape, (True, True))
    np.testing.assert_allclose(np.asarray(matrix.sum(axis=1)).ravel(), 0.0, atol=1e-9)


def test_stencil_upwinds_strong_drift():
    A = np.ones((8, 1, 1))
    weak = monotone_stencil(A, np.full((8, 1), 1.0), (1 / 8,))
    strong = monotone_stencil(A, np.full((8, 1), 100.0), (1 / 8,))

    assert not weak.upwind.any()
    assert strong.upwind.all()
    # upwinding puts the whole drift on the forward neighbor
    np.testing.assert_allclose(strong.weights[(1,)], 64.0 + 800.0)
    np.testing.assert_allclose(strong.weights[(-1,)], 64.0)


def test_dominance_guard():
    """Test that a cross term as large as the diagonal is rejected."""
    A = np.broadcast_to(np.array([[1.0, 1.0], [1.0, 2.0]]), (4, 4, 2, 2))
    with pytest.raises(MonotonicityUnavailable, match="Cross-term dominance fails"):
        monotone_stencil(A, np.zeros((4, 4, 2)), (0.25, 0.25))


def test_generator_invariants(anisotropic):
    op = assemble_generator(anisotropic, 16)
    min_off, row_sum = op.invariant_defect()

    assert op.matrix.shape == (256, 256)
    assert min_off >= 0
    assert row_sum < 1e-8


@pytest.mark.parametrize("name", ["layered", "drift"])
def test_invariant_measure_contract(name, request):
    """Test positivity, unit mass and the adjoint residual of m."""
    spec = request.getfixturevalue(name)
    op = assemble_generator(spec, 256)
    m = invariant_measure(op)

    assert m.min() > 0
    assert m.sum() * op.h == pytest.approx(1.0, abs=1e-12)
    assert np.abs(op.matrix.T @ m.ravel()).max() <= 1e-8 * np.abs(m).max()


def test_invariant_measure_layered_closed_form(layered):
    """Test that m is proportional to 1/a for a drift-free layered medium."""
    op = assemble_generator(layered, 64)
    m = invariant_measure(op)
    a = 2 + np.sin(2 * np.pi * np.arange(64) / 64)
    expected = (1 / a) / np.sum((1 / a) / 64)

    np.testing.assert_allclose(m, expected, rtol=1e-8)


def test_invariant_measure_refinement_order(drift):
    """Test that m converges to exp(V) / I0(1) at second order."""
    errors = []
    for N in (32, 64, 128):
        m = invariant_measure(assemble_generator(drift, N))
        errors.append(np.abs(m - drift_measure(N)).max())
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))

    assert np.all(orders >= 1.5)


def test_drift_average(drift):
    op = assemble_generator(drift, 128)
    m = invariant_measure(op)
    assert np.abs(drift_average(op.B, m, op.cell_volume)).max() < 1e-8


def test_weighted_sums_over_a_2d_grid():
    """Test that the m-weighted averages contract every grid axis."""
    N = 4
    y = torus_points(2, N)
    m = 1.0 + 0.5 * np.cos(2 * np.pi * y[..., 0])
    B = np.broadcast_to([1.0, -2.0], (N, N, 2))

    np.testing.assert_allclose(drift_average(B, m, 1 / N**2), [1.0, -2.0], atol=1e-14)
    np.testing.assert_allclose(
        drift_average(B.reshape(-1, 2), m, 1 / N**2), [1.0, -2.0], atol=1e-14
    )

    matrix = np.array([[2.0, 0.3], [0.3, 1.0]])
    op = assemble_generator(constant_spec(matrix), N)
    Abar = effective_matrix(op, np.ones(op.shape), np.zeros((2,) + op.shape))
    np.testing.assert_allclose(Abar, matrix, atol=1e-14)


def test_layered_effective_coefficient(layered):
    """Test the harmonic mean oracle abar = sqrt(3)."""
    solution = solve_cell(layered, 256)
    assert solution.Abar.shape == (1, 1)
    assert solution.Abar[0, 0] == pytest.approx(np.sqrt(3.0), abs=1e-3)
    np.testing.assert_allclose(solution.chi, 0.0, atol=1e-12)


def test_drift_effective_coefficient(drift):
    """Test the Bessel oracle abar = I0(1)^-2 for B = V'."""
    solution = solve_cell(drift, 256)
    assert solution.Abar[0, 0] == pytest.approx(DRIFT_ORACLE, abs=1e-3)
    assert solution.residuals["adjoint"] <= 1e-8 * solution.m.max()
    assert solution.residuals["chi_0"] < 1e-8


def test_correctors_have_zero_mean(drift):
    op = assemble_generator(drift, 64)
    m = invariant_measure(op)
    chi, residual = solve_corrector(op, m, 0)

    assert residual < 1e-8
    assert abs(np.sum(chi * m) * op.h) < 1e-12


def test_anisotropic_effective_matrix(anisotropic):
    """Test harmonic and arithmetic means of a divergence form layered medium."""
    solution = solve_cell(anisotropic, 128)
    expected = np.diag([np.sqrt(0.96), 1.0])

    np.testing.assert_allclose(solution.Abar, expected, atol=2e-3)
    np.testing.assert_allclose(solution.Abar, solution.Abar.T)
    assert np.all(np.linalg.eigvalsh(solution.Abar) > 0)


def test_constant_coefficients_are_their_own_limit():
    matrix = np.array([[2.0, 0.3], [0.3, 1.0]])
    solution = solve_cell(constant_spec(matrix), 16)
    np.testing.assert_allclose(solution.Abar, matrix, atol=1e-12)


def test_uncentered_drift_is_insolvable():
    """Test that a constant drift is reported as insolvable, and fixed by centering."""
    spec = parse_problem(
        {
            "dim": 1,
            "A": [{"k": [0], "matrix": [[1.0]]}],
            "B": [{"k": [0], "vector": [1.0]}],
            "lambda": 1.0,
            "Lambda": 1.0,
        }
    ).spec
    with pytest.raises(Insolvable, match="Drift is not centered"):
        solve_cell(spec, 32)

    centered = center_drift(spec, 32)
    op = assemble_generator(centered, 32)
    assert np.abs(drift_average(op.B, invariant_measure(op), op.cell_volume)).max() < 1e-10
    assert solve_cell(spec, 32, center=True).Abar[0, 0] == pytest.approx(1.0, abs=1e-10)


def test_second_correctors(drift):
    """Test that second correctors solve their equation with zero m-mean."""
    solution = solve_cell(drift, 64, second_order=True)

    assert solution.chi2.shape == (1, 1, 64)
    assert solution.residuals["chi2_00"] < 1e-8
    assert abs(np.sum(solution.chi2[0, 0] * solution.m) / 64) < 1e-10


def test_periodic_solver_multiplier(drift):
    """Test that the bordered solve reports the m-mean of the right side."""
    op = assemble_generator(drift, 32)
    m = invariant_measure(op)
    u, mu, residual = PeriodicSolver(op, m).solve(np.ones(op.shape))

    assert mu == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(u, 0.0, atol=1e-10)
    assert residual < 1e-10


def test_effective_matrix_reuses_correctors(anisotropic):
    op = assemble_generator(anisotropic, 32)
    m = invariant_measure(op)
    chi = np.stack([solve_corrector(op, m, l)[0] for l in range(2)])
    Abar = effective_matrix(op, m, chi)

    np.testing.assert_allclose(Abar, solve_cell(anisotropic, 32).Abar, atol=1e-12)


def test_gradient_of_a_mode():
    y = torus_points(1, 64)[..., 0]
    grad = gradient(np.sin(2 * np.pi * y), 1 / 64)
    np.testing.assert_allclose(grad[0], 2 * np.pi * np.cos(2 * np.pi * y), atol=0.02)


def test_lambda_of_Q():
    assert lambda_of_Q(np.eye(2), np.array([[1.0, 2.0], [2.0, 3.0]])) == 4.0
    assert lambda_of_Q(np.array([[np.sqrt(3.0)]]), 2.0) == pytest.approx(2 * np.sqrt(3.0))
    with pytest.raises(ValueError, match="Q has shape"):
        lambda_of_Q(np.eye(2), np.eye(3))


def test_refinement_study(drift):
    """Test the refinement table and its observed order."""
    frame = refinement_study(drift, (32, 64, 128), oracle=[[DRIFT_ORACLE]])

    assert list(frame["N"]) == [32, 64, 128]
    assert frame["error"].is_monotonic_decreasing
    assert frame.attrs["order"] > 1.5
