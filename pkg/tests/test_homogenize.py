import numpy as np
import pytest

from homoglab.errors import DegenerateFit, InputRejection
from homoglab.fields import Direction
from homoglab.homogenize import (
    effective_solution,
    holder_exponent,
    rate_study,
    richardson,
    run_sweep,
)
from homoglab.registry import load_registered
from homoglab.strip import macro_grid

EPS_LIST = [0.25, 0.125, 0.0625]


@pytest.fixture
def laplace():
    return load_registered("laplace_2d")


@pytest.fixture
def oscillatory():
    return load_registered("laplace_oscillatory_2d")


def test_laplace_sweep(laplace):
    """Test gbar = 1 for the Laplace equation with g = 1."""
    report = run_sweep(laplace.spec, laplace.direction, EPS_LIST)

    assert report.gbar == pytest.approx(1.0, abs=1e-8)
    assert report.cbar == -report.gbar
    assert report.diagnostics == []
    assert report.interior_defect < 1e-8
    for entry in report.entries:
        assert entry.mean == pytest.approx(-1.0, abs=1e-9)
        assert entry.osc < 1e-9
        assert entry.fallback_rows == 0
        assert entry.c1 == pytest.approx(1.0, abs=1e-8)


def test_oscillatory_sweep(oscillatory):
    """Test that the trace oscillation decays with eps and the limit is the mean datum."""
    report = run_sweep(oscillatory.spec, oscillatory.direction, EPS_LIST, workers=2)
    osc = [entry.osc for entry in report.entries]

    assert osc[0] > 1e-3
    assert all(fine < coarse for coarse, fine in zip(osc[:-1], osc[1:]))
    assert osc[-1] == pytest.approx(osc[0] / 4, rel=0.05)
    assert report.gbar == pytest.approx(1.0, abs=1e-6)
    assert report.pair_agreement < 0.05
    assert report.diagnostics == []
    assert report.interior_defect <= report.interior_bound


def test_sweep_report_exports(oscillatory):
    report = run_sweep(oscillatory.spec, oscillatory.direction, EPS_LIST[:2])
    frame = report.to_frame()
    payload = report.to_dict()

    assert list(frame["eps"]) == EPS_LIST[:2]
    assert "trace" not in frame.columns
    assert payload["gbar"] == report.gbar
    assert len(payload["richardson_pairs"]) == 1
    assert payload["pair_agreement"] is None
    assert report.entries[-1].solution is not None
    assert report.entries[0].solution is None


@pytest.mark.parametrize("eps_list", [[], [0.125, 0.25], [0.25, 0.25]])
def test_sweep_needs_decreasing_scales(laplace, eps_list):
    with pytest.raises(InputRejection, match="strictly decreasing"):
        run_sweep(laplace.spec, laplace.direction, eps_list)


def test_sweep_carries_rate_study(laplace):
    rates = rate_study(laplace.spec, laplace.direction, EPS_LIST[:2], cell_resolution=16)
    report = run_sweep(laplace.spec, laplace.direction, EPS_LIST[:2], rates=rates)

    np.testing.assert_allclose(report.effective_matrix, np.eye(2), atol=1e-10)
    assert report.to_dict()["rates"]["status"] == "degenerate-exact"


def test_holder_exponent_of_a_smooth_trace():
    """Test that a smooth trace oscillates linearly on small balls."""
    t = np.arange(1000) / 1000
    trace = np.sin(2 * np.pi * t)
    assert holder_exponent(trace, 1e-3, [0.01, 0.02, 0.04]) == pytest.approx(1.0, abs=0.05)


def test_holder_exponent_degenerate():
    with pytest.raises(DegenerateFit):
        holder_exponent(np.ones(100), 0.01, [0.01, 0.02, 0.04])
    with pytest.raises(DegenerateFit):
        holder_exponent(np.ones(2), 0.01, [0.01, 0.02, 0.04])


def test_richardson():
    """Test that first-order extrapolation is exact on a linear law."""
    assert richardson(0.2, 1.2, 0.1, 1.1) == pytest.approx(1.0)
    assert richardson(0.5, 3.0, 0.25, 3.0) == pytest.approx(3.0)


def test_effective_solution():
    grid = macro_grid(Direction(p=2, q=3), 0.25, 8)
    w = effective_solution(-2.0, grid)

    assert w.role == "effective"
    np.testing.assert_allclose(w.trace, -2.0)
    np.testing.assert_allclose(w.values[..., -1], 0.0, atol=1e-12)


def test_rate_study_is_exact_for_constant_coefficients(laplace):
    report = rate_study(
        laplace.spec, laplace.direction, EPS_LIST, refine=True, cell_resolution=16
    )

    assert report.degenerate
    assert report.status == "degenerate-exact"
    assert report.order is None
    assert {"refined_error", "relative_change"} <= set(report.table.columns)
    assert report.table["error"].max() < 1e-9


def test_rate_study_anisotropic():
    """Test an O(eps) Dirichlet error for the layered divergence form medium."""
    problem = load_registered("anisotropic_2d")
    eps_list = [1 / 8, 1 / 16, 1 / 32]
    report = rate_study(problem.spec, problem.direction, eps_list, resolution=8, refine=True)

    assert not report.degenerate
    assert report.status == "fitted"
    assert report.order >= 0.8
    assert report.table["error"].is_monotonic_decreasing
    assert (report.table["relative_change"] < 0.2).all()
    assert report.C >= report.table["error"].max() / eps_list[0]


def test_rate_study_with_callable_data(laplace):
    report = rate_study(
        laplace.spec,
        laplace.direction,
        EPS_LIST[:1],
        data=lambda x: np.cos(8 * np.pi * x[..., 0]),
        Abar=np.eye(2),
    )
    assert report.status == "degenerate-exact"


def test_rate_study_rejects_data_that_wraps(laplace):
    """Test that callable data must repeat after one tangential window."""
    with pytest.raises(InputRejection, match="periodic along the boundary"):
        rate_study(
            laplace.spec,
            laplace.direction,
            EPS_LIST[:1],
            data=lambda x: x[..., 0],
            Abar=np.eye(2),
        )


def test_layered_sweep_extrapolations_agree():
    """Test that consecutive Richardson pairs agree for the layered medium."""
    problem = load_registered("layered_1d")
    report = run_sweep(problem.spec, problem.direction, EPS_LIST)

    assert report.pair_agreement < 0.05
    assert report.gbar == pytest.approx(1.0, abs=1e-8)
    assert all(entry.holder is None for entry in report.entries)
