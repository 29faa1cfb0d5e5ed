"""Command line front end: ``homoglab <command> --config <problem> --out <dir>``.

Every run writes ``report.json`` (schema "1"), CSV tables, two-column ``.dat``
files, a markdown summary and a ``manifest.json`` holding the config echo,
package versions, timings and the exit status. The manifest is written even
when the run fails.
"""

import argparse
import logging
import platform
import time
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from omegaconf import OmegaConf
from omegaconf.errors import OmegaConfBaseException
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from homoglab import __version__
from homoglab.cell import lambda_of_Q, refinement_study, solve_cell
from homoglab.dtn import (
    check_constant_shift,
    check_domain_monotonicity,
    check_rescaling,
    global_level_bound,
    psi_cauchy,
    sandwich_defect,
    solve_phi_and_f,
)
from homoglab.errors import (
    ConfigParse,
    DegenerateFit,
    InputRejection,
    InvariantViolation,
    ResolutionTooCoarse,
    exit_code,
)
from homoglab.fields import Problem, load_problem
from homoglab.homogenize import rate_study, run_sweep
from homoglab.quasiperiod import (
    convergents,
    find_almost_period,
    fit_defect_law,
    translation_defect,
)
from homoglab.registry import PROBLEM_REGISTRY, load_registered
from homoglab.strip import build_strip_grid, macro_grid, micro_grid, strip_operator
from homoglab.utils import seed_everything, write_columns, write_json, write_table

log = logging.getLogger(__name__)

SCHEMA = "1"
COMMANDS = ("cell", "strip", "dtn", "period", "sweep", "rates")
CHECKS = ("shift", "rescale", "monotone", "barrier", "level")
SHIFT_TOL = 1e-9
RESCALE_TOL = 1e-9
MONOTONE_TOL = 1e-10


class RunConfig(BaseModel):
    """Validated parameters of one run.

    Values come from the problem's ``run`` section, its command subsection,
    the command line flags and ``--set`` overrides, merged in that order.
    """

    model_config = ConfigDict(extra="forbid")

    command: Literal["cell", "strip", "dtn", "period", "sweep", "rates"]
    config: str
    out: str
    eps: List[float] = Field(default_factory=lambda: [0.25, 0.125, 0.0625])
    resolution: int = Field(8, ge=8)
    periods: int = Field(1, ge=1)
    seed: int = 0
    workers: int = Field(1, ge=1)
    verbose: bool = False
    # cell
    cell_resolution: int = Field(64, ge=8)
    refinement: List[int] = Field(default_factory=lambda: [32, 64, 128])
    second_order: bool = False
    center: bool = False
    oracle: Optional[List[List[float]]] = None
    # strip
    bc: Literal["dirichlet", "neumann"] = "neumann"
    r: float = Field(1.0, gt=0)
    h: Optional[float] = Field(None, gt=0)
    scale: Literal["macro", "micro"] = "macro"
    top: float = 0.0
    bottom: float = 1.0
    # dtn
    checks: List[Literal["shift", "rescale", "monotone", "barrier", "level"]] = Field(
        default_factory=lambda: list(CHECKS)
    )
    shift_c: float = 1.0
    samples: int = Field(20, ge=1)
    C_rate: Optional[float] = Field(None, gt=0)
    # period
    rho: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05])
    z: float = 0.0
    # rates
    data: float = 1.0
    refine: bool = False

    @field_validator("eps", "rho", mode="before")
    @classmethod
    def _scalar_to_list(cls, value):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return [value]
        return value

    @field_validator("eps")
    @classmethod
    def _eps_range(cls, value):
        if not value:
            raise ValueError("eps list is empty")
        for eps in value:
            if not 0 < eps <= 1:
                raise ValueError(f"eps must lie in (0, 1], got {eps}")
        return value

    @field_validator("rho")
    @classmethod
    def _rho_range(cls, value):
        for rho in value:
            if not 0 < rho < 0.5:
                raise ValueError(f"rho must lie in (0, 1/2), got {rho}")
        return value


@dataclass
class RunOutput:
    """What a command produces, before it is written to disk."""

    results: Dict[str, Any]
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    columns: Dict[str, Tuple[Sequence[float], Sequence[float], str]] = field(
        default_factory=dict
    )
    summary: Optional[pd.DataFrame] = None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homoglab",
        description="Numerical homogenization of oscillating Neumann problems on strips.",
    )
    parser.add_argument("command", choices=COMMANDS + ("problems",))
    parser.add_argument(
        "--config",
        type=str,
        help="Problem definition (JSON file) or the name of a registered problem",
    )
    parser.add_argument("--out", type=str, help="Output directory")
    parser.add_argument("--eps", type=float, nargs="+", help="Scales, decreasing")
    parser.add_argument("--resolution", type=int, help="Nodes per cell period")
    parser.add_argument("--seed", type=int, help="Seed of the randomized checks")
    parser.add_argument("--workers", type=int, help="Threads of the eps sweep")
    parser.add_argument("--rho", type=float, nargs="+", help="Lattice distances")
    parser.add_argument("--bc", choices=("dirichlet", "neumann"))
    for check in ("shift", "rescale", "monotone", "barrier", "level"):
        parser.add_argument(
            f"--{check}", action="store_true", help=f"Run the {check} check (dtn)"
        )
    parser.add_argument(
        "--refine", action="store_true", default=None, help="Refinement cross-check"
    )
    parser.add_argument(
        "--verbose", action="store_true", default=None, help="Log at DEBUG level"
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        nargs="*",
        default=[],
        metavar="KEY=VALUE",
        help="Config overrides, e.g. --set cell_resolution=128 oracle=[[1.0]]",
    )
    return parser


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=False)],
    )
    logging.getLogger().setLevel(logging.DEBUG if verbose else logging.INFO)


def resolve_problem(source: str) -> Problem:
    """Loads ``source`` as a problem file, or as a registered name if no such file exists."""
    if Path(source).is_file():
        return load_problem(source)
    if source in PROBLEM_REGISTRY:
        log.info(f"Using registered problem {source!r}")
        return load_registered(source)
    raise ConfigParse(f"No problem file or registered problem named {source!r}")


def _flag_values(args: argparse.Namespace) -> Dict[str, Any]:
    flags = {
        key: getattr(args, key)
        for key in ("eps", "resolution", "seed", "workers", "rho", "bc", "refine", "verbose")
        if getattr(args, key) is not None
    }
    checks = [check for check in CHECKS if getattr(args, check)]
    if checks:
        flags["checks"] = checks
    return flags


def build_config(args: argparse.Namespace, problem: Problem) -> RunConfig:
    r"""Merges run sections, flags and overrides and validates the result.

    Raises:
        ConfigParse: If a merged value fails validation.
    """
    run = dict(problem.run)
    common = {key: value for key, value in run.items() if key not in COMMANDS}
    section = run.get(args.command) or {}
    try:
        merged = OmegaConf.merge(
            OmegaConf.create(common),
            OmegaConf.create(section),
            OmegaConf.create(_flag_values(args)),
            OmegaConf.from_dotlist(list(args.overrides)),
            OmegaConf.create({"command": args.command, "config": args.config, "out": args.out}),
        )
        payload = OmegaConf.to_container(merged, resolve=True)
    except OmegaConfBaseException as e:
        raise ConfigParse(f"Could not merge run configuration: {e}") from e
    try:
        return RunConfig.model_validate(payload)
    except ValidationError as e:
        raise ConfigParse(f"Invalid run configuration: {e}") from e


def _require_direction(problem: Problem):
    if problem.direction is None:
        raise InputRejection(
            f"This command needs a strip direction, the problem has dim={problem.spec.dim}"
        )
    return problem.direction


def _peclet_guard(problem: Problem, resolution: int) -> None:
    drift = problem.spec.drift_norm()
    needed = 2.0 * drift / problem.spec.lambda_min
    if resolution < needed:
        raise ResolutionTooCoarse(
            f"resolution {resolution} violates the Péclet guard, need at least "
            f"{needed:.6g} nodes per period (|B| = {drift:.6g})"
        )


def run_cell(problem: Problem, cfg: RunConfig, rng) -> RunOutput:
    solution = solve_cell(
        problem.spec, cfg.cell_resolution, second_order=cfg.second_order, center=cfg.center
    )
    study = refinement_study(
        problem.spec, cfg.refinement, oracle=cfg.oracle, center=cfg.center
    )
    identity = np.eye(solution.dim)
    results = {
        **solution.to_dict(),
        "eigenvalues": np.linalg.eigvalsh(solution.Abar),
        "lambda_identity": lambda_of_Q(solution.Abar, identity),
        "refinement_order": study.attrs.get("order"),
    }
    summary = pd.DataFrame(
        [
            {"entry": f"Abar_{a}{b}", "value": value}
            for (a, b), value in np.ndenumerate(solution.Abar)
        ]
    )
    return RunOutput(results=results, tables={"refinement": study}, summary=summary)


def run_strip(problem: Problem, cfg: RunConfig, rng) -> RunOutput:
    direction = _require_direction(problem)
    grid = build_strip_grid(
        direction,
        cfg.r,
        cfg.eps[0],
        resolution=cfg.resolution if cfg.h is None else None,
        h=cfg.h,
        scale=cfg.scale,
        periods=cfg.periods,
        spec=problem.spec,
    )
    operator = strip_operator(problem.spec, grid)
    if cfg.bc == "dirichlet":
        u = operator.solve_dirichlet(top=cfg.top, bottom=cfg.bottom)
    else:
        u = operator.solve_neumann()
    results = {
        "bc": cfg.bc,
        "eps": grid.eps,
        "shape": grid.shape,
        "h": grid.h,
        "ht": grid.ht,
        "window": grid.window,
        "sup": u.sup(),
        "trace_mean": float(u.trace.mean()),
        "meta": u.meta,
    }
    trace = u.trace_frame()
    return RunOutput(
        results=results,
        tables={"field": u.to_frame(), "trace": trace},
        columns={"trace": (trace["t"], trace["value"], "t value")},
        summary=pd.DataFrame([{k: results[k] for k in ("bc", "eps", "h", "sup", "trace_mean")}]),
    )


def run_dtn(problem: Problem, cfg: RunConfig, rng) -> RunOutput:
    spec, direction = problem.spec, _require_direction(problem)
    rows = []
    probes = {}
    for eps in cfg.eps:
        row = {"eps": eps}
        micro = micro_grid(direction, eps, cfg.resolution, periods=cfg.periods, spec=spec)
        if "barrier" in cfg.checks:
            probe = solve_phi_and_f(
                spec, direction, eps, cfg.resolution, cfg.periods, C_rate=cfg.C_rate
            )
            probes[str(eps)] = probe.to_dict()
            row.update(
                c1=probe.c1, c2=probe.c2, c_phi=probe.c_phi, sandwich=sandwich_defect(probe)
            )
        if "shift" in cfg.checks:
            phi_data = rng.uniform(0.0, 1.0, size=micro.trace_shape)
            row["shift_defect"] = check_constant_shift(
                spec, direction, eps, phi_data, cfg.shift_c, cfg.resolution, cfg.periods
            )
            if row["shift_defect"] > SHIFT_TOL:
                raise InvariantViolation(
                    f"Constant shift defect {row['shift_defect']:.3e} exceeds "
                    f"{SHIFT_TOL:.0e} at eps={eps}"
                )
        if "rescale" in cfg.checks:
            macro = macro_grid(direction, eps, cfg.resolution, periods=cfg.periods, spec=spec)
            v = rng.uniform(-1.0, 1.0, size=micro.trace_shape)
            row["rescale_defect"] = check_rescaling(spec, macro, micro, v)
            if row["rescale_defect"] > RESCALE_TOL:
                raise InvariantViolation(
                    f"Rescaling defect {row['rescale_defect']:.3e} exceeds "
                    f"{RESCALE_TOL:.0e} at eps={eps}"
                )
        if "monotone" in cfg.checks:
            worst = min(
                check_domain_monotonicity(
                    spec,
                    direction,
                    eps,
                    eps / 2,
                    rng.uniform(0.0, 1.0, size=micro.trace_shape),
                    cfg.resolution,
                    cfg.periods,
                )
                for _ in range(cfg.samples)
            )
            row["monotone_min"] = worst
            if worst < -MONOTONE_TOL:
                raise InvariantViolation(
                    f"Domain monotonicity minimum {worst:.3e} below "
                    f"-{MONOTONE_TOL:.0e} at eps={eps}"
                )
        if "level" in cfg.checks:
            report = global_level_bound(
                spec, direction, eps, resolution=cfg.resolution, periods=cfg.periods
            )
            row.update(w_sup=report.w_sup, level_bound=report.bound)
        rows.append(row)

    table = pd.DataFrame(rows)
    results = {"checks": cfg.checks, "rows": table, "barriers": probes}
    if "barrier" in cfg.checks and len(cfg.eps) >= 2:
        results["psi_cauchy"] = psi_cauchy(
            spec, direction, cfg.eps, cfg.resolution, cfg.periods
        )
    return RunOutput(results=results, tables={"dtn": table}, summary=table)


def run_period(problem: Problem, cfg: RunConfig, rng) -> RunOutput:
    spec, direction = problem.spec, _require_direction(problem)
    if direction.dim != 2:
        raise InputRejection("Almost periods need a two dimensional problem")
    traces = {}
    for eps in cfg.eps:
        grid = macro_grid(direction, eps, cfg.resolution, periods=cfg.periods, spec=spec)
        traces[eps] = strip_operator(spec, grid).solve_neumann()

    rows = []
    for rho in cfg.rho:
        period = find_almost_period(direction, z=cfg.z, rho=rho)
        for eps, u in traces.items():
            rows.append(
                {
                    "rho": rho,
                    "tau": period.tau,
                    "tau_norm": float(np.linalg.norm(period.tau_vector)),
                    "lattice_distance": period.rho,
                    "search_radius": period.search_radius,
                    "eps": eps,
                    "translation_defect": translation_defect(u, eps * period.tau),
                }
            )
    table = pd.DataFrame(rows)

    laws = {}
    for eps, group in table.groupby("eps"):
        try:
            C, gamma = fit_defect_law(group["rho"], group["translation_defect"], eps)
            laws[str(eps)] = {"C": C, "gamma": gamma}
        except DegenerateFit as e:
            log.warning(f"Defect law at eps={eps:.6g} not fitted: {e}")
            laws[str(eps)] = None
    results = {"direction": str(direction), "rows": table, "defect_law": laws}
    if direction.slope is not None:
        results["convergents"] = convergents(direction.slope, 8)
    return RunOutput(results=results, tables={"period": table}, summary=table)


def run_sweep_command(problem: Problem, cfg: RunConfig, rng) -> RunOutput:
    direction = _require_direction(problem)
    report = run_sweep(
        problem.spec,
        direction,
        cfg.eps,
        resolution=cfg.resolution,
        periods=cfg.periods,
        workers=cfg.workers,
        progress=True,
    )
    frame = report.to_frame()
    columns = {"means": (frame["eps"], frame["mean"], "eps mean")}
    for index, entry in enumerate(report.entries):
        columns[f"trace_{index}"] = (entry.t, entry.trace, f"t trace eps={entry.eps:.17g}")
    summary = frame[["eps", "mean", "osc", "bound_constant"]].copy()
    return RunOutput(
        results=report.to_dict(), tables={"sweep": frame}, columns=columns, summary=summary
    )


def run_rates(problem: Problem, cfg: RunConfig, rng) -> RunOutput:
    direction = _require_direction(problem)
    report = rate_study(
        problem.spec,
        direction,
        cfg.eps,
        data=cfg.data,
        resolution=cfg.resolution,
        refine=cfg.refine,
        periods=cfg.periods,
        cell_resolution=cfg.cell_resolution,
        progress=True,
    )
    return RunOutput(
        results=report.to_dict(),
        tables={"rates": report.table},
        columns={"rates": (report.table["eps"], report.table["error"], "eps error")},
        summary=report.table,
    )


RUNNERS: Dict[str, Callable[[Problem, RunConfig, Any], RunOutput]] = {
    "cell": run_cell,
    "strip": run_strip,
    "dtn": run_dtn,
    "period": run_period,
    "sweep": run_sweep_command,
    "rates": run_rates,
}


def _versions() -> Dict[str, Optional[str]]:
    versions = {"homoglab": __version__, "python": platform.python_version()}
    for package in ("numpy", "scipy", "pandas", "pydantic", "omegaconf", "einops"):
        try:
            versions[package] = version(package)
        except PackageNotFoundError:
            versions[package] = None
    return versions


def write_outputs(out: Path, cfg: RunConfig, output: RunOutput) -> None:
    write_json(
        out / "report.json",
        {"schema": SCHEMA, "command": cfg.command, "problem": cfg.config, **output.results},
    )
    for name, frame in output.tables.items():
        write_table(out / f"{name}.csv", frame)
    for name, (x, y, header) in output.columns.items():
        write_columns(out / f"{name}.dat", x, y, header)
    if output.summary is not None:
        text = f"# homoglab {cfg.command}: {cfg.config}\n\n"
        text += output.summary.to_markdown(index=False) + "\n"
        (out / "summary.md").write_text(text)
        print_summary(cfg.command, output.summary)


def print_summary(title: str, frame: pd.DataFrame) -> None:
    console = Console()
    table = Table(title=title, show_header=True, header_style="bold magenta")
    for column in frame.columns:
        table.add_column(str(column), justify="right")
    for row in frame.itertuples(index=False):
        table.add_row(*[f"{v:.6g}" if isinstance(v, float) else str(v) for v in row])
    console.print(table)


def list_problems() -> int:
    console = Console()
    table = Table(show_header=True, header_style="bold magenta")
    for column in ("id", "name", "dim", "family", "description"):
        table.add_column(column)
    for name, entry in PROBLEM_REGISTRY.items():
        table.add_row(
            str(entry.id), name, str(entry.dim), entry.family.name, entry.description
        )
    console.print(table)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(bool(args.verbose))
    if args.command == "problems":
        return list_problems()
    if args.out is None or args.config is None:
        log.error("--config and --out are required")
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    manifest: Dict[str, Any] = {
        "schema": SCHEMA,
        "config": {"command": args.command, "config": args.config, "argv": argv},
        "versions": _versions(),
        "status": "failed",
        "exit_code": 1,
        "error": None,
    }
    timings: Dict[str, float] = {}
    code = 1
    try:
        problem = resolve_problem(args.config)
        cfg = build_config(args, problem)
        manifest["config"] = cfg.model_dump()
        rng = seed_everything(cfg.seed)
        if cfg.command != "cell" and cfg.h is None:
            _peclet_guard(problem, cfg.resolution)

        tic = time.perf_counter()
        output = RUNNERS[cfg.command](problem, cfg, rng)
        timings[cfg.command] = time.perf_counter() - tic
        write_outputs(out, cfg, output)
        code = 0
        manifest["status"] = "ok"
    except Exception as e:
        code = exit_code(e)
        manifest["error"] = {"type": type(e).__name__, "message": str(e)}
        if isinstance(e, (InputRejection, InvariantViolation)):
            log.error(f"{type(e).__name__}: {e}")
        else:
            log.exception(f"Run failed with {type(e).__name__}")
    finally:
        timings["total"] = time.perf_counter() - start
        manifest["timings"] = timings
        manifest["exit_code"] = code
        write_json(out / "manifest.json", manifest)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
