"""Command-line front end: ``fbsde-lab <command> [--config PATH] [--workers K] [--out DIR] [--seed S]``.

Every run writes ``summary.txt``, one or more CSV files and ``timings.txt``
into the output directory.  Summary and CSVs are a pure function of the
configuration and the command; wall-clock times and the worker count only
appear in ``timings.txt``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 benchmark failure.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from ._accel import backend_name
from .applications.carbon import carbon_picard_config, price_allowance
from .applications.pandemic import compare_policies, comparison_suite, optimal_policy, solve_pandemic
from .audit import SampleSpec, audit_conditions
from .config import ExperimentConfig, load_config
from .export import default_field_nodes, field_table, path_table, pde_table
from .errors import ConfigError, DimensionError, NumericalError
from .model import CoefficientSet
from .paths import TimeGrid
from .pde import SpaceGrid, compare_field, solve_semilinear_pde
from .pipeline import FbsdeSolution, solve_fbsde
from .presets import build_coefficients, carbon_model, pandemic_model
from .reference import run_benchmarks

COMMANDS = ("solve", "audit", "pde-compare", "pandemic", "carbon", "benchmarks")
OUT_ENV = "FBSDE_LAB_OUT"

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_BENCHMARK = 0, 1, 2, 3

# (n_paths, steps, initial spread) when the [mc] table leaves them out
MC_DEFAULTS = {
    "pandemic": (100_000, 50, 0.0),
    "carbon": (100_000, 100, 0.0),
    "benchmark:digital": (200_000, 50, 1.0),
}
MC_FALLBACK = (200_000, 50, 0.0)
PDE_SPREAD = 0.5
QUANTILES = (0.05, 0.5, 0.95)

SECTIONS = ("run", "Y0", "bounds", "picard", "martingale", "residuals", "audit", "application", "benchmarks", "timings")


@dataclass
class RunResult:
    sections: Dict[str, List[str]] = field(default_factory=dict)
    csvs: Dict[str, Tuple[List[str], List[list]]] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    exit_code: int = EXIT_OK


# -- formatting -------------------------------------------------------------------
def fmt(v) -> str:
    """Round-trippable text for CSV cells."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def num(v) -> str:
    """Short text for summary lines."""
    return format(float(v), ".6g")


def verdict(ok: bool) -> str:
    return "pass" if ok else "FAIL"


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_run_summary(path: Path, sections: Dict[str, List[str]]) -> None:
    """Plain-text summary; every section in :data:`SECTIONS` appears, empty ones as ``n/a``."""
    out = []
    for name in SECTIONS:
        out.append(f"[{name}]")
        lines = sections.get(name)
        out.extend(lines if lines else ["n/a"])
        out.append("")
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(out))


def write_timings(path: Path, timings: Dict[str, float], workers: int) -> None:
    lines = [f"workers {workers}", f"backend {backend_name()}"]
    lines += [f"{k} {v:.3f}" for k, v in timings.items()]
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# -- shared pieces ----------------------------------------------------------------
def _mc(cfg: ExperimentConfig) -> Tuple[int, int, float]:
    n, M, spread = MC_DEFAULTS.get(cfg.preset, MC_FALLBACK)
    mc = cfg.mc
    return (
        mc.n_paths if mc.n_paths is not None else n,
        mc.steps if mc.steps is not None else M,
        mc.initial_spread if mc.initial_spread is not None else spread,
    )


def _coefficients(cfg: ExperimentConfig) -> CoefficientSet:
    coeffs = build_coefficients(cfg.preset, cfg.model)
    if cfg.declared_conditions is not None:
        coeffs = coeffs.replace(profile=cfg.declared_conditions)
        coeffs.profile.check_dims(coeffs.dims)
    return coeffs


def _picard(cfg: ExperimentConfig):
    base = carbon_picard_config(carbon_model(cfg.model)) if cfg.preset == "carbon" else None
    return cfg.picard_config(base)


def _sample_spec(cfg: ExperimentConfig, coeffs: CoefficientSet) -> SampleSpec:
    # the y box stands for the a-priori range of Y
    if cfg.preset == "carbon":
        y_radius = carbon_model(cfg.model).lam
    elif cfg.preset == "pandemic":
        y_radius = pandemic_model(cfg.model).cap + 1.5
    else:
        y_radius = 1.0
    return SampleSpec.box(coeffs, y_radius=y_radius)


def _run_lines(cfg: ExperimentConfig, command: str, n_paths=None, M=None) -> List[str]:
    lines = [f"command {command}", f"preset {cfg.preset}", f"seed {cfg.mc.seed}"]
    if n_paths is not None:
        lines += [f"n_paths {n_paths}", f"steps {M}"]
    lines.append(f"version {__version__}")
    return lines


def _solution_sections(res: RunResult, sol: FbsdeSolution, coeffs: CoefficientSet) -> None:
    d = sol.diagnostics
    Y0 = np.atleast_1d(sol.Y0)
    se = np.atleast_1d(sol.Y0_stderr)
    res.sections["Y0"] = [f"Y0[{k}] {num(Y0[k])} +- {num(se[k])}" for k in range(Y0.size)]
    yb = "n/a" if d.y_bound is None else num(d.y_bound)
    bound_lines = [f"y_sup {num(d.y_sup)}", f"y_bound {yb}"]
    if d.y_bound is not None:
        bound_lines.append(f"y_sup <= y_bound + 0.01: {verdict(d.y_sup <= d.y_bound + 0.01)}")
    bound_lines.append(f"field evaluations outside the training box {num(d.clipped_fraction)}")
    res.sections["bounds"] = bound_lines
    res.sections["picard"] = [
        f"iterations {d.picard_iterations}",
        f"converged {str(d.converged).lower()}",
        "history " + (" ".join(num(v) for v in d.picard_history) if d.picard_history else "n/a"),
    ] + (["experimental quadratic driver"] if d.experimental else [])
    m = d.martingale
    res.sections["martingale"] = [
        f"terminal_mean {num(m.terminal_mean)}",
        f"stderr {num(m.stderr)}",
        f"max_log {num(m.max_log)}",
        f"pass {str(m.passed).lower()}",
    ]
    res.sections["residuals"] = [
        f"coupling_residual_rms {num(d.coupling_residual_rms)}",
        f"terminal_rms {num(d.terminal_rms)}",
        f"recoupling_identity_max_error {num(d.recoupling_error)}",
    ]
    grid = sol.grid
    X, Y = sol.X.states, sol.Y
    header = ["t"] + [f"mean_X{j}" for j in range(X.shape[2])]
    for k in range(Y.shape[2]):
        header += [f"mean_Y{k}"] + [f"q{int(q * 100):02d}_Y{k}" for q in QUANTILES]
    rows = []
    for i in range(grid.M + 1):
        row = [grid.time(i)] + list(X[:, i].mean(axis=0))
        for k in range(Y.shape[2]):
            row += [Y[:, i, k].mean()] + list(np.quantile(Y[:, i, k], QUANTILES))
        rows.append(row)
    res.csvs["solution.csv"] = (header, rows)
    res.csvs["picard.csv"] = (["iteration", "sup_change"], [[k + 1, v] for k, v in enumerate(d.picard_history)])


def _exports(res: RunResult, cfg: ExperimentConfig, sol: FbsdeSolution) -> None:
    ex = cfg.export
    if ex.paths:
        res.csvs["paths.csv"] = path_table(sol.X, ex.paths)
    if ex.field:
        nodes = default_field_nodes(sol.field) if ex.field_x is None else ex.field_x
        try:
            res.csvs["field.csv"] = field_table(sol.field, nodes)
        except ValueError as exc:
            raise ConfigError(f"cli: export.field_x does not match the state dimension: {exc}") from exc


def _audit_section(res: RunResult, cfg: ExperimentConfig, coeffs: CoefficientSet) -> None:
    if coeffs.profile is None:
        return
    rep = audit_conditions(coeffs, coeffs.profile, _sample_spec(cfg, coeffs))
    res.sections["audit"] = rep.lines()
    res.csvs["audit.csv"] = (
        ["flag", "check", "status", "worst", "note"],
        [[c.flag, c.name, c.status, c.worst, c.note] for c in rep.checks],
    )


# -- commands -----------------------------------------------------------------------
def cmd_solve(cfg: ExperimentConfig, workers: int) -> RunResult:
    res = RunResult()
    coeffs = _coefficients(cfg)
    n_paths, M, spread = _mc(cfg)
    res.sections["run"] = _run_lines(cfg, "solve", n_paths, M)
    t0 = time.perf_counter()
    sol = solve_fbsde(coeffs, TimeGrid(coeffs.T, M), n_paths, cfg.mc.seed, cfg.basis, _picard(cfg),
                      initial_spread=spread, workers=workers)
    res.timings["solve"] = time.perf_counter() - t0
    _solution_sections(res, sol, coeffs)
    _exports(res, cfg, sol)
    t0 = time.perf_counter()
    _audit_section(res, cfg, coeffs)
    res.timings["audit"] = time.perf_counter() - t0
    return res


def cmd_audit(cfg: ExperimentConfig, workers: int) -> RunResult:
    res = RunResult()
    coeffs = _coefficients(cfg)
    res.sections["run"] = _run_lines(cfg, "audit")
    if coeffs.profile is None:
        raise ConfigError(f"cli: preset {cfg.preset!r} declares no conditions; add [declared_conditions]")
    t0 = time.perf_counter()
    _audit_section(res, cfg, coeffs)
    res.timings["audit"] = time.perf_counter() - t0
    return res


def cmd_pde_compare(cfg: ExperimentConfig, workers: int) -> RunResult:
    res = RunResult()
    coeffs = _coefficients(cfg)
    if (coeffs.dims.m, coeffs.dims.n, coeffs.dims.d) != (1, 1, 1):
        raise ConfigError("cli: pde-compare needs a one-dimensional preset (m = n = d = 1)")
    n_paths, M, spread = _mc(cfg)
    if cfg.mc.initial_spread is None and spread == 0.0:
        spread = PDE_SPREAD
    ps = cfg.pde
    if M % 2 or ps.steps % 2:
        raise ConfigError("cli: pde-compare needs even mc.steps and pde.steps so that T/2 is a grid node")
    res.sections["run"] = _run_lines(cfg, "pde-compare", n_paths, M) + [f"initial_spread {num(spread)}"]

    t0 = time.perf_counter()
    pde = solve_semilinear_pde(coeffs, SpaceGrid(ps.x_min, ps.x_max, ps.J), TimeGrid(coeffs.T, ps.steps))
    res.timings["pde"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    sol = solve_fbsde(coeffs, TimeGrid(coeffs.T, M), n_paths, cfg.mc.seed, cfg.basis, _picard(cfg),
                      initial_spread=spread, workers=workers)
    res.timings["solve"] = time.perf_counter() - t0
    _solution_sections(res, sol, coeffs)
    _exports(res, cfg, sol)

    if ps.region is not None:
        region = ps.region
    else:
        region = tuple(float(v) for v in np.quantile(sol.F.states[:, 0, 0], (0.1, 0.9)))
    times = (0.0, 0.5 * coeffs.T)
    cmp_ = compare_field(pde, sol.field, region, times)
    res.sections["application"] = [
        f"region [{num(region[0])}, {num(region[1])}]",
        f"nodes {cmp_.n_nodes}",
    ] + [f"sup |u_mc - u_pde| at t={num(t)}: {num(s)}" for t, s in zip(cmp_.times, cmp_.per_time_sup)] + [
        f"sup {num(cmp_.sup)}",
        f"rms {num(cmp_.rms)}",
        f"u_pde(0, x0) {num(pde.at(0.0, coeffs.x0)[0])}",
    ]
    x = pde.nodes
    mask = (x >= region[0]) & (x <= region[1])
    rows = []
    for t in times:
        u_pde = pde.values[pde.tgrid.index(t), mask]
        u_mc = sol.field.u_at(sol.field.grid.index(t), x[mask][:, None])[:, 0]
        rows += [[t, xx, a, b, abs(a - b)] for xx, a, b in zip(x[mask], u_pde, u_mc)]
    res.csvs["pde_compare.csv"] = (["t", "x", "u_pde", "u_mc", "abs_diff"], rows)
    if cfg.export.pde:
        res.csvs["pde.csv"] = pde_table(pde)
    return res


def cmd_pandemic(cfg: ExperimentConfig, workers: int) -> RunResult:
    if cfg.preset != "pandemic":
        raise ConfigError(f"cli: the pandemic command needs preset = 'pandemic', got {cfg.preset!r}")
    res = RunResult()
    model = pandemic_model(cfg.model)
    coeffs = _coefficients(cfg)
    n_paths, M, _ = _mc(cfg)
    res.sections["run"] = _run_lines(cfg, "pandemic", n_paths, M)
    grid = TimeGrid(model.T, M)
    t0 = time.perf_counter()
    sol = solve_pandemic(model, grid, n_paths, cfg.mc.seed, cfg.basis, _picard(cfg), workers=workers)
    res.timings["solve"] = time.perf_counter() - t0
    _solution_sections(res, sol, coeffs)
    _exports(res, cfg, sol)

    t0 = time.perf_counter()
    alpha = optimal_policy(sol)
    table = compare_policies(model, comparison_suite(alpha), sol.X.noise, grid)
    res.timings["policies"] = time.perf_counter() - t0
    upper = model.y_upper(grid.nodes)
    Y = sol.Y[:, :, 0]
    in_bounds = bool(np.all(Y >= -0.01) and np.all(Y <= upper[None, :] + 0.01))
    lines = [f"C {num(model.lipschitz)}", f"C_y {num(model.cap)}",
             f"Y in [-0.01, exp(C (T - t)) - 1 + 0.01]: {verdict(in_bounds)}"]
    lines.append("policy J stderr diff(J*-J) diff_stderr optimal_within_3se")
    for name, r in table.items():
        ok = r["diff"] <= 3.0 * r["diff_stderr"]
        lines.append(f"{name} {num(r['J'])} {num(r['stderr'])} {num(r['diff'])} {num(r['diff_stderr'])} {verdict(ok)}")
    res.sections["application"] = lines
    res.csvs["policies.csv"] = (
        ["policy", "J", "stderr", "diff", "diff_stderr"],
        [[k, r["J"], r["stderr"], r["diff"], r["diff_stderr"]] for k, r in table.items()],
    )
    X = sol.X.states[:, :, 0]
    header = ["t", "mean_X", "mean_alpha"] + [f"q{int(q * 100):02d}_alpha" for q in QUANTILES]
    rows = [[grid.time(i), X[:, i].mean(), alpha[:, i].mean()] + list(np.quantile(alpha[:, i], QUANTILES))
            for i in range(M + 1)]
    res.csvs["pandemic.csv"] = (header, rows)
    _audit_section(res, cfg, coeffs)
    return res


def cmd_carbon(cfg: ExperimentConfig, workers: int) -> RunResult:
    if cfg.preset != "carbon":
        raise ConfigError(f"cli: the carbon command needs preset = 'carbon', got {cfg.preset!r}")
    res = RunResult()
    model = carbon_model(cfg.model)
    coeffs = _coefficients(cfg)
    n_paths, M, spread = _mc(cfg)
    res.sections["run"] = _run_lines(cfg, "carbon", n_paths, M)
    grid = TimeGrid(model.T, M)
    t0 = time.perf_counter()
    price = price_allowance(model, grid, n_paths, cfg.mc.seed, cfg.basis, _picard(cfg), initial_spread=spread,
                            workers=workers)
    res.timings["solve"] = time.perf_counter() - t0
    sol = price.solution
    _solution_sections(res, sol, coeffs)
    _exports(res, cfg, sol)
    s = price.summary
    gap = abs(s["mean_YT"] - price.Y0)
    res.sections["application"] = [
        f"Y0 {num(price.Y0)}",
        f"Y0 ∈ [0, λ]: {verdict(0.0 <= price.Y0 <= model.lam)}",
        f"mean(Y_T) {num(s['mean_YT'])} +- {num(s['stderr_YT'])}",
        f"|mean(Y_T) - Y0| <= 3 stderr: {verdict(gap <= 3.0 * s['stderr_YT'])}",
        "mean abatement per firm " + " ".join(num(v) for v in s["mean_abatement"]),
    ]
    E = sol.X.states[:, :, 0]
    Y = sol.Y[:, :, 0]
    N = model.N
    header = ["t", "mean_E"] + [f"q{int(q * 100):02d}_Y" for q in QUANTILES] + [f"mean_xi{i + 1}" for i in range(N)]
    rows = [[grid.time(i), E[:, i].mean()] + list(np.quantile(Y[:, i], QUANTILES))
            + list(price.schedules[:, i].mean(axis=0)) for i in range(M + 1)]
    res.csvs["carbon.csv"] = (header, rows)
    _audit_section(res, cfg, coeffs)
    return res


def cmd_benchmarks(cfg: ExperimentConfig, workers: int) -> RunResult:
    res = RunResult()
    n_paths, M, _ = _mc(cfg)
    res.sections["run"] = ["command benchmarks", f"seed {cfg.mc.seed}", f"n_paths {n_paths}", f"steps {M}",
                           f"version {__version__}"]
    rows, timings = run_benchmarks(n_paths, M, cfg.mc.seed, workers, cfg.basis, cfg.picard_config())
    res.timings.update(timings)
    lines = ["name | quantity | value | reference | error | tolerance | result"]
    for r in rows:
        lines.append(f"{r.name} | {r.quantity} | {num(r.value)} | {num(r.reference)} | {num(r.error)} | "
                     f"{num(r.tolerance)} | {verdict(r.passed)}")
    n_fail = sum(not r.passed for r in rows)
    lines.append(f"{len(rows) - n_fail}/{len(rows)} passed")
    res.sections["benchmarks"] = lines
    res.csvs["benchmarks.csv"] = (
        ["name", "quantity", "value", "reference", "error", "tolerance", "pass"],
        [[r.name, r.quantity, r.value, r.reference, r.error, r.tolerance, r.passed] for r in rows],
    )
    if n_fail:
        res.exit_code = EXIT_BENCHMARK
    return res


HANDLERS = {
    "solve": cmd_solve,
    "audit": cmd_audit,
    "pde-compare": cmd_pde_compare,
    "pandemic": cmd_pandemic,
    "carbon": cmd_carbon,
    "benchmarks": cmd_benchmarks,
}

# commands that can run without a config file
IMPLIED_PRESET = {"pandemic": "pandemic", "carbon": "carbon", "benchmarks": "benchmark:linear"}


def run(config_path: Optional[str], command: str, workers: int = 1, out: Optional[str] = None,
        seed: Optional[int] = None) -> int:
    """Execute one command and write its artifacts; returns the exit code."""
    if command not in HANDLERS:
        raise ConfigError(f"cli: unknown command {command!r}; choose from {list(COMMANDS)}")
    if config_path is not None:
        cfg = load_config(config_path)
    elif command in IMPLIED_PRESET:
        cfg = ExperimentConfig(preset=IMPLIED_PRESET[command])
    else:
        raise ConfigError(f"cli: command {command!r} needs --config")
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError(f"cli: --seed must be an unsigned 64-bit integer, got {seed}")
        cfg.mc.seed = seed
    if workers < 1:
        raise ConfigError(f"cli: --workers must be >= 1, got {workers}")
    out_dir = Path(out or os.environ.get(OUT_ENV) or cfg.outputs)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cli: cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise ConfigError(f"cli: output directory {out_dir} is not writable")

    t0 = time.perf_counter()
    res = HANDLERS[command](cfg, workers)
    res.timings["total"] = time.perf_counter() - t0
    res.sections["timings"] = ["wall-clock per stage in timings.txt"]
    try:
        for name, (header, rows) in res.csvs.items():
            write_csv(out_dir / name, header, rows)
        write_run_summary(out_dir / "summary.txt", res.sections)
        write_timings(out_dir / "timings.txt", res.timings, workers)
    except OSError as exc:
        raise ConfigError(f"cli: cannot write artifacts to {out_dir}: {exc}") from exc
    return res.exit_code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbsde-lab", description="Coupled FBSDE laboratory")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML experiment configuration")
    p.add_argument("--workers", type=int, default=1, help="path-parallel workers (results do not depend on it)")
    p.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")
    p.add_argument("--seed", type=int, help="overrides mc.seed")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; usage errors map to 1 here
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        code = run(args.config, args.command, args.workers, args.out, args.seed)
    except (ConfigError, DimensionError) as exc:
        print(f"fbsde-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"fbsde-lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if code == EXIT_BENCHMARK:
        print("fbsde-lab: benchmark failure, see summary.txt", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
