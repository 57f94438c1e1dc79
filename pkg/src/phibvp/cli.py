"""Command-line front end.

    phibvp solve        --config cfg.toml [--out DIR] [--seed N]
    phibvp verify       --config cfg.toml [--out DIR] [--seed N]
    phibvp regime       --config cfg.toml [--out DIR] [--seed N]
    phibvp refine       --config cfg.toml [--out DIR] [--seed N]
    phibvp list-presets

Configs are TOML (see presets module for the schema).  A config may consist
of just ``preset = "name"``; any other keys override the preset section-wise.
Exit codes: 0 success; 1 configuration problem (the message names the
offending field); 2 endpoint data outside the reachable range; 3 an
iteration failed to converge.  All written files are byte-deterministic
for a fixed config and seed: wall-clock times never appear in them and
every randomized probe derives from the seed.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from pathlib import Path
from typing import Optional

import numpy as np

from .auxiliary import aux_energy, solve_dirichlet, solve_neumann, solve_P_partial_j, _h_nodes
from .errors import ConfigError, ConvergenceError, Infeasible, PhibvpError
from .grids import derivative, feasible, smooth_gradient, trapz
from .presets import SolvePlan, build_problem, preset_config, preset_lines
from .solvers import SolverOptions, classify_regime, critical_point_iteration, minimize_energy
from .verify import _fmt, check_solution, endpoint_fluxes_extrapolated, refine_study, report_text

# -- config loading ------------------------------------------------------------


def resolve_preset(raw: dict) -> dict:
    """Expand a ``preset = name`` key; other keys override section-wise."""
    if "preset" not in raw:
        return dict(raw)
    name = raw["preset"]
    if not isinstance(name, str):
        raise ConfigError(f"top-level field 'preset' must be a string, got {name!r}")
    cfg = preset_config(name)
    for key, value in raw.items():
        if key == "preset":
            continue
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key] = {**cfg[key], **value}
        else:
            cfg[key] = value
    return cfg


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}")
    return resolve_preset(raw)


# -- deterministic config echo ---------------------------------------------------

_SECTION_ORDER = ("phi", "boundary", "potential", "h", "problem", "auxiliary", "solver", "outputs", "refine")
_SCALAR_ORDER = ("name", "T", "M", "N")


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize config value {v!r}")


def config_echo_text(cfg: dict) -> str:
    """Serialize the resolved config so that re-parsing rebuilds the same problem."""
    lines = []
    for key in _SCALAR_ORDER:
        if key in cfg:
            lines.append(f"{key} = {_toml_value(cfg[key])}")
    for key in sorted(cfg):
        if key in _SCALAR_ORDER or isinstance(cfg[key], dict):
            continue
        lines.append(f"{key} = {_toml_value(cfg[key])}")
    ordered = [s for s in _SECTION_ORDER if s in cfg]
    ordered += sorted(s for s in cfg if isinstance(cfg[s], dict) and s not in _SECTION_ORDER)
    for sec in ordered:
        body = cfg[sec]
        if not isinstance(body, dict):
            continue
        lines.append("")
        lines.append(f"[{sec}]")
        for key in sorted(body):
            lines.append(f"{key} = {_toml_value(body[key])}")
    return "\n".join(lines) + "\n"


# -- solution serialization ------------------------------------------------------


def solution_csv_text(problem, values: np.ndarray) -> str:
    """CSV with nodal values and nodal fluxes.

    Interior node fluxes average the two adjacent midpoint fluxes; the end
    fluxes come from quadratic extrapolation, matching the verifier.
    """
    grid = problem.grid
    mid = problem.phi.phi_eval(derivative(values, grid))
    left, right = endpoint_fluxes_extrapolated(problem, values, grid)
    node_flux = np.empty_like(values)
    node_flux[0] = left
    node_flux[-1] = right
    node_flux[1:-1] = 0.5 * (mid[:-1] + mid[1:])
    n = values.shape[1]
    header = ", ".join(
        ["t"] + [f"u_{k + 1}" for k in range(n)] + [f"phi_du_{k + 1}" for k in range(n)]
    )
    out = [header]
    for t, urow, frow in zip(grid.nodes, values, node_flux):
        cells = [f"{t:.17g}"] + [f"{v:.17g}" for v in urow] + [f"{v:.17g}" for v in frow]
        out.append(", ".join(cells))
    return "\n".join(out) + "\n"


def read_solution_csv(path, problem) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read solution file {path}: {exc}")
    except ValueError as exc:
        raise ConfigError(f"solution file {path} is not numeric CSV: {exc}")
    grid, n = problem.grid, problem.n_dim
    if data.shape[0] != grid.m + 1:
        raise ConfigError(
            f"solution file {path} has {data.shape[0]} rows, config grid needs M+1 = {grid.m + 1}"
        )
    if data.shape[1] < 1 + n:
        raise ConfigError(f"solution file {path} has {data.shape[1]} columns, need at least {1 + n}")
    if float(np.max(np.abs(data[:, 0] - grid.nodes))) > 1e-12 * (1.0 + grid.big_t):
        raise ConfigError(f"solution file {path} was written on a different grid than the config")
    return data[:, 1 : 1 + n]


# -- solve dispatch ----------------------------------------------------------------


def run_plan(plan: SolvePlan, opts: SolverOptions):
    """Execute the solve a plan describes; returns (values, method, iterations)."""
    p = plan.problem
    if plan.problem_type == "full":
        route = plan.route
        if route == "auto":
            rec = classify_regime(p, seed=opts.seed).recommended
            route = "fixed_point" if rec == "fixed_point" else "minimize"
        if route == "minimize":
            res = minimize_energy(p, options=opts)
            return res.values, "minimize_energy", res.iterations
        res = critical_point_iteration(p, options=opts)
        return res.values, "critical_point_iteration", res.iterations
    if plan.problem_type == "neumann":
        sol = solve_neumann(p.phi, p.h, plan.flux_left, plan.flux_right, p.grid)
    elif plan.problem_type == "dirichlet":
        sol = solve_dirichlet(p.phi, p.h, plan.pinned_left, plan.pinned_right, p.grid)
    else:
        sol = solve_P_partial_j(p.phi, p.boundary, p.h, p.grid, n_dim=p.n_dim)
        return sol.values, f"partial_j[{sol.method}]", sol.iterations
    return sol.values, f"{plan.problem_type}[{sol.method}]", sol.iterations


def aux_report_text(plan: SolvePlan, values: np.ndarray, method: str, iterations: int) -> str:
    """Report for data-driven (flux or pinned endpoint) solves.

    These carry prescribed endpoint data rather than a boundary functional,
    so instead of a normal-cone residual the report states how well the
    recomputed fluxes or endpoint values match the data.
    """
    p, grid = plan.problem, plan.problem.grid
    res = smooth_gradient(p, values, mode="auxiliary", grid=grid)
    _, worst = feasible(values, p.phi, grid=grid)
    left, right = endpoint_fluxes_extrapolated(p, values, grid)
    h_nodes = _h_nodes(grid, p.h, p.n_dim)
    rows = {
        "grid.m": grid.m,
        "grid.big_t": float(grid.big_t),
        "problem.n_dim": p.n_dim,
        "problem.type": plan.problem_type,
        "solver.method": method,
        "solver.iterations": iterations,
        "residual.mode": "auxiliary",
        "residual.ode": float(np.max(np.abs(res[1:-1]))),
        "feasibility.margin": float(p.phi.a * (1.0 - worst)),
        "reachable.gap": float(grid.big_t * p.phi.a - np.linalg.norm(values[0] - values[-1])),
        "flux.left": left,
        "flux.right": right,
        "energy.aux": aux_energy(p.phi, grid, h_nodes, values, 1.0),
    }
    if plan.problem_type == "neumann":
        rows["flux.mismatch_left"] = float(np.linalg.norm(left - plan.flux_left))
        rows["flux.mismatch_right"] = float(np.linalg.norm(right - plan.flux_right))
        identity = trapz(values - h_nodes, grid) - (plan.flux_right - plan.flux_left)
        rows["residual.mean_identity"] = float(np.linalg.norm(identity))
    elif plan.problem_type == "dirichlet":
        rows["pin.mismatch_left"] = float(np.linalg.norm(values[0] - plan.pinned_left))
        rows["pin.mismatch_right"] = float(np.linalg.norm(values[-1] - plan.pinned_right))
    if plan.reference is not None:
        exact = np.asarray(plan.reference(grid.nodes), dtype=float)
        if exact.ndim == 1:
            exact = exact[:, None]
        rows["error.sup_vs_reference"] = float(np.max(np.linalg.norm(values - exact, axis=1)))
    lines = [f"{k} = {_fmt(v)}" for k, v in sorted(rows.items())]
    return "\n".join(lines) + "\n"


# -- subcommands --------------------------------------------------------------------


def _prepare(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.setdefault("solver", {})
        cfg["solver"] = {**cfg["solver"], "seed": int(args.seed)}
    plan = build_problem(cfg)
    plan.problem.validate()
    opts = SolverOptions(**plan.solver_options)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, plan, opts, out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def cmd_solve(args) -> int:
    cfg, plan, opts, out = _prepare(args)
    t0 = time.perf_counter()
    values, method, iterations = run_plan(plan, opts)
    wall = time.perf_counter() - t0
    if plan.problem_type == "full":
        report = check_solution(
            plan.problem, values, mode="full", method=method,
            iterations=iterations, wall_time=wall, seed=opts.seed,
        )
        text = report_text(report)
    else:
        text = aux_report_text(plan, values, method, iterations)
    sys.stdout.write(text)
    _write(out / plan.outputs.get("solution", "solution.csv"), solution_csv_text(plan.problem, values))
    _write(out / plan.outputs.get("report", "report.txt"), text)
    _write(out / "config_echo.toml", config_echo_text(cfg))
    return 0


def cmd_verify(args) -> int:
    cfg, plan, opts, out = _prepare(args)
    values = read_solution_csv(out / plan.outputs.get("solution", "solution.csv"), plan.problem)
    if plan.problem_type == "full":
        report = check_solution(plan.problem, values, mode="full", seed=opts.seed)
        text = report_text(report)
    else:
        text = aux_report_text(plan, values, "stored", 0)
    sys.stdout.write(text)
    _write(out / "verify_report.txt", text)
    return 0


def cmd_regime(args) -> int:
    cfg, plan, opts, out = _prepare(args)
    rep = classify_regime(plan.problem, seed=opts.seed)
    rows = {
        "regime.flags": ",".join(rep.flags),
        "regime.recommended": rep.recommended,
        "regime.ladder_radii": np.asarray(rep.ladder_radii, dtype=float),
        "regime.ladder_values": np.asarray(rep.ladder_values, dtype=float),
    }
    if rep.lambda1 is not None:
        rows["regime.lambda1"] = float(rep.lambda1)
    text = "\n".join(f"{k} = {_fmt(v)}" for k, v in sorted(rows.items())) + "\n"
    sys.stdout.write(text)
    _write(out / "regime.txt", text)
    return 0


def cmd_refine(args) -> int:
    cfg, plan, opts, out = _prepare(args)
    levels = cfg.get("refine", {}).get("levels", [100, 200, 400])
    if not isinstance(levels, list) or not levels or not all(
        isinstance(m, int) and not isinstance(m, bool) for m in levels
    ):
        raise ConfigError(f"[refine] field 'levels' must be a list of integers, got {levels!r}")

    if plan.problem_type == "full":
        route = plan.route
        if route == "auto":
            rec = classify_regime(plan.problem, seed=opts.seed).recommended
            route = "fixed_point" if rec == "fixed_point" else "minimize"
        if route == "minimize":
            solve = lambda spec: minimize_energy(spec, options=opts).values
        else:
            solve = lambda spec: critical_point_iteration(spec, options=opts).values
    elif plan.problem_type == "neumann":
        solve = lambda spec: solve_neumann(
            spec.phi, spec.h, plan.flux_left, plan.flux_right, spec.grid
        ).values
    elif plan.problem_type == "dirichlet":
        solve = lambda spec: solve_dirichlet(
            spec.phi, spec.h, plan.pinned_left, plan.pinned_right, spec.grid
        ).values
    else:
        solve = lambda spec: solve_P_partial_j(
            spec.phi, spec.boundary, spec.h, spec.grid, n_dim=spec.n_dim
        ).values

    study = refine_study(plan.problem, solve, levels=levels, reference=plan.reference)
    rows = {
        "refine.levels": np.asarray(study.ms, dtype=float),
        "refine.errors": np.asarray(study.errors, dtype=float),
        "refine.rates": np.asarray(study.rates, dtype=float),
        "refine.order": study.order,
        "refine.reference": study.reference,
    }
    text = "\n".join(f"{k} = {_fmt(v)}" for k, v in sorted(rows.items())) + "\n"
    sys.stdout.write(text)
    _write(out / "refine.txt", text)
    return 0


def cmd_list_presets(args) -> int:
    sys.stdout.write(preset_lines())
    return 0


# -- entry point ---------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Raise ConfigError instead of exiting with argparse's own code 2."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phibvp", description=__doc__.splitlines()[0] if __doc__ else "")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn, desc in (
        ("solve", cmd_solve, "solve the configured problem; write solution CSV and report"),
        ("verify", cmd_verify, "re-check a previously written solution CSV"),
        ("regime", cmd_regime, "classify the configured problem and recommend a route"),
        ("refine", cmd_refine, "convergence study over a ladder of grids"),
    ):
        sp = sub.add_parser(name, help=desc)
        sp.add_argument("--config", required=True, help="TOML problem configuration")
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        sp.add_argument("--seed", type=int, default=None, help="override the solver/probe seed")
        sp.set_defaults(func=fn)
    lp = sub.add_parser("list-presets", help="list the named configurations")
    lp.set_defaults(func=cmd_list_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"failed to converge: {exc}", file=sys.stderr)
        return 3
    except PhibvpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
