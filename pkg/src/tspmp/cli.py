"""Command-line front end: ``tspmp <command> [options]``.

Exit codes: 0 success (all applicable conditions pass), 1 configuration
error, 2 necessary-condition violation, 3 only not-applicable verdicts,
4 solver or simulation failure.  Set ``TSPMP_LOG`` to a logging level name
(``DEBUG``, ``INFO``...) for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as tio
from . import registry
from .calculus import GridFunction
from .certificate import Extremal, certify, TOL_PMP
from .dynamics import DEFAULT_H, Trajectory, control_on_grid, simulate
from .errors import (
    BlowUp, DegenerateArgmax, MaximizationFailed, NoAdmissibleControl, NoConvergence, StepTooLarge,
    TspmpError,
)
from .problem import ControlProblem, problem_from_json
from .solver import (
    MAX_COMBINATIONS, MAX_STEPS, ShootingGuess, ShootingOptions, brute_force_discrete, projected_gradient,
    shooting_solve,
)
from .timescale import sample_grid
from .variations import fd_check_init, fd_check_rd, fd_check_rs

log = logging.getLogger("tspmp")

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_NA, EXIT_SOLVER = 0, 1, 2, 3, 4
COMMANDS = ("simulate", "certify", "solve", "oracle", "examples", "fdcheck")
SOLVER_ERRORS = (NoConvergence, DegenerateArgmax, MaximizationFailed, StepTooLarge, BlowUp, NoAdmissibleControl)


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a command needs; the JSON form of ``--config`` uses these field names."""

    command: str
    builtin: str | None = None
    problem: str | None = None
    h: float = DEFAULT_H
    tol_pmp: float = TOL_PMP
    seed: int = 0
    out: str | None = None
    format: str = "json"
    extremal: str = "paper"
    control: str | None = None
    method: str = "shooting"
    kind: str = "rs"
    time: float | None = None
    direction: list | None = None
    grid_points: int = 11
    b_candidates: list | None = None
    steps: int = 100

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        if self.builtin is not None and self.problem is not None:
            raise ConfigError("give either a builtin name or a problem file, not both")
        if not self.h > 0:
            raise ConfigError("h must be positive")
        if not self.tol_pmp > 0:
            raise ConfigError("tol_pmp must be positive")


CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)} - {"command"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--builtin", metavar="NAME", help=f"registry problem: {', '.join(registry.names())}")
    src.add_argument("--problem", metavar="PATH", help="problem JSON file")
    common.add_argument("--h", type=float, help=f"sampling step on dense segments (default {DEFAULT_H})")
    common.add_argument("--tol-pmp", dest="tol_pmp", type=float, help=f"certificate tolerance (default {TOL_PMP})")
    common.add_argument("--seed", type=int, help="seed of the multistart maximizer (default 0)")
    common.add_argument("--out", metavar="DIR", help="write artifacts into DIR instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), help="artifact format (default json)")
    common.add_argument("--config", metavar="PATH", help="JSON file with option values; unknown keys are rejected")

    parser = _Parser(prog="tspmp", description="Optimal control on time scales: simulation and extremal certification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a control and emit the trajectory")
    p.add_argument("--control", metavar="PATH", help="control as GridFunction JSON or CSV (default: registry control)")

    p = sub.add_parser("certify", parents=[common], help="check the necessary conditions on an extremal")
    p.add_argument("--extremal", metavar="paper|PATH", help="'paper' for the registry extremal or an extremal JSON file")

    p = sub.add_parser("solve", parents=[common], help="compute an extremal and certify it")
    p.add_argument("--method", choices=("shooting", "gradient"), help="solver (default shooting)")
    p.add_argument("--steps", type=int, help="gradient iterations (default 100)")

    p = sub.add_parser("oracle", parents=[common], help="exhaustive search on a discrete window")
    p.add_argument("--grid-points", dest="grid_points", type=int, help="control values per axis (default 11)")
    p.add_argument("--b-candidates", dest="b_candidates", type=float, nargs="+", help="final times to try")

    sub.add_parser("examples", parents=[common], help="replay the three discrete counterexamples")

    p = sub.add_parser("fdcheck", parents=[common], help="finite-difference check of a variation vector")
    p.add_argument("--kind", choices=("rs", "rd", "init"), help="needle kind (default rs)")
    p.add_argument("--time", type=float, help="needle time (default: first suitable point)")
    p.add_argument("--direction", type=float, nargs="+", help="y, z or dq_a (default chosen from Ω)")
    return parser


def parse_config(argv: list[str]) -> RunConfig:
    args = build_parser().parse_args(argv)
    values: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        values.update(data)
    for key, val in vars(args).items():
        if key in CONFIG_KEYS and val is not None:
            values[key] = val
    if "builtin" in values and "problem" in values and args.builtin is not None:
        values.pop("problem")
    if "builtin" in values and "problem" in values and args.problem is not None:
        values.pop("builtin")
    try:
        return RunConfig(command=args.command, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# -----------------------------------------------------------------------------
# helpers
# -----------------------------------------------------------------------------


def load_problem(cfg: RunConfig) -> ControlProblem:
    if cfg.builtin is not None:
        return registry.get_problem(cfg.builtin)
    if cfg.problem is None:
        raise ConfigError("a problem is required (--builtin NAME or --problem PATH)")
    try:
        text = Path(cfg.problem).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read problem: {exc}") from None
    if not text.strip():
        raise ConfigError("problem file is empty")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"problem file is not JSON: {exc}") from None
    if isinstance(data, dict):
        data.pop("schema", None)
    return problem_from_json(data)


def _label(cfg: RunConfig, problem: ControlProblem) -> str:
    return cfg.builtin or problem.name or Path(cfg.problem).stem


def load_control(cfg: RunConfig, problem: ControlProblem):
    if cfg.control is not None:
        path = Path(cfg.control)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read control: {exc}") from None
        if path.suffix.lower() == ".csv":
            return tio.gridfunction_from_csv(text)
        data = json.loads(text)
        return GridFunction.from_json(data.get("control", data))
    if cfg.builtin is not None:
        return registry.default_control(cfg.builtin, cfg.h)
    v = problem.omega.nearest(np.zeros(problem.m))
    return lambda t: v


def load_extremal(cfg: RunConfig, problem: ControlProblem) -> Extremal:
    if cfg.extremal == "paper":
        if cfg.builtin is None:
            raise ConfigError("--extremal paper needs a builtin problem")
        return registry.reference_extremal(cfg.builtin, cfg.h)
    try:
        data = json.loads(Path(cfg.extremal).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read extremal: {exc}") from None
    data = data.get("extremal", data)
    try:
        return extremal_from_json(problem, data)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed extremal: {exc}") from None


def extremal_from_json(problem: ControlProblem, data: dict) -> Extremal:
    grid = np.asarray(data["grid"], float)
    tr = Trajectory(
        problem.timescale,
        GridFunction(grid, data["q"]),
        GridFunction(grid, np.reshape(data["q0"], (-1, 1))),
        GridFunction(grid, data["u"]),
    )
    return Extremal(tr, GridFunction(grid, data["p"]), data["p0"], data["psi"])


def emit(cfg: RunConfig, name: str, payload: dict | None = None, csv_text: str | None = None) -> None:
    """Write one artifact as ``DIR/name.{json,csv}`` or to stdout."""
    if cfg.format == "csv" and csv_text is not None:
        text, ext = csv_text, "csv"
    else:
        text, ext = tio.dumps(payload or {}), "json"
    if cfg.out is None:
        sys.stdout.write(text)
        return
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.{ext}").write_text(text, encoding="utf-8")


def _fmt(x) -> str:
    arr = np.atleast_1d(np.asarray(x, float)).ravel()
    parts = [f"{v:.6g}" for v in arr]
    return parts[0] if len(parts) == 1 else "(" + ", ".join(parts) + ")"


# -----------------------------------------------------------------------------
# commands
# -----------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> int:
    problem = load_problem(cfg)
    traj = simulate(problem, load_control(cfg, problem), h=cfg.h)
    payload = {"command": "simulate", "problem": _label(cfg, problem), "cost": traj.cost,
               "trajectory": {"grid": traj.grid, "q": traj.q.values, "q0": traj.q0.values[:, 0], "u": traj.u.values}}
    emit(cfg, f"simulate-{_label(cfg, problem)}", payload, tio.trajectory_to_csv(traj))
    return EXIT_OK


def cmd_certify(cfg: RunConfig) -> int:
    problem = load_problem(cfg)
    ext = load_extremal(cfg, problem)
    rep = certify(problem, ext, cfg.tol_pmp, cfg.seed)
    payload = {"command": "certify", "problem": _label(cfg, problem), "exit_code": rep.exit_code, "report": rep.to_json()}
    table = GridFunction(np.array([r["t"] for r in rep.hamiltonian_table]),
                         np.array([[r["max_h"]] for r in rep.hamiltonian_table]))
    emit(cfg, f"certify-{_label(cfg, problem)}", payload, tio.gridfunction_to_csv(table, ["t", "max_h"]))
    return rep.exit_code


def cmd_solve(cfg: RunConfig) -> int:
    problem = load_problem(cfg)
    label = _label(cfg, problem)
    if cfg.method == "gradient":
        u, history = projected_gradient(problem, load_control(cfg, problem), problem.q_a, steps=cfg.steps, h=cfg.h)
        payload = {"command": "solve", "method": "gradient", "problem": label, "control": u.to_json(),
                   "cost": history[-1], "history": history}
        emit(cfg, f"solve-{label}", payload, tio.gridfunction_to_csv(u, ["t"] + [f"u_{i}" for i in range(problem.m)]))
        return EXIT_OK
    guess = registry.shooting_guess(cfg.builtin) if cfg.builtin else ShootingGuess()
    res = shooting_solve(problem, guess, ShootingOptions(h=cfg.h, seed=cfg.seed))
    rep = certify(problem, res.extremal, cfg.tol_pmp, cfg.seed)
    payload = {
        "command": "solve", "method": "shooting", "problem": label,
        "solver": {"defect": res.defect, "evaluations": res.nfev, "jacobian_cond": res.jacobian_cond},
        "extremal": res.extremal.to_json(), "certificate": rep.to_json(), "exit_code": rep.exit_code,
    }
    emit(cfg, f"solve-{label}", payload)
    return rep.exit_code


def _control_values(problem: ControlProblem, points: int) -> np.ndarray:
    omega = problem.omega
    if hasattr(omega, "points"):
        return np.asarray(omega.points, float)
    lo, hi = omega.bounding_box(1.0)
    axes = [np.linspace(a, b, points) for a, b in zip(lo, hi)]
    cand = np.array(list(itertools.product(*axes)))
    return np.array([v for v in cand if omega.contains(v)])


def cmd_oracle(cfg: RunConfig) -> int:
    problem = load_problem(cfg)
    values = _control_values(problem, cfg.grid_points)
    cands = cfg.b_candidates
    if cands is None and problem.free_time:
        ts = problem.timescale
        pts = sample_grid(ts, problem.a, ts.max, 1.0)
        # final times whose enumeration stays within the brute-force budget
        cands = [t for k, t in enumerate(pts[1:], 1) if len(values) ** k <= MAX_COMBINATIONS and k <= MAX_STEPS]
    res = brute_force_discrete(problem, values if problem.m > 1 else values[:, 0], b_candidates=cands)
    payload = {"command": "oracle", "problem": _label(cfg, problem), "u": res.u, "cost": res.cost, "b": res.b,
               "per_b": {format(k, "g"): v for k, v in res.per_b.items()}}
    emit(cfg, f"oracle-{_label(cfg, problem)}", payload, tio.gridfunction_to_csv(res.control(problem)))
    return EXIT_OK


def examples_summary(seed: int = 0) -> list[dict]:
    rows = []
    for name in registry.PAPER_EXAMPLES:
        problem = registry.get_problem(name)
        ext = registry.reference_extremal(name)
        rep = certify(problem, ext, seed=seed)
        rows.append({
            "example": name,
            "u": ext.trajectory.u.values[:-1, 0],
            "p0": ext.p0,
            "psi": ext.psi,
            "p": ext.p.values[:, 0],
            "max_h": {format(r["t"], "g"): r["max_h"] for r in rep.hamiltonian_table},
            "h_star": {format(r["t"], "g"): r["h_star"] for r in rep.hamiltonian_table if "h_star" in r},
            "verdicts": rep.verdicts,
        })
    return rows


def format_examples(rows: list[dict]) -> str:
    head = f"{'example':<8} {'u*':<12} {'p0':>5} {'psi':>5}  {'p':<14} maximized H"
    lines = [head, "-" * len(head)]
    for r in rows:
        hs = ", ".join(f"maxH({t})={v:.6g}" if v != int(v) else f"maxH({t})={v:.1f}" for t, v in r["max_h"].items())
        lines.append(f"{r['example']:<8} {_fmt(r['u']):<12} {r['p0']:>5.3g} {_fmt(r['psi']):>5}  {_fmt(r['p']):<14} {hs}")
    return "\n".join(lines) + "\n"


def cmd_examples(cfg: RunConfig) -> int:
    rows = examples_summary(cfg.seed)
    table = format_examples(rows)
    if cfg.out is None:
        sys.stdout.write(table)
    else:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "examples.txt").write_text(table, encoding="utf-8")
        (out / "examples.json").write_text(tio.dumps({"command": "examples", "rows": rows}), encoding="utf-8")
    return EXIT_OK


def _default_needle(cfg: RunConfig, problem: ControlProblem, u):
    ts = problem.timescale
    lo, hi = problem.omega.bounding_box(1.0)
    if cfg.kind == "init":
        return None, np.ones(problem.n) if cfg.direction is None else cfg.direction
    if cfg.kind == "rs":
        rs = ts.rs_points(problem.a, problem.b)
        if cfg.time is None and not rs:
            raise ConfigError("the time scale has no right-scattered point before b")
        t = rs[0] if cfg.time is None else cfg.time
        if cfg.direction is not None:
            return t, cfg.direction
        ur = control_on_grid(problem, u, h=cfg.h).left_value(t)
        return t, problem.omega.nearest(np.where(hi - ur > ur - lo, hi, lo))
    if cfg.time is None:
        grid = sample_grid(ts, problem.a, problem.b, cfg.h)
        dense = [t for t in grid[:-1] if not ts.is_rs(t)]
        if not dense:
            raise ConfigError("the time scale has no right-dense point before b")
        t = dense[len(dense) // 4]
    else:
        t = cfg.time
    return t, hi if cfg.direction is None else cfg.direction


def cmd_fdcheck(cfg: RunConfig) -> int:
    problem = load_problem(cfg)
    u = load_control(cfg, problem)
    t, d = _default_needle(cfg, problem, u)
    if cfg.kind == "rs":
        res = fd_check_rs(problem, u, None, t, d, h=cfg.h)
    elif cfg.kind == "rd":
        res = fd_check_rd(problem, u, None, t, d, h=cfg.h)
    else:
        res = fd_check_init(problem, u, None, d, h=cfg.h)
    payload = {"command": "fdcheck", "problem": _label(cfg, problem), "kind": cfg.kind, "time": t,
               "direction": np.asarray(d, float), "order": res.order, "steps": res.steps, "errors": res.errors}
    emit(cfg, f"fdcheck-{_label(cfg, problem)}-{cfg.kind}", payload, tio.fd_result_to_csv(res))
    return EXIT_OK


HANDLERS = {
    "simulate": cmd_simulate,
    "certify": cmd_certify,
    "solve": cmd_solve,
    "oracle": cmd_oracle,
    "examples": cmd_examples,
    "fdcheck": cmd_fdcheck,
}


def run(cfg: RunConfig) -> int:
    try:
        return HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"tspmp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SOLVER_ERRORS as exc:
        print(f"tspmp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except TspmpError as exc:
        print(f"tspmp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("TSPMP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"tspmp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
