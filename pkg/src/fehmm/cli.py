"""Command-line entry points.

Subcommands: homogenize, cell, solve, fine, convergence, ehmm, preset.
Exit codes: 0 success, 1 usage/config error, 2 numerical failure.  Every run
writes a manifest that is itself a valid config reproducing the run.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import CSV_HEADER, ConvergenceReport, ehmm_estimate, errors_vs_exact
from .config import ConfigError, RunConfig, load_config
from .drivers import fine_stagnation_sweep, macro_sweep
from .expressions import EvaluationError
from .fem import SingularMatrixError
from .fine import MemoryCapError, NonNestedGridsError, run_fine
from .macro import MacroTrajectory, run_hmm
from .micro import CellConfig, GridMismatchError, HomogenizedBoundsError, solve_cell
from .oracle import OracleConvergenceError, a0_oracle_periodic
from .presets import PRESET_NAMES, preset_documents

NUMERICAL_ERRORS = (
    SingularMatrixError,
    HomogenizedBoundsError,
    OracleConvergenceError,
    MemoryCapError,
    NonNestedGridsError,
    GridMismatchError,
    EvaluationError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we reserve 2 for numerics
        raise UsageError(message)


def _write_text(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content)


def _write_manifest(cfg: RunConfig, out_dir: Path, name: str = "manifest.json") -> None:
    _write_text(out_dir / name, cfg.manifest_json())


def _trajectory_csv(traj: MacroTrajectory) -> str:
    xs = traj.space.mesh.nodes if traj.space.degree == 1 else traj.space.dof_positions
    lines = ["n,t_n,node_index,x,u"]
    for n, state in enumerate(traj.states):
        t_n = n * traj.tau
        full = state.full_coefficients()
        for j, (x, u) in enumerate(zip(xs, full)):
            lines.append(f"{n},{t_n!r},{j},{x!r},{u!r}")
    return "\n".join(lines) + "\n"


def _cell_csv(cfg: RunConfig, t_n: float, x_K: float) -> str:
    cell = CellConfig(
        coefficient=cfg.coefficient,
        t_n=t_n,
        x_K=x_K,
        delta=cfg.micro.delta,
        sigma=cfg.micro.sigma,
        epsilon=cfg.epsilon,
        h=cfg.micro.h,
        theta=cfg.micro.theta,
        degree=cfg.micro.degree,
    )
    solution = solve_cell(cell)
    xs = solution.eta[0].space.dof_positions
    # report with boundary dofs for a complete picture of the window
    space = solution.eta[0].space
    xs_full = np.linspace(space.mesh.a, space.mesh.b, space.n_dofs_full)
    lines = ["k,s_k,dof_index,x,eta_value"]
    for k, eta in enumerate(solution.eta):
        s_k = k * cell.theta_eff
        full = eta.full_coefficients()
        for j, (x, value) in enumerate(zip(xs_full, full)):
            lines.append(f"{k},{s_k!r},{j},{x!r},{value!r}")
    return "\n".join(lines) + "\n"


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("HMM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"HMM_THREADS must be an integer, got {env!r}")
    return 1


def _summary_json(cfg: RunConfig, traj: MacroTrajectory) -> str:
    payload: dict = {
        "run_id": cfg.run_id,
        "n_elems": cfg.n_elems,
        "n_steps": cfg.n_steps,
        "cell_cache": {"hits": traj.cache_hits, "misses": traj.cache_misses},
    }
    if cfg.exact is not None:
        errors = errors_vs_exact(traj, cfg.exact)
        payload["final_errors"] = {
            "l2": errors.err_l2,
            "h1_semi": errors.err_h1,
            "triple": errors.err_triple,
        }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _cmd_homogenize(args) -> int:
    cfg = load_config(args.config)
    value = a0_oracle_periodic(
        cfg.coefficient,
        t=args.t,
        x=args.x if args.x is not None else 0.5 * (cfg.omega[0] + cfg.omega[1]),
        n_y=cfg.oracle.n_y,
        n_s=cfg.oracle.n_s,
        period_tol=cfg.oracle.period_tol,
        max_periods=cfg.oracle.max_periods,
    )
    print(repr(value))
    if args.out:
        out = Path(args.out)
        _write_manifest(cfg, out)
        _write_text(out / "a0.json", json.dumps({"a0": value, "run_id": cfg.run_id}) + "\n")
    return 0


def _cmd_cell(args) -> int:
    cfg = load_config(args.config)
    x_K = args.x_k if args.x_k is not None else 0.5 * (cfg.omega[0] + cfg.omega[1])
    csv_text = _cell_csv(cfg, args.t_n, x_K)
    out = Path(args.out)
    _write_manifest(cfg, out)
    _write_text(out / "cell.csv", csv_text)
    print(out / "cell.csv")
    return 0


def _cmd_solve(args) -> int:
    cfg = load_config(args.config)
    traj = run_hmm(cfg.macro_config())
    out = Path(args.out)
    _write_manifest(cfg, out)
    _write_text(out / "trajectory.csv", _trajectory_csv(traj))
    _write_text(out / "summary.json", _summary_json(cfg, traj))
    print(out / "trajectory.csv")
    return 0


def _cmd_fine(args) -> int:
    cfg = load_config(args.config)
    traj = run_fine(cfg.fine_config())
    out = Path(args.out)
    _write_manifest(cfg, out)
    _write_text(out / "trajectory.csv", _trajectory_csv(traj))
    _write_text(out / "summary.json", _summary_json(cfg, traj))
    print(out / "trajectory.csv")
    return 0


def _run_sweep_to_files(cfg: RunConfig, example: str, out: Path, threads: int, compute_ehmm: bool) -> None:
    if cfg.sweep_parameter == "h_f":
        report = fine_stagnation_sweep(cfg, example=example, threads=threads)
    else:
        report = macro_sweep(cfg, example=example, threads=threads, compute_ehmm=compute_ehmm)
    _write_text(out / "convergence.csv", report.to_csv())
    _write_text(out / "report.json", report.to_json())


def _cmd_convergence(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    _write_manifest(cfg, out)
    _run_sweep_to_files(cfg, args.example, out, _threads(args), compute_ehmm=False)
    print(out / "convergence.csv")
    return 0


def _cmd_ehmm(args) -> int:
    cfg = load_config(args.config)
    if cfg.sweep_parameter is None:
        value = ehmm_estimate(cfg.macro_config(), cfg.oracle)
        print(repr(value))
        if args.out:
            out = Path(args.out)
            _write_manifest(cfg, out)
            _write_text(out / "ehmm.json", json.dumps({"ehmm": value, "run_id": cfg.run_id}) + "\n")
        return 0
    out = Path(args.out) if args.out else Path(cfg.output_dir)
    _write_manifest(cfg, out)
    _run_sweep_to_files(cfg, args.example, out, _threads(args), compute_ehmm=True)
    print(out / "convergence.csv")
    return 0


def _cmd_preset(args) -> int:
    try:
        documents = preset_documents(args.name)
    except KeyError as err:
        raise UsageError(str(err))
    from .config import parse_config

    out = Path(args.out)
    threads = _threads(args)
    merged = ConvergenceReport(parameter="")
    for i, doc in enumerate(documents):
        cfg = parse_config(doc)
        suffix = f"-{cfg.epsilon!r}" if len(documents) > 1 else ""
        _write_manifest(cfg, out, name=f"manifest{suffix}.json")
        if cfg.sweep_parameter == "h_f":
            report = fine_stagnation_sweep(cfg, example=args.name, threads=threads)
        else:
            report = macro_sweep(cfg, example=args.name, threads=threads, compute_ehmm=False)
            _write_text(out / "report.json", report.to_json())
        merged.parameter = report.parameter
        merged.records.extend(report.records)
        merged.fits.update(report.fits)
    _write_text(out / f"{args.name}.csv", merged.to_csv())
    print(out / f"{args.name}.csv")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fehmm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True, threads=False):
        p.add_argument("--config", required=True, help="path to a JSON run configuration")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        else:
            p.add_argument("--out", default=None, help="optional output directory")
        if threads:
            p.add_argument("--threads", type=int, default=None, help="sweep parallelism (or HMM_THREADS)")

    p = sub.add_parser("homogenize", help="print the periodic-cell homogenized coefficient")
    common(p, needs_out=False)
    p.add_argument("--t", type=float, default=0.0, help="slow time argument (default 0)")
    p.add_argument("--x", type=float, default=None, help="slow space argument (default domain center)")
    p.set_defaults(fn=_cmd_homogenize)

    p = sub.add_parser("cell", help="dump one micro cell corrector trajectory as CSV")
    common(p)
    p.add_argument("--t-n", dest="t_n", type=float, default=0.0, help="macro time level")
    p.add_argument("--x-k", dest="x_k", type=float, default=None, help="element barycenter")
    p.set_defaults(fn=_cmd_cell)

    p = sub.add_parser("solve", help="run the macro solver, write the trajectory CSV")
    common(p)
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("fine", help="run the single-scale reference solver")
    common(p)
    p.set_defaults(fn=_cmd_fine)

    p = sub.add_parser("convergence", help="run the configured parameter sweep")
    common(p, threads=True)
    p.add_argument("--example", default="custom", help="label for the CSV example column")
    p.set_defaults(fn=_cmd_convergence)

    p = sub.add_parser("ehmm", help="estimate the worst-case micro-coefficient error")
    common(p, needs_out=False, threads=True)
    p.add_argument("--example", default="custom", help="label for the CSV example column")
    p.set_defaults(fn=_cmd_ehmm)

    p = sub.add_parser("preset", help=f"run a canned study: {', '.join(PRESET_NAMES)}")
    p.add_argument("name", help="preset name")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(fn=_cmd_preset)

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except (UsageError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except NUMERICAL_ERRORS as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
