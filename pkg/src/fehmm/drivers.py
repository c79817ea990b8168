"""Builds sweep tasks from a run configuration and collects error records."""

from __future__ import annotations

import copy
import time
from typing import Callable

from .analysis import ConvergenceReport, ErrorRecord, errors_vs_exact, ehmm_estimate, run_sweep, triple_norm
from .config import ConfigError, RunConfig, parse_config
from .fem import FeFunction
from .fine import compare_hmm_vs_fine, run_fine
from .macro import run_hmm
from .micro import CellConfig


def _effective_cell_steps(cfg: RunConfig) -> tuple[float, float]:
    """(h_eff, theta_eff) after snapping, for honest record columns."""
    cell = CellConfig(
        coefficient=cfg.coefficient,
        t_n=0.0,
        x_K=0.5 * (cfg.omega[0] + cfg.omega[1]),
        delta=cfg.micro.delta,
        sigma=cfg.micro.sigma,
        epsilon=cfg.epsilon,
        h=cfg.micro.h,
        theta=cfg.micro.theta,
        degree=cfg.micro.degree,
    )
    return cell.h_eff, cell.theta_eff


def _override_document(cfg: RunConfig, parameter: str, value: float) -> RunConfig:
    doc = copy.deepcopy(cfg.resolved_document())
    doc.pop("sweep", None)
    doc.get("output", {}).pop("run_id", None)  # each cell hashes its own config
    if parameter == "H":
        doc["macro"].pop("n_elems", None)
        doc["macro"]["H"] = value
    elif parameter == "tau":
        doc["macro"].pop("n_steps", None)
        doc["macro"]["tau"] = value
    elif parameter == "h":
        doc["micro"]["h"] = value
    elif parameter == "theta":
        doc["micro"]["theta"] = value
    elif parameter == "epsilon":
        doc["problem"]["epsilon"] = value
    else:
        raise ValueError(f"unsupported macro sweep parameter {parameter!r}")
    return parse_config(doc)


def _macro_record(cfg: RunConfig, example: str, compute_ehmm: bool) -> ErrorRecord:
    if cfg.exact is None:
        raise ConfigError(["problem.exact_solution: required for convergence sweeps"])
    tic = time.perf_counter()
    traj = run_hmm(cfg.macro_config())
    errors = errors_vs_exact(traj, cfg.exact)
    ehmm = ehmm_estimate(cfg.macro_config(), cfg.oracle) if compute_ehmm else None
    wall_ms = int(round(1000.0 * (time.perf_counter() - tic)))
    h_eff, theta_eff = _effective_cell_steps(cfg)
    return ErrorRecord(
        run_id=cfg.run_id,
        example=example,
        epsilon=cfg.epsilon,
        delta=cfg.micro.delta,
        sigma=cfg.micro.sigma,
        H=(cfg.omega[1] - cfg.omega[0]) / cfg.n_elems,
        h=h_eff,
        tau=cfg.final_time / cfg.n_steps,
        theta=theta_eff,
        err_l2=errors.err_l2,
        err_h1=errors.err_h1,
        err_triple=errors.err_triple,
        ehmm=ehmm,
        wall_ms=wall_ms,
    )


def macro_sweep(
    cfg: RunConfig, example: str = "custom", threads: int = 1, compute_ehmm: bool = False
) -> ConvergenceReport:
    """Sweep H, tau, h, theta or epsilon through full macro solves."""
    if cfg.sweep_parameter is None:
        raise ConfigError(["sweep: section required for the convergence subcommand"])
    parameter = cfg.sweep_parameter
    tasks: list[Callable[[], ErrorRecord]] = []
    for value in cfg.sweep_values:
        sub = _override_document(cfg, parameter, value)
        tasks.append(lambda sub=sub: _macro_record(sub, example, compute_ehmm))
    report = run_sweep(tasks, threads=threads, parameter=parameter)
    report.fit(cfg.sweep_values, window=3)
    return report


def fine_stagnation_sweep(cfg: RunConfig, example: str = "motivation", threads: int = 1) -> ConvergenceReport:
    """Sweep the fine mesh width against a fixed resolved reference run.

    Records carry the L2/H1 distance at the final time between each fine run
    and the reference computed on ``sweep.reference_n_elems`` elements with
    the same time step, plus the triple norm of the difference trajectory.
    """
    if cfg.sweep_parameter != "h_f":
        raise ConfigError(["sweep.parameter: fine sweeps use parameter 'h_f'"])
    if cfg.sweep_reference_n_elems is None:
        raise ConfigError(["sweep.reference_n_elems: required for fine sweeps"])
    width = cfg.omega[1] - cfg.omega[0]
    reference = run_fine(cfg.fine_config(n_elems=cfg.sweep_reference_n_elems))

    def task(value: float) -> ErrorRecord:
        tic = time.perf_counter()
        n_elems = max(1, round(width / value))
        if cfg.sweep_reference_n_elems % n_elems != 0:
            raise ConfigError(
                [f"sweep.values: reference mesh is not a refinement of h_f={value!r}"]
            )
        traj = run_fine(cfg.fine_config(n_elems=n_elems))
        final = compare_hmm_vs_fine(traj, reference, cfg.final_time, epsilon=cfg.epsilon)
        ref_space = reference.space
        diffs = [
            FeFunction(ref_space, u(ref_space.dof_positions) - uref.coefficients)
            for u, uref in zip(traj.states, reference.states)
        ]
        wall_ms = int(round(1000.0 * (time.perf_counter() - tic)))
        return ErrorRecord(
            run_id=cfg.run_id,
            example=example,
            epsilon=cfg.epsilon,
            delta=cfg.micro.delta,
            sigma=cfg.micro.sigma,
            H=width / n_elems,
            h=width / n_elems,
            tau=cfg.final_time / cfg.n_steps,
            theta=cfg.final_time / cfg.n_steps,
            err_l2=final["l2"],
            err_h1=final["h1"],
            err_triple=triple_norm(diffs, reference.tau),
            ehmm=None,
            wall_ms=wall_ms,
        )

    tasks = [lambda v=v: task(v) for v in cfg.sweep_values]
    return run_sweep(tasks, threads=threads, parameter="h_f")
