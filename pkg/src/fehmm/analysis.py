"""Error norms, empirical micro-error estimates, rate fits and sweep drivers.

The CSV emitted here is the contract consumed by the plotting front end:

    run_id,example,epsilon,delta,sigma,H,h,tau,theta,err_l2,err_h1,err_triple,ehmm,wall_ms

Floats are written with shortest round-trip precision, rows sorted by the
parameter tuple, lines terminated with a bare newline.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .fem import FeFunction, interpolate, norms
from .macro import MacroConfig, MacroTrajectory, OracleParams
from .micro import CellCache
from .oracle import PeriodicCellFunction, a0_oracle_periodic

CSV_HEADER = "run_id,example,epsilon,delta,sigma,H,h,tau,theta,err_l2,err_h1,err_triple,ehmm,wall_ms"


def triple_norm(states: Sequence[FeFunction] | MacroTrajectory, tau: float | None = None) -> float:
    """Discrete space-time energy norm ( sum_k tau |grad Phi^k|_0^2 )^(1/2), k >= 1."""
    if isinstance(states, MacroTrajectory):
        tau = states.tau
        states = states.states
    if tau is None:
        raise ValueError("tau is required when passing a bare state sequence")
    total = 0.0
    for u in states[1:]:
        total += tau * norms(u)["h1_semi"] ** 2
    return math.sqrt(total)


def _central_derivative(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    step = 1e-6 * np.maximum(1.0, np.abs(x))
    return (np.asarray(f(x + step)) - np.asarray(f(x - step))) / (2.0 * step)


@dataclass
class FinalErrors:
    err_l2: float
    err_h1: float
    err_triple: float


def errors_vs_exact(
    traj: MacroTrajectory,
    exact: Callable[[float, np.ndarray], np.ndarray],
    exact_dx: Callable[[float, np.ndarray], np.ndarray] | None = None,
) -> FinalErrors:
    """Errors at the final time plus the triple norm of the full discrepancy.

    L2/H1 errors integrate (U_H^N - U0(t_N)) with 4-point Gauss per element;
    the spatial derivative of the exact solution is differentiated centrally
    when no closed form is supplied.  The triple norm compares against the
    nodal interpolant I_H U0(t_k) to stay inside the discrete space (this
    adds an O(H) interpolation contribution).
    """
    space = traj.space
    t_final = traj.times[-1]
    from .fem import difference_norms

    if exact_dx is None:
        dx = lambda xs: _central_derivative(lambda z: exact(t_final, z), xs)
    else:
        dx = lambda xs: exact_dx(t_final, xs)
    final = difference_norms(traj.states[-1], lambda xs: exact(t_final, xs), dx, n_quad=4)
    diffs = []
    for k, u in enumerate(traj.states):
        t_k = traj.times[k]
        interp = interpolate(space, lambda xs: exact(t_k, xs))
        diffs.append(FeFunction(space, u.coefficients - interp.coefficients))
    return FinalErrors(
        err_l2=final["l2"],
        err_h1=final["h1_semi"],
        err_triple=triple_norm(diffs, traj.tau),
    )


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    per_interval: tuple[float, ...]
    window: tuple[int, int]


def fit_rate(points: Iterable[tuple[float, float]], window: int | None = None) -> FitResult:
    """Least-squares slope of log(error) against log(parameter).

    ``window`` keeps only that many of the smallest-parameter points (the
    paper's figures are pre-asymptotic at coarse resolutions).  Requires at
    least three points after windowing and strictly positive data.
    """
    pts = sorted(points)
    if window is not None:
        if window < 3:
            raise ValueError("fit window must keep at least 3 points")
        pts = pts[: int(window)]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points to fit a rate, got {len(pts)}")
    xs = np.array([p for p, _ in pts], dtype=float)
    ys = np.array([e for _, e in pts], dtype=float)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("rate fits need positive parameters and errors")
    lx, ly = np.log(xs), np.log(ys)
    design = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    per_interval = tuple(
        float((ly[i + 1] - ly[i]) / (lx[i + 1] - lx[i])) for i in range(len(pts) - 1)
    )
    return FitResult(float(slope), float(intercept), per_interval, (0, len(pts)))


def ehmm_estimate(cfg: MacroConfig, oracle: OracleParams | None = None) -> float:
    """Worst-case |A0 - A_Hh| over all macro time levels and barycenters.

    Both sides collapse along coefficient-independent axes, so for the
    locally periodic test coefficients this costs a handful of solves.
    """
    oracle = oracle or cfg.oracle
    cell_cache = CellCache(cfg.coefficient)
    oracle_values: dict[tuple, float] = {}
    worst = 0.0
    barycenters = cfg.space().mesh.barycenters
    for n in range(1, cfg.n_steps + 1):
        t_n = n * cfg.tau
        for x_K in barycenters:
            okey = (
                t_n if cfg.coefficient.depends_on_t else None,
                x_K if cfg.coefficient.depends_on_x else None,
            )
            if okey not in oracle_values:
                oracle_values[okey] = a0_oracle_periodic(
                    cfg.coefficient,
                    t=t_n,
                    x=x_K,
                    n_y=oracle.n_y,
                    n_s=oracle.n_s,
                    period_tol=oracle.period_tol,
                    max_periods=oracle.max_periods,
                )
            a_hh = cell_cache.get_or_compute(
                cfg.micro.cell_config(cfg.coefficient, cfg.epsilon, t_n, x_K)
            )
            worst = max(worst, abs(oracle_values[okey] - a_hh))
    return worst


def corrector_diagnostic(
    traj: MacroTrajectory,
    chi: PeriodicCellFunction,
    epsilon: float,
    time_index: int = -1,
    refine: int = 8,
) -> FeFunction:
    """First-order reconstruction U_H + eps * chi(x/eps) * dU_H/dx on a finer grid.

    Purely diagnostic; the element-wise macro gradient modulates the unit-cell
    corrector.  The output grid refines the macro grid by ``refine``.
    """
    from .fem import FeSpace, Mesh1D

    u = traj.states[time_index]
    macro_mesh = u.space.mesh
    fine_space = FeSpace(
        Mesh1D(macro_mesh.a, macro_mesh.b, macro_mesh.n_elems * refine),
        degree=1,
        dirichlet_zero=False,
    )
    xs = fine_space.dof_positions
    values = u(xs) + epsilon * chi(xs / epsilon) * u.derivative_at(xs)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite value in corrector reconstruction")
    return FeFunction(fine_space, values)


# ---------------------------------------------------------------------------
# Sweep records and reports


@dataclass
class ErrorRecord:
    run_id: str
    example: str
    epsilon: float
    delta: float
    sigma: float
    H: float
    h: float
    tau: float
    theta: float
    err_l2: float
    err_h1: float
    err_triple: float
    ehmm: float | None
    wall_ms: int

    def parameter_tuple(self) -> tuple:
        return (self.epsilon, self.delta, self.sigma, self.H, self.h, self.tau, self.theta)

    def csv_row(self) -> str:
        def fmt(v) -> str:
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)

        return ",".join(
            fmt(v)
            for v in (
                self.run_id,
                self.example,
                self.epsilon,
                self.delta,
                self.sigma,
                self.H,
                self.h,
                self.tau,
                self.theta,
                self.err_l2,
                self.err_h1,
                self.err_triple,
                self.ehmm,
                self.wall_ms,
            )
        )


@dataclass
class ConvergenceReport:
    parameter: str
    records: list[ErrorRecord] = field(default_factory=list)
    fits: dict[str, FitResult] = field(default_factory=dict)

    def sorted_records(self) -> list[ErrorRecord]:
        return sorted(self.records, key=lambda r: r.parameter_tuple())

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        lines.extend(r.csv_row() for r in self.sorted_records())
        return "\n".join(lines) + "\n"

    def fit(self, values: Sequence[float], window: int | None = 3) -> None:
        """Fit each error column against the swept values (finest `window` points)."""
        records = self.sorted_records()
        for column in ("err_l2", "err_h1", "err_triple", "ehmm"):
            pts = []
            for rec, v in zip(records, sorted(values)):
                err = getattr(rec, column)
                if err is not None and err > 0:
                    pts.append((v, err))
            if len(pts) >= 3:
                try:
                    self.fits[column] = fit_rate(pts, window=window)
                except ValueError:
                    continue

    def to_json(self) -> str:
        payload = {
            "parameter": self.parameter,
            "rows": len(self.records),
            "fits": {
                col: {
                    "slope": f.slope,
                    "intercept": f.intercept,
                    "per_interval": list(f.per_interval),
                }
                for col, f in self.fits.items()
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def run_sweep(
    tasks: Sequence[Callable[[], ErrorRecord]],
    threads: int = 1,
    parameter: str = "",
) -> ConvergenceReport:
    """Execute independent sweep cells, preserving a deterministic record order."""
    report = ConvergenceReport(parameter=parameter)
    if threads <= 1:
        report.records = [task() for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            report.records = list(pool.map(lambda task: task(), tasks))
    return report


def timed_ms(fn: Callable[[], object]) -> tuple[object, int]:
    tic = time.perf_counter()
    out = fn()
    return out, int(round(1000.0 * (time.perf_counter() - tic)))
