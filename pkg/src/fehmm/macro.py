"""Macro solver: P1 elements, implicit Euler, effective coefficients per element.

One time step solves (M + tau B(t_n)) U^n = M U^{n-1} + tau F^n where the
bilinear form B uses one-point barycenter quadrature, i.e. a piecewise
constant effective coefficient A(t_n, x_K) per element.  Depending on the
configured mode that value comes from the micro cell solves (``hmm``), a
user-supplied constant (``fixed_a0``) or the periodic-cell reference
(``oracle_a0``).
"""

from __future__ import annotations

import threading
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .expressions import MultiscaleCoefficient
from .fem import (
    FeFunction,
    FeSpace,
    Mesh1D,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    BandedMatrix,
    l2_project,
    solve_banded,
)
from .micro import CellCache, CellConfig


@dataclass(frozen=True)
class MicroParams:
    """Micro discretization template shared by all cells of one macro run."""

    delta: float
    sigma: float
    h: float
    theta: float
    degree: int = 2

    def cell_config(
        self, coefficient: MultiscaleCoefficient, epsilon: float, t_n: float, x_K: float
    ) -> CellConfig:
        return CellConfig(
            coefficient=coefficient,
            t_n=t_n,
            x_K=x_K,
            delta=self.delta,
            sigma=self.sigma,
            epsilon=epsilon,
            h=self.h,
            theta=self.theta,
            degree=self.degree,
        )


@dataclass(frozen=True)
class OracleParams:
    n_y: int = 256
    n_s: int = 256
    period_tol: float = 1e-8
    max_periods: int = 64


@dataclass(frozen=True)
class CoefficientMode:
    """How the macro solver obtains A(t_n, x_K)."""

    kind: str  # "hmm" | "fixed_a0" | "oracle_a0"
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("hmm", "fixed_a0", "oracle_a0"):
            raise ValueError(f"unknown coefficient mode {self.kind!r}")
        if self.kind == "fixed_a0" and self.value is None:
            raise ValueError("fixed_a0 mode needs a value")

    @classmethod
    def hmm(cls) -> "CoefficientMode":
        return cls("hmm")

    @classmethod
    def fixed(cls, value: float) -> "CoefficientMode":
        return cls("fixed_a0", value=value)

    @classmethod
    def oracle(cls) -> "CoefficientMode":
        return cls("oracle_a0")


@dataclass
class MacroConfig:
    omega: tuple[float, float]
    final_time: float
    n_elems: int
    n_steps: int
    epsilon: float
    coefficient: MultiscaleCoefficient
    rhs: Callable[[float, np.ndarray], np.ndarray]
    initial: Callable[[np.ndarray], np.ndarray]
    micro: MicroParams
    mode: CoefficientMode = field(default_factory=CoefficientMode.hmm)
    oracle: OracleParams = field(default_factory=OracleParams)

    def __post_init__(self):
        if self.n_elems < 1 or self.n_steps < 1:
            raise ValueError("n_elems and n_steps must be positive")
        if self.mode.kind == "hmm" and self.micro.delta > self.H:
            warnings.warn(
                f"cell size delta={self.micro.delta:g} exceeds macro mesh width "
                f"H={self.H:g}; the method assumes H >> delta",
                stacklevel=2,
            )

    @property
    def H(self) -> float:
        return (self.omega[1] - self.omega[0]) / self.n_elems

    @property
    def tau(self) -> float:
        return self.final_time / self.n_steps

    def space(self) -> FeSpace:
        return FeSpace(Mesh1D(self.omega[0], self.omega[1], self.n_elems), degree=1, dirichlet_zero=True)


@dataclass
class MacroTrajectory:
    """Nodal states U^0 .. U^N with the time grid and per-step wall times."""

    space: FeSpace
    tau: float
    states: list[FeFunction]
    step_wall_s: list[float]
    cache_hits: int = 0
    cache_misses: int = 0

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(len(self.states))

    def state_at(self, t: float) -> FeFunction:
        k = int(round(t / self.tau))
        if not (0 <= k < len(self.states)) or abs(k * self.tau - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the trajectory grid (tau={self.tau})")
        return self.states[k]


class _OracleCache:
    """Memoizes oracle A0 values; the oracle integrates out the fast scales,
    so only slow-variable dependence keys the cache."""

    def __init__(self, coefficient: MultiscaleCoefficient):
        self._time_sensitive = coefficient.depends_on_t
        self._space_sensitive = coefficient.depends_on_x
        self._values: dict[tuple, float] = {}
        self._lock = threading.Lock()

    def get_or_compute(self, t_n: float, x_K: float, compute: Callable[[], float]) -> float:
        key = (t_n if self._time_sensitive else None, x_K if self._space_sensitive else None)
        with self._lock:
            if key in self._values:
                return self._values[key]
        value = compute()
        with self._lock:
            self._values[key] = value
        return value


def effective_values(
    cfg: MacroConfig,
    t_n: float,
    cell_cache: CellCache | None = None,
    oracle_cache: _OracleCache | None = None,
) -> np.ndarray:
    """A(t_n, x_K) for every element barycenter, per the configured mode."""
    barycenters = cfg.space().mesh.barycenters
    if cfg.mode.kind == "fixed_a0":
        return np.full(cfg.n_elems, float(cfg.mode.value))
    if cfg.mode.kind == "oracle_a0":
        from .oracle import a0_oracle_periodic

        cache = oracle_cache or _OracleCache(cfg.coefficient)
        return np.array(
            [
                cache.get_or_compute(
                    t_n,
                    x_K,
                    lambda xk=x_K: a0_oracle_periodic(
                        cfg.coefficient,
                        t=t_n,
                        x=xk,
                        n_y=cfg.oracle.n_y,
                        n_s=cfg.oracle.n_s,
                        period_tol=cfg.oracle.period_tol,
                        max_periods=cfg.oracle.max_periods,
                    ),
                )
                for x_K in barycenters
            ]
        )
    cache = cell_cache or CellCache(cfg.coefficient)
    return np.array(
        [
            cache.get_or_compute(cfg.micro.cell_config(cfg.coefficient, cfg.epsilon, t_n, x_K))
            for x_K in barycenters
        ]
    )


def assemble_B(
    cfg: MacroConfig,
    t_n: float,
    cell_cache: CellCache | None = None,
    oracle_cache: _OracleCache | None = None,
) -> BandedMatrix:
    """Stiffness matrix of the barycenter-quadrature bilinear form at t_n."""
    space = cfg.space()
    a_vals = effective_values(cfg, t_n, cell_cache, oracle_cache)
    per_quad = np.repeat(a_vals[:, None], space.n_quad, axis=1)
    return assemble_stiffness(space, per_quad)


def step(
    space: FeSpace,
    mass: BandedMatrix,
    b_matrix: BandedMatrix,
    tau: float,
    previous: FeFunction,
    load: np.ndarray,
) -> FeFunction:
    """One implicit Euler step: (M + tau B) U = M U_prev + tau F."""
    band = mass.add_scaled(b_matrix, tau)
    rhs = mass.matvec(previous.coefficients) + tau * load
    return FeFunction(space, solve_banded(band, rhs))


def run_hmm(cfg: MacroConfig) -> MacroTrajectory:
    """March the macro problem from the projected initial value to t = T."""
    space = cfg.space()
    mass = assemble_mass(space)
    u = l2_project(space, cfg.initial)
    states = [u]
    wall = []
    xq = space.mesh.quad_points(space.n_quad)
    cell_cache = CellCache(cfg.coefficient)
    oracle_cache = _OracleCache(cfg.coefficient)
    for n in range(1, cfg.n_steps + 1):
        t_n = n * cfg.tau
        tic = time.perf_counter()
        b_matrix = assemble_B(cfg, t_n, cell_cache, oracle_cache)
        f_vals = np.broadcast_to(np.asarray(cfg.rhs(t_n, xq), dtype=float), xq.shape)
        load = assemble_load(space, f_vals)
        u = step(space, mass, b_matrix, cfg.tau, u, load)
        wall.append(time.perf_counter() - tic)
        states.append(u)
    return MacroTrajectory(
        space=space,
        tau=cfg.tau,
        states=states,
        step_wall_s=wall,
        cache_hits=cell_cache.hits,
        cache_misses=cell_cache.misses,
    )
