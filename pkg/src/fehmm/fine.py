"""Single-scale reference solver that resolves the oscillatory coefficient.

Discretizes the original problem directly: P1 elements of width h_f, implicit
Euler steps tau_f, and the coefficient evaluated at its oscillatory arguments
a(t, x, t/eps^2, x/eps) in every step.  Useful as a brute-force oracle at
moderate eps; demonstrably useless until h_f < eps, which is the point.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
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
    l2_project,
    norms,
    solve_banded,
)
from .macro import MacroTrajectory


class MemoryCapError(RuntimeError):
    pass


class NonNestedGridsError(ValueError):
    pass


@dataclass
class FineConfig:
    omega: tuple[float, float]
    final_time: float
    epsilon: float
    coefficient: MultiscaleCoefficient
    rhs: Callable[[float, np.ndarray], np.ndarray]
    initial: Callable[[np.ndarray], np.ndarray]
    n_elems: int
    n_steps: int
    degree: int = 1
    memory_cap_bytes: int = 2**31

    @property
    def h_f(self) -> float:
        return (self.omega[1] - self.omega[0]) / self.n_elems

    @property
    def tau_f(self) -> float:
        return self.final_time / self.n_steps

    def space(self) -> FeSpace:
        return FeSpace(
            Mesh1D(self.omega[0], self.omega[1], self.n_elems),
            degree=self.degree,
            dirichlet_zero=True,
        )


def oscillatory_coefficient_at(cfg: FineConfig, t: float, xq: np.ndarray) -> np.ndarray:
    vals = cfg.coefficient(t=t, x=xq, s=t / cfg.epsilon**2, y=xq / cfg.epsilon)
    return np.broadcast_to(np.asarray(vals, dtype=float), xq.shape)


def run_fine(cfg: FineConfig) -> MacroTrajectory:
    """Implicit Euler with per-step reassembly of the oscillatory stiffness."""
    space = cfg.space()
    estimate = 8 * (cfg.n_steps + 1) * space.n_dofs
    if estimate > cfg.memory_cap_bytes:
        raise MemoryCapError(
            f"trajectory storage needs ~{estimate} bytes, cap is {cfg.memory_cap_bytes}"
        )
    mass = assemble_mass(space)
    u = l2_project(space, cfg.initial)
    states = [u]
    wall = []
    xq = space.mesh.quad_points(space.n_quad)
    static = not (cfg.coefficient.depends_on_t or cfg.coefficient.depends_on_s)
    band = None
    for n in range(1, cfg.n_steps + 1):
        t_n = n * cfg.tau_f
        tic = time.perf_counter()
        if band is None or not static:
            aq = oscillatory_coefficient_at(cfg, t_n, xq)
            stiff = assemble_stiffness(space, aq)
            band = mass.add_scaled(stiff, cfg.tau_f)
        f_vals = np.broadcast_to(np.asarray(cfg.rhs(t_n, xq), dtype=float), xq.shape)
        load = assemble_load(space, f_vals)
        rhs = mass.matvec(u.coefficients) + cfg.tau_f * load
        u = FeFunction(space, solve_banded(band, rhs))
        wall.append(time.perf_counter() - tic)
        states.append(u)
    return MacroTrajectory(space=space, tau=cfg.tau_f, states=states, step_wall_s=wall)


def is_resolved(epsilon: float, h_f: float, tau_f: float) -> bool:
    """Resolution rule of thumb for flagging reference runs."""
    return h_f <= epsilon / 4.0 and tau_f <= epsilon**2


def compare_hmm_vs_fine(
    hmm: MacroTrajectory,
    fine: MacroTrajectory,
    t: float,
    epsilon: float | None = None,
) -> dict:
    """Norms of (U_H - u_fine) at time t, computed on the fine grid.

    The macro state is P1, so its nodal interpolant on the nested fine mesh
    reproduces it exactly and the reported norms are exact quadratures of the
    true difference.  The H1 number contains the eps-scale oscillation of the
    fine solution and is informational.
    """
    coarse = hmm.state_at(t)
    reference = fine.state_at(t)
    n_c = coarse.space.mesh.n_elems
    n_f = reference.space.mesh.n_elems
    if n_f % n_c != 0:
        raise NonNestedGridsError(f"fine mesh ({n_f}) does not refine macro mesh ({n_c})")
    fine_space = reference.space
    diff = FeFunction(fine_space, coarse(fine_space.dof_positions) - reference.coefficients)
    result = norms(diff)
    out = {"l2": result["l2"], "h1": result["h1_semi"]}
    if epsilon is not None:
        out["fine_resolved"] = is_resolved(epsilon, fine_space.mesh.h, fine.tau)
    return out
