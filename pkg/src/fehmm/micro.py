"""Dirichlet/initial-value micro cell problems and the effective coefficient.

For a macro time level t_n and element barycenter x_K, the corrector
trajectory eta_{h,k} solves, with implicit Euler steps of size theta and
homogeneous Dirichlet data on the sampling window I_{delta,K},

    (eta_k - eta_{k-1}, z) / theta + (a_k (g + eta_k'), z') = 0,

where g is the driving macro gradient (unit by default) and the coefficient
is collocated at the macro point: a_k(x) = a(t_n, x_K, (t_n + s_k)/eps^2,
x/eps).  The effective coefficient averages a (g + eta') over the space-time
window with the trapezoidal rule in micro time.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .expressions import MultiscaleCoefficient
from .fem import (
    BandedMatrix,
    FeFunction,
    FeSpace,
    Mesh1D,
    assemble_gradient_load,
    assemble_mass,
    assemble_stiffness,
    gauss_rule,
    shape_derivs,
    solve_banded,
)


class HomogenizedBoundsError(RuntimeError):
    """The assembled effective coefficient violates the coercivity bounds."""


class GridMismatchError(ValueError):
    """Physical and rescaled cell grids do not coincide."""


@dataclass(frozen=True)
class CellConfig:
    """Geometry and discretization of one micro cell problem.

    ``h`` and ``theta`` are snapped down so that delta/h and sigma/theta are
    integers.  The paper-side assumptions delta > eps and sigma > eps^2 are
    warned about when violated, not enforced.
    """

    coefficient: MultiscaleCoefficient
    t_n: float
    x_K: float
    delta: float
    sigma: float
    epsilon: float
    h: float
    theta: float
    degree: int = 2

    def __post_init__(self):
        for name in ("delta", "sigma", "epsilon", "h", "theta"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.degree < 2:
            raise ValueError("micro elements must have degree >= 2")
        if self.delta < self.epsilon:
            warnings.warn(
                f"cell size delta={self.delta:g} below the period eps={self.epsilon:g}",
                stacklevel=2,
            )
        if self.sigma < self.epsilon**2:
            warnings.warn(
                f"cell time sigma={self.sigma:g} below eps^2={self.epsilon ** 2:g}",
                stacklevel=2,
            )

    @property
    def n_elems(self) -> int:
        return max(1, math.ceil(self.delta / self.h - 1e-12))

    @property
    def n_cell(self) -> int:
        return max(1, math.ceil(self.sigma / self.theta - 1e-12))

    @property
    def h_eff(self) -> float:
        return self.delta / self.n_elems

    @property
    def theta_eff(self) -> float:
        return self.sigma / self.n_cell

    def space(self) -> FeSpace:
        mesh = Mesh1D(self.x_K - self.delta / 2.0, self.x_K + self.delta / 2.0, self.n_elems)
        return FeSpace(mesh, degree=self.degree, dirichlet_zero=True)

    def coefficient_at(self, s_k: float, xq: np.ndarray) -> np.ndarray:
        """Coefficient samples at micro time s_k, macroscopically collocated."""
        vals = self.coefficient(
            t=self.t_n, x=self.x_K, s=(self.t_n + s_k) / self.epsilon**2, y=xq / self.epsilon
        )
        return np.broadcast_to(np.asarray(vals, dtype=float), xq.shape)


@dataclass
class CellSolution:
    config: CellConfig
    eta: list[FeFunction]

    @property
    def micro_times(self) -> np.ndarray:
        return self.config.theta_eff * np.arange(self.config.n_cell + 1)


def _time_loop(
    space: FeSpace,
    n_cell: int,
    theta: float,
    coeff_at_step: Callable[[int], np.ndarray],
    static_coefficient: bool,
    gradient: float,
) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yields (k, coefficient quad values, eta dof vector) for k = 0..n_cell."""
    mass = assemble_mass(space)
    eta = np.zeros(space.n_dofs)
    aq = coeff_at_step(0)
    yield 0, aq, eta
    band = None
    load = None
    for k in range(1, n_cell + 1):
        if not static_coefficient or band is None:
            aq = coeff_at_step(k)
            stiff = assemble_stiffness(space, aq)
            band = mass.add_scaled(stiff, theta).data  # theta*(M/theta + K)
            load = assemble_gradient_load(space, aq)
        rhs = mass.matvec(eta) - theta * gradient * load
        eta = solve_banded(BandedMatrix(space.n_dofs, space.bandwidth(), space.bandwidth(), band), rhs)
        yield k, aq, eta


def _iterate_cell(cfg: CellConfig, gradient: float = 1.0):
    space = cfg.space()
    xq = space.mesh.quad_points(space.n_quad)
    theta = cfg.theta_eff
    static = not cfg.coefficient.depends_on_s

    def coeff_at_step(k: int) -> np.ndarray:
        return cfg.coefficient_at(k * theta, xq)

    return space, _time_loop(space, cfg.n_cell, theta, coeff_at_step, static, gradient)


def solve_cell(cfg: CellConfig, gradient: float = 1.0) -> CellSolution:
    """Full corrector trajectory; eta_0 = 0 and all states satisfy zero BC.

    The trajectory is affine in the driving gradient, so callers needing a
    different macro slope may either pass ``gradient`` or rescale.
    """
    space, steps = _iterate_cell(cfg, gradient)
    etas = [FeFunction(space, eta.copy()) for _, _, eta in steps]
    return CellSolution(config=cfg, eta=etas)


@dataclass(frozen=True)
class HomogenizedValue:
    """Effective tensor at one (t_n, x_K); kept d x d for dimension readiness."""

    t_n: float
    x_K: float
    a_eff: np.ndarray

    @property
    def scalar(self) -> float:
        return float(self.a_eff[0, 0])


def _window_average(space: FeSpace, steps, sigma: float, delta: float, theta: float, n_cell: int) -> float:
    """Trapezoidal-in-time, Gauss-in-space average of a (1 + eta')."""
    xi, w = gauss_rule(space.n_quad)
    dphi = shape_derivs(space.degree, xi)
    h = space.mesh.h
    p = space.degree
    elem = p * np.arange(space.mesh.n_elems)[:, None] + np.arange(p + 1)[None, :]
    total = 0.0
    for k, aq, eta in steps:
        full = np.zeros(space.n_dofs_full)
        full[1:-1] = eta
        deriv = (full[elem] @ dphi) / h
        s_k = float(np.sum(h * w[None, :] * aq * (1.0 + deriv)))
        weight = 0.5 * theta if k in (0, n_cell) else theta
        total += weight * s_k
    return total / (sigma * delta)


def assemble_Ahh(cfg: CellConfig, bounds_tol_factor: float = 1e-8) -> HomogenizedValue:
    """Assemble the discrete homogenized coefficient for one cell.

    The value is not clamped; leaving [lambda_min, lambda_max] beyond a
    roundoff tolerance raises HomogenizedBoundsError since it indicates an
    assembly bug or mis-declared coefficient bounds.
    """
    space, steps = _iterate_cell(cfg, gradient=1.0)
    value = _window_average(space, steps, cfg.sigma, cfg.delta, cfg.theta_eff, cfg.n_cell)
    tol = bounds_tol_factor * cfg.coefficient.lambda_max
    if not (cfg.coefficient.lambda_min - tol <= value <= cfg.coefficient.lambda_max + tol):
        raise HomogenizedBoundsError(
            f"A_Hh({cfg.t_n:g}, {cfg.x_K:g}) = {value!r} outside "
            f"[{cfg.coefficient.lambda_min:g}, {cfg.coefficient.lambda_max:g}]"
        )
    return HomogenizedValue(t_n=cfg.t_n, x_K=cfg.x_K, a_eff=np.array([[value]]))


class CellCache:
    """Memoizes effective-coefficient values per (time level, barycenter).

    Keys collapse along axes the coefficient cannot see: without slow-t or
    fast-s dependence all time levels share one solve, and without slow-x
    dependence all elements do.  Writers may race; values are deterministic,
    so last-writer-wins is harmless.
    """

    def __init__(self, coefficient: MultiscaleCoefficient):
        self._time_sensitive = coefficient.depends_on_t or coefficient.depends_on_s
        self._space_sensitive = coefficient.depends_on_x
        self._values: dict[tuple, float] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def key(self, t_n: float, x_K: float) -> tuple:
        return (t_n if self._time_sensitive else None, x_K if self._space_sensitive else None)

    def get_or_compute(self, cfg: CellConfig) -> float:
        key = self.key(cfg.t_n, cfg.x_K)
        with self._lock:
            if key in self._values:
                self.hits += 1
                return self._values[key]
        value = assemble_Ahh(cfg).scalar
        with self._lock:
            self._values[key] = value
            self.misses += 1
        return value


def rescaled_cell_check(
    cfg: CellConfig,
    rescaled_n_elems: int | None = None,
    rescaled_n_cell: int | None = None,
) -> dict[str, float]:
    """Solve the cell problem in physical and rescaled coordinates and compare.

    The rescaled problem lives on I_{delta/eps} x (0, sigma/eps^2) with the
    coefficient read off at shifted fast arguments; its solution times eps
    must agree with the physical corrector nodal values up to roundoff.
    """
    n_el = rescaled_n_elems if rescaled_n_elems is not None else cfg.n_elems
    n_ct = rescaled_n_cell if rescaled_n_cell is not None else cfg.n_cell
    if n_el != cfg.n_elems or n_ct != cfg.n_cell:
        raise GridMismatchError(
            f"rescaled grid ({n_el} elems, {n_ct} steps) does not match "
            f"physical grid ({cfg.n_elems} elems, {cfg.n_cell} steps)"
        )
    eps = cfg.epsilon
    physical = solve_cell(cfg)

    half = cfg.delta / (2.0 * eps)
    space_r = FeSpace(Mesh1D(-half, half, n_el), degree=cfg.degree, dirichlet_zero=True)
    xq_r = space_r.mesh.quad_points(space_r.n_quad)
    theta_r = (cfg.sigma / eps**2) / n_ct

    def coeff_at_step(k: int) -> np.ndarray:
        s_k = k * theta_r
        vals = cfg.coefficient(
            t=cfg.t_n, x=cfg.x_K, s=cfg.t_n / eps**2 + s_k, y=cfg.x_K / eps + xq_r
        )
        return np.broadcast_to(np.asarray(vals, dtype=float), xq_r.shape)

    static = not cfg.coefficient.depends_on_s
    max_dev = 0.0
    scale = max(float(np.abs(f.coefficients).max()) for f in physical.eta)
    for k, _, xi in _time_loop(space_r, n_ct, theta_r, coeff_at_step, static, gradient=1.0):
        dev = float(np.abs(physical.eta[k].coefficients - eps * xi).max())
        max_dev = max(max_dev, dev)
        scale = max(scale, eps * float(np.abs(xi).max()))
    if scale <= 1e-13 * cfg.delta:
        # both correctors are roundoff-zero (constant coefficient)
        return {"max_rel_deviation": 0.0}
    return {"max_rel_deviation": max_dev / scale}
