"""Reference homogenized coefficient from the periodic unit-cell problem.

The corrector chi(s, y) solves, on (0,1) x Y with Y = (-1/2, 1/2),

    d chi / d s - d/dy ( a(t, x, s, y) (1 + d chi / d y) ) = 0

with periodic conditions in both y and s, the slow arguments (t, x) held
fixed.  Discretization: quadratic elements with identified endpoints in y,
implicit Euler in s, time-periodicity obtained by marching whole periods
from chi = 0 until the period map is a contraction fixed point.  The
homogenized value averages a (1 + chi') with the trapezoidal rule in s.

For s-independent coefficients the single stationary elliptic cell problem
is solved instead (zero mean enforced by a post-shift; the gradient, which
alone enters the average, is unaffected).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as sparse_linalg

from .expressions import MultiscaleCoefficient
from .fem import gauss_rule, shape_derivs, shape_values

logger = logging.getLogger(__name__)

_Y_LEFT = -0.5


class OracleConvergenceError(RuntimeError):
    """The period map did not reach a fixed point within max_periods."""


@dataclass
class PeriodicCellFunction:
    """P2 function on the periodic unit cell; dofs interleave vertices/midpoints."""

    n_elems: int
    dofs: np.ndarray  # length 2 * n_elems

    def _locate(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        yy = np.mod(np.atleast_1d(y) - _Y_LEFT, 1.0)
        e = np.clip((yy * self.n_elems).astype(int), 0, self.n_elems - 1)
        xi = yy * self.n_elems - e
        return e, xi

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        e, xi = self._locate(y)
        phi = shape_values(2, xi)
        idx = np.stack([2 * e, 2 * e + 1, (2 * e + 2) % (2 * self.n_elems)], axis=1)
        vals = np.einsum("ei,ie->e", self.dofs[idx], phi)
        return vals if y.ndim else float(vals[0])

    def derivative_at(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        e, xi = self._locate(y)
        dphi = shape_derivs(2, xi)
        idx = np.stack([2 * e, 2 * e + 1, (2 * e + 2) % (2 * self.n_elems)], axis=1)
        vals = np.einsum("ei,ie->e", self.dofs[idx], dphi) * self.n_elems
        return vals if y.ndim else float(vals[0])


class _PeriodicAssembler:
    """P2 assembly on the unit cell with wrapped end dofs."""

    def __init__(self, n_elems: int):
        self.n = n_elems
        self.h = 1.0 / n_elems
        self.ndof = 2 * n_elems
        self.xi, self.w = gauss_rule(4)
        self.phi = shape_values(2, self.xi)
        self.dphi = shape_derivs(2, self.xi)
        e = np.arange(n_elems)
        self.dofmap = np.stack([2 * e, 2 * e + 1, (2 * e + 2) % self.ndof], axis=1)
        self.yq = _Y_LEFT + (e[:, None] + self.xi[None, :]) * self.h
        rows = np.repeat(self.dofmap, 3, axis=1).ravel()
        cols = np.tile(self.dofmap, (1, 3)).ravel()
        self._pattern = (rows, cols)
        mass_local = self.h * np.einsum("q,iq,jq->ij", self.w, self.phi, self.phi)
        self.mass = self._to_csc(np.broadcast_to(mass_local, (n_elems, 3, 3)))

    def _to_csc(self, local: np.ndarray) -> sparse.csc_matrix:
        rows, cols = self._pattern  # per element: (i, j) pairs, j fastest
        vals = np.ascontiguousarray(local).reshape(-1)
        return sparse.csc_matrix((vals, (rows, cols)), shape=(self.ndof, self.ndof))

    def stiffness(self, aq: np.ndarray) -> sparse.csc_matrix:
        local = np.einsum("eq,iq,jq->eij", aq * self.w[None, :], self.dphi, self.dphi) / self.h
        return self._to_csc(local)

    def gradient_load(self, aq: np.ndarray) -> np.ndarray:
        local = np.einsum("eq,iq->ei", aq * self.w[None, :], self.dphi)
        out = np.zeros(self.ndof)
        np.add.at(out, self.dofmap.ravel(), local.ravel())
        return out

    def average_flux(self, aq: np.ndarray, chi: np.ndarray) -> float:
        """integral over Y of a (1 + chi') dy."""
        deriv = np.einsum("ei,iq->eq", chi[self.dofmap], self.dphi) / self.h
        return float(np.sum(self.h * self.w[None, :] * aq * (1.0 + deriv)))

    def m_norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(abs(v @ (self.mass @ v))))


def _coefficient_samples(
    coeff: MultiscaleCoefficient, t: float, x: float, s: float, yq: np.ndarray
) -> np.ndarray:
    vals = coeff(t=t, x=x, s=s, y=yq)
    return np.broadcast_to(np.asarray(vals, dtype=float), yq.shape)


def _stationary_corrector(asm: _PeriodicAssembler, aq: np.ndarray) -> np.ndarray:
    stiff = asm.stiffness(aq).tolil()
    rhs = -asm.gradient_load(aq)
    # pin dof 0 to fix the constant nullspace; the gradient is unaffected
    stiff[0, :] = 0.0
    stiff[:, 0] = 0.0
    stiff[0, 0] = 1.0
    rhs[0] = 0.0
    chi = sparse_linalg.spsolve(stiff.tocsc(), rhs)
    ones = np.ones(asm.ndof)
    chi = chi - (ones @ (asm.mass @ chi))  # |Y| = 1
    return chi


def _periodic_trajectory(
    asm: _PeriodicAssembler,
    coeff: MultiscaleCoefficient,
    t: float,
    x: float,
    n_s: int,
    period_tol: float,
    max_periods: int,
) -> list[np.ndarray]:
    theta = 1.0 / n_s
    samples = [
        _coefficient_samples(coeff, t, x, k * theta, asm.yq) for k in range(n_s + 1)
    ]
    loads = [asm.gradient_load(aq) for aq in samples]
    solvers = [
        sparse_linalg.splu((asm.mass / theta + asm.stiffness(samples[k])).tocsc())
        for k in range(1, n_s + 1)
    ]
    chi = np.zeros(asm.ndof)
    for period in range(1, max_periods + 1):
        start = chi
        trajectory = [chi]
        for k in range(1, n_s + 1):
            rhs = asm.mass @ chi / theta - loads[k]
            chi = solvers[k - 1].solve(rhs)
            trajectory.append(chi)
        drift = asm.m_norm(chi - start)
        size = asm.m_norm(chi)
        if drift <= period_tol * max(size, 1e-300):
            logger.debug("periodic cell oracle converged after %d period(s)", period)
            return trajectory
    raise OracleConvergenceError(
        f"period map not converged after {max_periods} periods "
        f"(last relative drift {drift / max(size, 1e-300):.3e})"
    )


def a0_oracle_periodic(
    coefficient: MultiscaleCoefficient,
    t: float = 0.0,
    x: float = 0.0,
    n_y: int = 256,
    n_s: int = 256,
    period_tol: float = 1e-8,
    max_periods: int = 64,
) -> float:
    """Homogenized coefficient at slow point (t, x) from the periodic cell problem."""
    if n_y < 4 or n_s < 4:
        raise ValueError("n_y and n_s must both be >= 4")
    asm = _PeriodicAssembler(n_y)
    if not coefficient.depends_on_s:
        aq = _coefficient_samples(coefficient, t, x, 0.0, asm.yq)
        chi = _stationary_corrector(asm, aq)
        return asm.average_flux(aq, chi)
    theta = 1.0 / n_s
    trajectory = _periodic_trajectory(asm, coefficient, t, x, n_s, period_tol, max_periods)
    fluxes = [
        asm.average_flux(_coefficient_samples(coefficient, t, x, k * theta, asm.yq), trajectory[k])
        for k in range(n_s + 1)
    ]
    return theta * (0.5 * fluxes[0] + sum(fluxes[1:-1]) + 0.5 * fluxes[-1])


def oracle_corrector(
    coefficient: MultiscaleCoefficient,
    t: float = 0.0,
    x: float = 0.0,
    n_y: int = 256,
    n_s: int = 256,
    period_tol: float = 1e-8,
    max_periods: int = 64,
    phase: float = 0.0,
) -> PeriodicCellFunction:
    """Corrector snapshot chi(phase, .) on the unit cell, for reconstruction."""
    if n_y < 4:
        raise ValueError("n_y must be >= 4")
    asm = _PeriodicAssembler(n_y)
    if not coefficient.depends_on_s:
        aq = _coefficient_samples(coefficient, t, x, 0.0, asm.yq)
        return PeriodicCellFunction(n_y, _stationary_corrector(asm, aq))
    trajectory = _periodic_trajectory(asm, coefficient, t, x, n_s, period_tol, max_periods)
    k = int(round((phase % 1.0) * n_s))
    return PeriodicCellFunction(n_y, trajectory[min(k, n_s)])
