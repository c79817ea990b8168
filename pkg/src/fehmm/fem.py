"""1D P1/P2 finite elements on uniform meshes with banded direct solves.

Degrees of freedom are ordered by position (P2 interleaves vertex and
midpoint dofs), so every matrix is banded with bandwidth equal to the
polynomial degree.  Assembly is vectorized over elements; quadrature is
Gauss-Legendre with ``2 * degree`` points per element, which integrates all
P1/P2 mass and stiffness products exactly for polynomial coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg


class SingularMatrixError(RuntimeError):
    """Raised when a banded factorization hits a (near-)zero pivot."""


@lru_cache(maxsize=None)
def gauss_rule(n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points/weights on the reference element [0, 1]."""
    p, w = np.polynomial.legendre.leggauss(n_points)
    return 0.5 * (p + 1.0), 0.5 * w


def shape_values(degree: int, xi: np.ndarray) -> np.ndarray:
    """Shape functions at reference coordinates, shaped (n_local, len(xi))."""
    xi = np.asarray(xi, dtype=float)
    if degree == 1:
        return np.stack([1.0 - xi, xi])
    if degree == 2:
        return np.stack([(1.0 - xi) * (1.0 - 2.0 * xi), 4.0 * xi * (1.0 - xi), xi * (2.0 * xi - 1.0)])
    raise ValueError(f"unsupported degree {degree}")


def shape_derivs(degree: int, xi: np.ndarray) -> np.ndarray:
    """Reference-coordinate derivatives, shaped (n_local, len(xi))."""
    xi = np.asarray(xi, dtype=float)
    if degree == 1:
        return np.stack([-np.ones_like(xi), np.ones_like(xi)])
    if degree == 2:
        return np.stack([4.0 * xi - 3.0, 4.0 - 8.0 * xi, 4.0 * xi - 1.0])
    raise ValueError(f"unsupported degree {degree}")


@dataclass(frozen=True)
class Mesh1D:
    a: float
    b: float
    n_elems: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        if self.n_elems < 1:
            raise ValueError("n_elems must be >= 1")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_elems

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n_elems + 1)

    @property
    def barycenters(self) -> np.ndarray:
        return self.a + self.h * (np.arange(self.n_elems) + 0.5)

    def quad_points(self, n_points: int) -> np.ndarray:
        """Physical quadrature points, shaped (n_elems, n_points)."""
        xi, _ = gauss_rule(n_points)
        left = self.a + self.h * np.arange(self.n_elems)
        return left[:, None] + xi[None, :] * self.h


@dataclass(frozen=True)
class FeSpace:
    """Nodal P1/P2 space, optionally with the endpoint dofs removed."""

    mesh: Mesh1D
    degree: int = 1
    dirichlet_zero: bool = False

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise ValueError(f"degree must be 1 or 2, got {self.degree}")

    @property
    def n_dofs_full(self) -> int:
        return self.degree * self.mesh.n_elems + 1

    @property
    def n_dofs(self) -> int:
        return self.n_dofs_full - 2 if self.dirichlet_zero else self.n_dofs_full

    @property
    def n_quad(self) -> int:
        return 2 * self.degree

    @property
    def dof_positions(self) -> np.ndarray:
        xs = self.mesh.a + (self.mesh.b - self.mesh.a) * np.arange(self.n_dofs_full) / (
            self.n_dofs_full - 1
        )
        return xs[1:-1] if self.dirichlet_zero else xs

    def element_dofs(self) -> np.ndarray:
        """Global dof indices per element, (n_elems, degree+1); -1 marks a removed dof."""
        p = self.degree
        base = p * np.arange(self.mesh.n_elems)[:, None] + np.arange(p + 1)[None, :]
        if self.dirichlet_zero:
            base = base - 1
            base[base == self.n_dofs_full - 2] = -1
        return base

    def bandwidth(self) -> int:
        return self.degree


@dataclass
class BandedMatrix:
    """Square banded matrix in LAPACK diagonal-ordered storage.

    ``data[ku + i - j, j]`` holds entry (i, j); shape (kl + ku + 1, n).
    """

    n: int
    kl: int
    ku: int
    data: np.ndarray

    @classmethod
    def zeros(cls, n: int, kl: int, ku: int) -> "BandedMatrix":
        return cls(n=n, kl=kl, ku=ku, data=np.zeros((kl + ku + 1, n)))

    def copy(self) -> "BandedMatrix":
        return BandedMatrix(self.n, self.kl, self.ku, self.data.copy())

    def add_scaled(self, other: "BandedMatrix", factor: float) -> "BandedMatrix":
        assert (self.n, self.kl, self.ku) == (other.n, other.kl, other.ku)
        out = self.copy()
        out.data += factor * other.data
        return out

    def scaled(self, factor: float) -> "BandedMatrix":
        return BandedMatrix(self.n, self.kl, self.ku, factor * self.data)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        # data[ku + i - j, j] holds entry (i, j)
        out = self.data[self.ku] * v
        for m in range(1, self.ku + 1):  # superdiagonals: (j - m, j)
            out[: self.n - m] += self.data[self.ku - m, m:] * v[m:]
        for m in range(1, self.kl + 1):  # subdiagonals: (j + m, j)
            out[m:] += self.data[self.ku + m, : self.n - m] * v[: self.n - m]
        return out

    def entry(self, i: int, j: int) -> float:
        if -self.ku <= i - j <= self.kl:
            return float(self.data[self.ku + i - j, j])
        return 0.0

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i in range(self.n):
            for j in range(max(0, i - self.kl), min(self.n, i + self.ku + 1)):
                out[i, j] = self.entry(i, j)
        return out


def _scatter_add(mat: BandedMatrix, dofs: np.ndarray, local: np.ndarray) -> None:
    """Accumulate per-element (n_elems, nl, nl) blocks into the band."""
    nl = dofs.shape[1]
    for i in range(nl):
        for j in range(nl):
            r = dofs[:, i]
            c = dofs[:, j]
            keep = (r >= 0) & (c >= 0)
            np.add.at(mat.data, (mat.ku + r[keep] - c[keep], c[keep]), local[keep, i, j])


def assemble_mass(space: FeSpace) -> BandedMatrix:
    """Consistent mass matrix, exact Gauss quadrature."""
    xi, w = gauss_rule(space.n_quad)
    phi = shape_values(space.degree, xi)  # (nl, nq)
    h = space.mesh.h
    local = h * np.einsum("q,iq,jq->ij", w, phi, phi)
    mat = BandedMatrix.zeros(space.n_dofs, space.bandwidth(), space.bandwidth())
    _scatter_add(mat, space.element_dofs(), np.broadcast_to(local, (space.mesh.n_elems, *local.shape)))
    return mat


def assemble_stiffness(space: FeSpace, coefficient_at: Callable[[np.ndarray], np.ndarray] | np.ndarray) -> BandedMatrix:
    """Stiffness with a variable coefficient sampled at the quadrature points.

    ``coefficient_at`` is either a callable x -> a(x) (vectorized) or a
    precomputed (n_elems, n_quad) array of values.
    """
    xi, w = gauss_rule(space.n_quad)
    dphi = shape_derivs(space.degree, xi)  # (nl, nq)
    h = space.mesh.h
    if callable(coefficient_at):
        aq = np.asarray(coefficient_at(space.mesh.quad_points(space.n_quad)), dtype=float)
        aq = np.broadcast_to(aq, (space.mesh.n_elems, space.n_quad))
    else:
        aq = np.asarray(coefficient_at, dtype=float)
    if not np.all(np.isfinite(aq)):
        raise ValueError("non-finite coefficient value at a quadrature point")
    local = np.einsum("eq,iq,jq->eij", aq * w[None, :], dphi, dphi) / h
    mat = BandedMatrix.zeros(space.n_dofs, space.bandwidth(), space.bandwidth())
    _scatter_add(mat, space.element_dofs(), local)
    return mat


def assemble_gradient_load(space: FeSpace, coefficient_values: np.ndarray) -> np.ndarray:
    """Vector with entries integral of a(x) * phi_j'(x) dx.

    This is the right-hand side generated by a unit macroscopic gradient in
    the cell problems.  ``coefficient_values`` has shape (n_elems, n_quad).
    """
    xi, w = gauss_rule(space.n_quad)
    dphi = shape_derivs(space.degree, xi)
    local = np.einsum("eq,iq->ei", coefficient_values * w[None, :], dphi)
    out = np.zeros(space.n_dofs)
    dofs = space.element_dofs()
    for i in range(dofs.shape[1]):
        d = dofs[:, i]
        keep = d >= 0
        np.add.at(out, d[keep], local[keep, i])
    return out


def assemble_load(space: FeSpace, f_values: np.ndarray) -> np.ndarray:
    """Vector with entries integral of f(x) * phi_j(x) dx; values per quad point."""
    xi, w = gauss_rule(space.n_quad)
    phi = shape_values(space.degree, xi)
    h = space.mesh.h
    local = h * np.einsum("eq,iq->ei", f_values * w[None, :], phi)
    out = np.zeros(space.n_dofs)
    dofs = space.element_dofs()
    for i in range(dofs.shape[1]):
        d = dofs[:, i]
        keep = d >= 0
        np.add.at(out, d[keep], local[keep, i])
    return out


def solve_banded(mat: BandedMatrix, rhs: np.ndarray) -> np.ndarray:
    """Direct banded solve; raises SingularMatrixError on breakdown."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (mat.n,):
        raise ValueError(f"rhs length {rhs.shape} does not match matrix size {mat.n}")
    scale = np.abs(mat.data).max()
    if scale == 0.0 or not np.isfinite(scale):
        raise SingularMatrixError("matrix is zero or contains non-finite entries")
    try:
        return scipy.linalg.solve_banded((mat.kl, mat.ku), mat.data, rhs)
    except scipy.linalg.LinAlgError as err:  # zero pivot in the LU factorization
        raise SingularMatrixError(str(err)) from err


@dataclass
class FeFunction:
    space: FeSpace
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.n_dofs,):
            raise ValueError(
                f"coefficient length {self.coefficients.shape} does not match "
                f"dof count {self.space.n_dofs}"
            )

    def full_coefficients(self) -> np.ndarray:
        """Coefficients including boundary dofs (zero when removed)."""
        if not self.space.dirichlet_zero:
            return self.coefficients
        out = np.zeros(self.space.n_dofs_full)
        out[1:-1] = self.coefficients
        return out

    def values_at_quad(self, n_quad: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(values, derivatives) at the quadrature points, (n_elems, n_quad)."""
        nq = n_quad or self.space.n_quad
        xi, _ = gauss_rule(nq)
        phi = shape_values(self.space.degree, xi)
        dphi = shape_derivs(self.space.degree, xi)
        full = self.full_coefficients()
        p = self.space.degree
        elem = p * np.arange(self.space.mesh.n_elems)[:, None] + np.arange(p + 1)[None, :]
        ce = full[elem]  # (n_elems, nl)
        vals = ce @ phi
        derivs = ce @ dphi / self.space.mesh.h
        return vals, derivs

    def _evaluate(self, x, basis) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        mesh = self.space.mesh
        e = np.clip(((flat - mesh.a) / mesh.h).astype(int), 0, mesh.n_elems - 1)
        xi = (flat - (mesh.a + e * mesh.h)) / mesh.h
        phi = basis(self.space.degree, xi)
        full = self.full_coefficients()
        p = self.space.degree
        dofs = p * e[:, None] + np.arange(p + 1)[None, :]
        vals = np.einsum("ei,ie->e", full[dofs], phi)
        return vals.reshape(x.shape) if x.ndim else float(vals[0])

    def __call__(self, x) -> np.ndarray:
        """Point evaluation (vectorized, any array shape); x must lie inside [a, b]."""
        return self._evaluate(x, shape_values)

    def derivative_at(self, x) -> np.ndarray:
        return self._evaluate(x, shape_derivs) / self.space.mesh.h


def zero_function(space: FeSpace) -> FeFunction:
    return FeFunction(space, np.zeros(space.n_dofs))


def interpolate(space: FeSpace, f: Callable[[np.ndarray], np.ndarray]) -> FeFunction:
    """Nodal interpolant of f."""
    xs = space.dof_positions
    vals = np.asarray(f(xs), dtype=float)
    vals = np.broadcast_to(vals, xs.shape).copy()
    return FeFunction(space, vals)


def l2_project(space: FeSpace, f: Callable[[np.ndarray], np.ndarray]) -> FeFunction:
    """L2 projection onto the space via a mass-matrix solve."""
    xq = space.mesh.quad_points(space.n_quad)
    fq = np.asarray(f(xq), dtype=float)
    fq = np.broadcast_to(fq, xq.shape)
    rhs = assemble_load(space, fq)
    return FeFunction(space, solve_banded(assemble_mass(space), rhs))


def norms(u: FeFunction, n_quad: int | None = None) -> dict[str, float]:
    """L2 norm and H1 seminorm by elementwise Gauss quadrature."""
    nq = n_quad or u.space.n_quad
    _, w = gauss_rule(nq)
    h = u.space.mesh.h
    vals, derivs = u.values_at_quad(nq)
    l2 = float(np.sqrt(np.sum(h * w[None, :] * vals**2)))
    h1 = float(np.sqrt(np.sum(h * w[None, :] * derivs**2)))
    return {"l2": l2, "h1_semi": h1}


def difference_norms(
    u: FeFunction,
    exact: Callable[[np.ndarray], np.ndarray],
    exact_deriv: Callable[[np.ndarray], np.ndarray] | None = None,
    n_quad: int = 4,
) -> dict[str, float]:
    """L2 (and H1-seminorm, if exact_deriv given) distance of u to a function."""
    _, w = gauss_rule(n_quad)
    h = u.space.mesh.h
    xq = u.space.mesh.quad_points(n_quad)
    vals, derivs = u.values_at_quad(n_quad)
    ev = np.broadcast_to(np.asarray(exact(xq), dtype=float), xq.shape)
    out = {"l2": float(np.sqrt(np.sum(h * w[None, :] * (vals - ev) ** 2)))}
    if exact_deriv is not None:
        ed = np.broadcast_to(np.asarray(exact_deriv(xq), dtype=float), xq.shape)
        out["h1_semi"] = float(np.sqrt(np.sum(h * w[None, :] * (derivs - ed) ** 2)))
    return out
