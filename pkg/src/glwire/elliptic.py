"""Sparse Poisson solvers and the Helmholtz (Leray) decomposition.

All solvers use preconditioned conjugate gradients on the 5-point stencil.
The Neumann problem is singular; its kernel (constants) is projected out
every iteration and the solution is pinned to zero weighted mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .grids import Domain, Grid2D
from .operators import (VectorField, center_dirichlet_matrix,
                        center_dirichlet_rhs, curl, dirichlet_matrix, grad,
                        mixed_matrices, neumann_matrices, node_mean, weak_div)

DEFAULT_TOL = 1e-10


class SolverError(RuntimeError):
    """Linear solver failed to reach the requested tolerance."""


@dataclass
class LinearSolveReport:
    iterations: int
    residual: float
    solver: str

    def check(self, tol: float):
        if not np.isfinite(self.residual) or self.residual > tol:
            raise SolverError(
                f"{self.solver}: residual {self.residual:.3e} exceeds {tol:.1e} "
                f"after {self.iterations} iterations")


def conjugate_gradient(A: sp.spmatrix, b: np.ndarray, tol: float = DEFAULT_TOL,
                       maxiter: int | None = None, project=None,
                       label: str = "cg") -> tuple[np.ndarray, LinearSolveReport]:
    """Jacobi-preconditioned CG with an optional per-iteration projection.

    `project` removes a known null-space component (used for the singular
    Neumann operator).  Convergence is relative to ||b||.
    """
    n = b.shape[0]
    maxiter = maxiter or max(20 * int(np.sqrt(n) + 1), 400)
    d = A.diagonal()
    d = np.where(np.abs(d) > 0, d, 1.0)
    x = np.zeros_like(b)
    r = b.copy()
    if project is not None:
        r = project(r)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, LinearSolveReport(0, 0.0, label)
    z = r / d
    p = z.copy()
    rz = np.vdot(r, z).real
    it = 0
    res = np.linalg.norm(r) / bnorm
    while res > tol and it < maxiter:
        Ap = A @ p
        alpha = rz / np.vdot(p, Ap).real
        x += alpha * p
        r -= alpha * Ap
        if project is not None:
            r = project(r)
        z = r / d
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        res = np.linalg.norm(r) / bnorm
    report = LinearSolveReport(it, float(res), label)
    report.check(max(tol * 10, tol))
    return x, report


def _check_finite(f: np.ndarray, name: str):
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{name} contains non-finite entries")


# ---------------------------------------------------------------------------
# node-based Poisson problems
# ---------------------------------------------------------------------------

def solve_poisson_dirichlet(grid: Grid2D, f: np.ndarray, g: np.ndarray,
                            tol: float = DEFAULT_TOL
                            ) -> tuple[np.ndarray, LinearSolveReport]:
    """-Lap u = f with u = g on the boundary (node arrays)."""
    _check_finite(f, "f")
    _check_finite(g, "g")
    A = dirichlet_matrix(grid)
    rhs = np.array(f[1:-1, 1:-1], dtype=float, copy=True)
    rhs[0, :] += g[0, 1:-1] / grid.hx ** 2
    rhs[-1, :] += g[-1, 1:-1] / grid.hx ** 2
    rhs[:, 0] += g[1:-1, 0] / grid.hy ** 2
    rhs[:, -1] += g[1:-1, -1] / grid.hy ** 2
    u_int, rep = conjugate_gradient(A, rhs.ravel(), tol=tol, label="poisson-dirichlet")
    u = np.array(g, dtype=float, copy=True)
    u[1:-1, 1:-1] = u_int.reshape(grid.nx - 1, grid.ny - 1)
    return u, rep


def solve_poisson_neumann(grid: Grid2D, f: np.ndarray, g: np.ndarray,
                          tol: float = DEFAULT_TOL, compat_tol: float = 1e-8,
                          g_onesided: tuple[np.ndarray, np.ndarray] | None = None
                          ) -> tuple[np.ndarray, LinearSolveReport]:
    """-Lap u = f, du/dnu = g on the boundary, zero-mean solution.

    `g` is given at the boundary nodes in counterclockwise arc order.  For
    flux data with corner jumps pass `g_onesided = (g_minus, g_plus)`, the
    one-sided values on the interval before/after each node; the boundary
    load is then integrated per interval so corners do not smear.
    Raises on incompatible data (int f + oint g != 0).
    """
    _check_finite(f, "f")
    K, mass = neumann_matrices(grid)
    rhs = mass * np.asarray(f, dtype=float).ravel()
    ii, jj, _, _ = grid.boundary_nodes()
    load = np.zeros(grid.node_shape)
    if g_onesided is not None:
        g_minus, g_plus = g_onesided
        _check_finite(g_minus, "g_minus")
        _check_finite(g_plus, "g_plus")
        ds_before, ds_after = grid.boundary_interval_lengths()
        load[ii, jj] += (0.5 * ds_before * g_minus + 0.5 * ds_after * g_plus) \
            / (grid.hx * grid.hy)
    else:
        _check_finite(g, "g")
        ds = grid.boundary_arc_weights()
        load[ii, jj] += ds * g / (grid.hx * grid.hy)
    rhs += load.ravel()
    total = float(np.sum(rhs))
    scale = float(np.sum(np.abs(rhs))) + 1.0
    if abs(total) > compat_tol * scale:
        raise ValueError(
            f"incompatible Neumann data: int f + oint g = {total:.3e}")

    n = rhs.size
    def project(r):
        return r - np.sum(r) / n
    u_flat, rep = conjugate_gradient(K, project(rhs), tol=tol, project=project,
                                     label="poisson-neumann")
    u = u_flat.reshape(grid.node_shape)
    u -= node_mean(grid, u)
    return u, rep


def solve_poisson_mixed(grid: Grid2D, f: np.ndarray, dom: Domain,
                        tol: float = DEFAULT_TOL
                        ) -> tuple[np.ndarray, LinearSolveReport]:
    """-Lap u = f with u = 0 on the contacts, du/dnu = 0 on the insulators."""
    _check_finite(f, "f")
    K, mass = mixed_matrices(grid)
    rhs = mass * np.asarray(f, dtype=float)[:, 1:-1].ravel()
    u_act, rep = conjugate_gradient(K, rhs, tol=tol, label="poisson-mixed")
    u = np.zeros(grid.node_shape)
    u[:, 1:-1] = u_act.reshape(grid.nx + 1, grid.ny - 1)
    return u, rep


def solve_center_dirichlet(grid: Grid2D, f: np.ndarray, faces=None,
                           tol: float = DEFAULT_TOL
                           ) -> tuple[np.ndarray, LinearSolveReport]:
    """-Lap u = f on cell centers, u = faces (or 0) on the boundary faces."""
    _check_finite(f, "f")
    A = center_dirichlet_matrix(grid)
    rhs = center_dirichlet_rhs(grid, f, faces)
    u, rep = conjugate_gradient(A, rhs, tol=tol, label="poisson-center")
    return u.reshape(grid.center_shape), rep


# ---------------------------------------------------------------------------
# Helmholtz decomposition and Leray projection
# ---------------------------------------------------------------------------

def helmholtz_decompose(grid: Grid2D, U: VectorField, tol: float = DEFAULT_TOL
                        ) -> tuple[VectorField, VectorField, np.ndarray, np.ndarray,
                                   LinearSolveReport]:
    """Split U = V + W with V = grad q (curl free) and W = perp r
    (divergence free, zero normal trace).

    q solves the Neumann problem driven by the weak divergence of U (this
    encodes Lap q = div U, dq/dnu = U.nu, zero mean); r solves the center
    Dirichlet problem -Lap r = curl U.  The two parts are orthogonal in the
    edge inner product by construction.
    """
    _check_finite(U.x, "U.x")
    _check_finite(U.y, "U.y")
    K, mass = neumann_matrices(grid)
    rhs = -(weak_div(grid, U) * mass.reshape(grid.node_shape)).ravel()
    n = rhs.size
    def project(r):
        return r - np.sum(r) / n
    q_flat, rep = conjugate_gradient(K, project(rhs), tol=tol, project=project,
                                     label="helmholtz-q")
    q = q_flat.reshape(grid.node_shape)
    q -= node_mean(grid, q)
    V = grad(grid, q)
    W = U - V
    r, rep2 = solve_center_dirichlet(grid, curl(grid, U), tol=tol)
    worst = LinearSolveReport(rep.iterations + rep2.iterations,
                              max(rep.residual, rep2.residual), "helmholtz")
    return V, W, q, r, worst


def leray_project(grid: Grid2D, U: VectorField, tol: float = DEFAULT_TOL) -> VectorField:
    """Orthogonal projection onto divergence-free fields with zero normal trace."""
    _, W, _, _, _ = helmholtz_decompose(grid, U, tol=tol)
    return W
