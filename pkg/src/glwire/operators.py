"""Discrete vector calculus on the staggered node/edge/center layout.

Conventions (fixed once, used everywhere):

    curl V   = dVx/dy - dVy/dx          (edges -> cell centers)
    perp f   = (-df/dy, +df/dx)         (cell centers -> edges)
    grad f   = (df/dx, df/dy)           (nodes -> edges)
    curl2 A  = perp(curl A)             (vector curl-curl)

With these choices the discrete identities

    curl(grad f) = 0,   div(perp s) = 0,   curl(perp s) = -Lap s

hold exactly, which makes the Helmholtz decomposition orthogonal at the
discrete level and keeps stream-function fields divergence free to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .grids import Grid2D


@dataclass
class VectorField:
    """Edge-based vector field: x on horizontal edges, y on vertical edges."""

    x: np.ndarray   # shape (nx, ny+1)
    y: np.ndarray   # shape (nx+1, ny)

    def copy(self) -> "VectorField":
        return VectorField(self.x.copy(), self.y.copy())

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.x - other.x, self.y - other.y)

    def __mul__(self, a: float) -> "VectorField":
        return VectorField(a * self.x, a * self.y)

    __rmul__ = __mul__

    @staticmethod
    def zeros(grid: Grid2D) -> "VectorField":
        (sx, sy) = grid.edge_shapes
        return VectorField(np.zeros(sx), np.zeros(sy))


# ---------------------------------------------------------------------------
# first-order operators
# ---------------------------------------------------------------------------

def grad(grid: Grid2D, f: np.ndarray) -> VectorField:
    """Node scalar -> edge vector, exact differences."""
    gx = (f[1:, :] - f[:-1, :]) / grid.hx
    gy = (f[:, 1:] - f[:, :-1]) / grid.hy
    return VectorField(gx, gy)


def curl(grid: Grid2D, U: VectorField) -> np.ndarray:
    """Edge vector -> center scalar: dUx/dy - dUy/dx."""
    return ((U.x[:, 1:] - U.x[:, :-1]) / grid.hy
            - (U.y[1:, :] - U.y[:-1, :]) / grid.hx)


def perp_grad(grid: Grid2D, s: np.ndarray,
              faces: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None = None
              ) -> VectorField:
    """Center scalar -> edge vector (-ds/dy, +ds/dx).

    Ghost cells implement a Dirichlet condition on the faces: value 0 by
    default, or the supplied (bottom, right, top, left) face traces.
    """
    nx, ny = grid.nx, grid.ny
    pad = np.empty((nx + 2, ny + 2))
    pad[1:-1, 1:-1] = s
    if faces is None:
        pad[1:-1, 0] = -s[:, 0]
        pad[1:-1, -1] = -s[:, -1]
        pad[0, 1:-1] = -s[0, :]
        pad[-1, 1:-1] = -s[-1, :]
    else:
        b, rgt, t, l = faces
        pad[1:-1, 0] = 2.0 * b - s[:, 0]
        pad[1:-1, -1] = 2.0 * t - s[:, -1]
        pad[0, 1:-1] = 2.0 * l - s[0, :]
        pad[-1, 1:-1] = 2.0 * rgt - s[-1, :]
    ex = -(pad[1:-1, 1:] - pad[1:-1, :-1]) / grid.hy      # (nx, ny+1)
    ey = (pad[1:, 1:-1] - pad[:-1, 1:-1]) / grid.hx       # (nx+1, ny)
    return VectorField(ex, ey)


def interior_div(grid: Grid2D, U: VectorField) -> np.ndarray:
    """Divergence at interior nodes, shape (nx-1, ny-1)."""
    dx = (U.x[1:, 1:-1] - U.x[:-1, 1:-1]) / grid.hx
    dy = (U.y[1:-1, 1:] - U.y[1:-1, :-1]) / grid.hy
    return dx + dy


def weak_div(grid: Grid2D, U: VectorField) -> np.ndarray:
    """Weighted weak divergence at all nodes (natural U.n = 0 at the boundary).

    Defined as the negative adjoint of `grad` in the trapezoid inner
    products; coincides with the plain divergence at interior nodes.
    """
    wx, wy = grid.edge_weights()
    out = np.zeros(grid.node_shape, dtype=np.result_type(U.x, U.y))
    fx = wx * U.x
    fy = wy * U.y
    out[:-1, :] += fx / grid.hx
    out[1:, :] -= fx / grid.hx
    out[:, :-1] += fy / grid.hy
    out[:, 1:] -= fy / grid.hy
    return out / grid.node_weights()


def curl_curl(grid: Grid2D, U: VectorField,
              boundary_curl: tuple | None = None) -> VectorField:
    """perp(curl U) with ghost centers enforcing curl U on the boundary faces
    (zero by default)."""
    return perp_grad(grid, curl(grid, U), faces=boundary_curl)


# ---------------------------------------------------------------------------
# inner products and norms
# ---------------------------------------------------------------------------

def node_inner(grid: Grid2D, f: np.ndarray, g: np.ndarray) -> complex:
    w = grid.node_weights()
    return grid.hx * grid.hy * np.sum(w * np.conj(f) * g)


def l2_nodes(grid: Grid2D, f: np.ndarray) -> float:
    return float(np.sqrt(np.real(node_inner(grid, f, f))))


def edge_inner(grid: Grid2D, U: VectorField, V: VectorField) -> complex:
    wx, wy = grid.edge_weights()
    s = np.sum(wx * np.conj(U.x) * V.x) + np.sum(wy * np.conj(U.y) * V.y)
    return grid.hx * grid.hy * s


def l2_edges(grid: Grid2D, U: VectorField) -> float:
    return float(np.sqrt(np.real(edge_inner(grid, U, U))))


def l2_centers(grid: Grid2D, s: np.ndarray) -> float:
    return float(np.sqrt(grid.hx * grid.hy * np.sum(np.abs(s) ** 2)))


def node_mean(grid: Grid2D, f: np.ndarray) -> float:
    w = grid.node_weights()
    return float(np.sum(w * f) / np.sum(w))


# ---------------------------------------------------------------------------
# sparse matrices (cached per grid)
# ---------------------------------------------------------------------------

def _stiff_dirichlet_1d(n_cells: int, h: float) -> sp.csr_matrix:
    n = n_cells - 1
    main = np.full(n, 2.0 / h ** 2)
    off = np.full(n - 1, -1.0 / h ** 2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _stiff_neumann_1d(n_cells: int, h: float) -> sp.csr_matrix:
    n = n_cells + 1
    main = np.full(n, 2.0 / h ** 2)
    main[0] = main[-1] = 1.0 / h ** 2
    off = np.full(n - 1, -1.0 / h ** 2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _stiff_center_dirichlet_1d(n_cells: int, h: float) -> sp.csr_matrix:
    main = np.full(n_cells, 2.0 / h ** 2)
    main[0] = main[-1] = 3.0 / h ** 2   # ghost = 2*g - interior, g folded to rhs
    off = np.full(n_cells - 1, -1.0 / h ** 2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _weights_1d(n_cells: int) -> np.ndarray:
    w = np.ones(n_cells + 1)
    w[0] = w[-1] = 0.5
    return w


def dirichlet_matrix(grid: Grid2D) -> sp.csr_matrix:
    """5-point Laplacian on interior nodes (row order: i-major)."""
    if "A_D" not in grid._cache:
        kx = _stiff_dirichlet_1d(grid.nx, grid.hx)
        ky = _stiff_dirichlet_1d(grid.ny, grid.hy)
        ix = sp.identity(grid.nx - 1, format="csr")
        iy = sp.identity(grid.ny - 1, format="csr")
        grid._cache["A_D"] = (sp.kron(kx, iy) + sp.kron(ix, ky)).tocsr()
    return grid._cache["A_D"]


def neumann_matrices(grid: Grid2D) -> tuple[sp.csr_matrix, np.ndarray]:
    """Weighted Neumann stiffness K on all nodes and the node mass diagonal.

    Weak form of -Lap with natural boundary conditions:  K u = M f + loads.
    K has the constant vector in its kernel.
    """
    if "K_N" not in grid._cache:
        kx = _stiff_neumann_1d(grid.nx, grid.hx)
        ky = _stiff_neumann_1d(grid.ny, grid.hy)
        wx = sp.diags(_weights_1d(grid.nx))
        wy = sp.diags(_weights_1d(grid.ny))
        K = (sp.kron(kx, wy) + sp.kron(wx, ky)).tocsr()
        mass = grid.node_weights().ravel()   # pairs with K: K u = mass*f + loads
        grid._cache["K_N"] = (K, mass)
    return grid._cache["K_N"]


def mixed_matrices(grid: Grid2D) -> tuple[sp.csr_matrix, np.ndarray]:
    """Weak stiffness for u=0 on the contacts (j=0, ny), natural on x faces.

    Unknowns are nodes with 1 <= j <= ny-1, all i; i-major row order.
    """
    if "K_mix" not in grid._cache:
        kx = _stiff_neumann_1d(grid.nx, grid.hx)
        ky = _stiff_dirichlet_1d(grid.ny, grid.hy)
        wx = sp.diags(_weights_1d(grid.nx))
        iy = sp.identity(grid.ny - 1, format="csr")
        K = (sp.kron(kx, iy) + sp.kron(wx, ky)).tocsr()
        mass = np.outer(_weights_1d(grid.nx), np.ones(grid.ny - 1)).ravel()
        grid._cache["K_mix"] = (K, mass)
    return grid._cache["K_mix"]


def center_dirichlet_matrix(grid: Grid2D) -> sp.csr_matrix:
    """-Lap on cell centers with Dirichlet faces (ghost reflection)."""
    if "A_C" not in grid._cache:
        cx = _stiff_center_dirichlet_1d(grid.nx, grid.hx)
        cy = _stiff_center_dirichlet_1d(grid.ny, grid.hy)
        ix = sp.identity(grid.nx, format="csr")
        iy = sp.identity(grid.ny, format="csr")
        grid._cache["A_C"] = (sp.kron(cx, iy) + sp.kron(ix, cy)).tocsr()
    return grid._cache["A_C"]


def center_dirichlet_rhs(grid: Grid2D, f: np.ndarray,
                         faces: tuple | None = None) -> np.ndarray:
    """Right-hand side for the center Dirichlet solve, face data folded in."""
    rhs = np.array(f, dtype=float, copy=True)
    if faces is not None:
        b, r, t, l = faces
        rhs[:, 0] += 2.0 * np.asarray(b) / grid.hy ** 2
        rhs[:, -1] += 2.0 * np.asarray(t) / grid.hy ** 2
        rhs[0, :] += 2.0 * np.asarray(l) / grid.hx ** 2
        rhs[-1, :] += 2.0 * np.asarray(r) / grid.hx ** 2
    return rhs.ravel()
