"""Construction of the current-carrying normal state and its zero curve.

The stationary normal state is (psi, A, phi) = (0, h*A_n, h*phi_n) where

    phi_n:  harmonic, d(phi_n)/dnu = J_r / sigma on the boundary, zero mean
    B_n:    harmonic extension of the boundary field B
    A_n:    perp(theta_n) with -Lap theta_n = B_n, theta_n = 0 on the faces

so that curl A_n = B_n, div A_n = 0 and A_n.nu = 0 hold exactly on the
staggered grid, and the force balance c*curl2(A_n) + grad(phi_n) = 0 holds
to second order.  phi_n + i*c*B_n is then holomorphic (Cauchy-Riemann pair).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from skimage import measure

from .elliptic import (solve_center_dirichlet, solve_poisson_dirichlet,
                       solve_poisson_neumann)
from .grids import (BoundaryData, Domain, Grid2D, PhysicalParams,
                    boundary_field, onesided_reference_current)
from .operators import (VectorField, curl, curl_curl, grad, l2_centers,
                        l2_edges, perp_grad)


class ZeroCurveError(RuntimeError):
    """The zero set of B_n is not a single contact-to-contact curve."""


@dataclass
class NormalState:
    phi_n: np.ndarray               # nodes, zero mean
    B_n: np.ndarray                 # nodes
    B_n_centers: np.ndarray         # cell centers (source of theta_n)
    theta_n: np.ndarray             # cell centers, stream function of A_n
    A_n: VectorField                # edges
    bdata: BoundaryData
    B_min: float
    B_max: float
    gamma: np.ndarray | None        # zero-curve polyline, shape (m, 2), or None
    z1: tuple[float, float] | None  # endpoint with the smaller phi_n
    z2: tuple[float, float] | None
    dom: Domain
    grid: Grid2D
    params: PhysicalParams


def build_normal_state(dom: Domain, grid: Grid2D, p: PhysicalParams) -> NormalState:
    bdata = boundary_field(dom, grid, p)

    # electric potential: harmonic with current flux data, zero mean;
    # corner fluxes are integrated one-sided so the insulators stay dry
    ii, jj, s, seg = grid.boundary_nodes()
    g_minus, g_plus = onesided_reference_current(dom, grid, p)
    zeros = np.zeros(grid.node_shape)
    phi_n, _ = solve_poisson_neumann(
        grid, zeros, None, g_onesided=(g_minus / p.sigma, g_plus / p.sigma))

    # induced field: harmonic extension of the boundary data (node grid)
    g = np.zeros(grid.node_shape)
    g[ii, jj] = bdata.values
    B_n, _ = solve_poisson_dirichlet(grid, zeros, g)

    # cell-center twin of B_n, driven by the face-midpoint boundary data
    faces = bdata.face_sides(grid)
    B_nc, _ = solve_center_dirichlet(grid, np.zeros(grid.center_shape), faces=faces)

    # stream function and vector potential
    theta_n, _ = solve_center_dirichlet(grid, B_nc)
    A_n = perp_grad(grid, theta_n)

    B_min = float(np.min(B_n))
    B_max = float(np.max(B_n))

    gamma, z1, z2 = zero_curve_of(grid, B_n, phi_n, B_min, B_max)
    return NormalState(phi_n=phi_n, B_n=B_n, B_n_centers=B_nc, theta_n=theta_n,
                       A_n=A_n, bdata=bdata, B_min=B_min, B_max=B_max,
                       gamma=gamma, z1=z1, z2=z2, dom=dom, grid=grid, params=p)


# ---------------------------------------------------------------------------
# residual diagnostics
# ---------------------------------------------------------------------------

def normal_state_residual(ns: NormalState, c: float) -> float:
    """L2 norm of the stationary force balance c*curl2(A_n) + grad(phi_n).

    Evaluated on edges whose curl-curl stencil stays inside the domain.
    """
    grid = ns.grid
    cc = curl_curl(grid, ns.A_n)
    gp = grad(grid, ns.phi_n)
    rx = c * cc.x[:, 1:-1] + gp.x[:, 1:-1]
    ry = c * cc.y[1:-1, :] + gp.y[1:-1, :]
    return float(np.sqrt(grid.hx * grid.hy *
                         (np.sum(rx ** 2) + np.sum(ry ** 2))))


def cauchy_riemann_residual(ns: NormalState, c: float) -> float:
    """L2 norm of (dx phi_n - c dy B_n, dy phi_n + c dx B_n) at interior nodes.

    Vanishes (to discretization error) because phi_n + i c B_n is holomorphic
    for the constructed normal state.
    """
    grid = ns.grid
    phi, B = ns.phi_n, ns.B_n
    dxp = (phi[2:, 1:-1] - phi[:-2, 1:-1]) / (2 * grid.hx)
    dyp = (phi[1:-1, 2:] - phi[1:-1, :-2]) / (2 * grid.hy)
    dxb = (B[2:, 1:-1] - B[:-2, 1:-1]) / (2 * grid.hx)
    dyb = (B[1:-1, 2:] - B[1:-1, :-2]) / (2 * grid.hy)
    r1 = dxp - c * dyb
    r2 = dyp + c * dxb
    return float(np.sqrt(grid.hx * grid.hy * (np.sum(r1 ** 2) + np.sum(r2 ** 2))))


# ---------------------------------------------------------------------------
# zero curve of the induced field
# ---------------------------------------------------------------------------

def _discretization_error_estimate(grid: Grid2D, B: np.ndarray) -> float:
    # crude O(h^2) bound from second differences: h^2 |f''| / 12
    fxx = np.abs(np.diff(B, 2, axis=0)).max(initial=0.0) / grid.hx ** 2
    fyy = np.abs(np.diff(B, 2, axis=1)).max(initial=0.0) / grid.hy ** 2
    return (grid.hx ** 2 * fxx + grid.hy ** 2 * fyy) / 12.0


def zero_curve_of(grid: Grid2D, B_n: np.ndarray, phi_n: np.ndarray,
                  B_min: float, B_max: float):
    """Marching-squares zero level set of B_n.

    Returns (polyline, z1, z2) with the polyline ordered so phi_n increases
    from z1 to z2, or (None, None, None) when 0 is not attained inside.
    Raises ZeroCurveError when the zero set has several components.
    """
    err = _discretization_error_estimate(grid, B_n)
    if not (B_min < -10.0 * err and B_max > 10.0 * err):
        return None, None, None
    # find_contours expects [row, col] = [i, j]; B_n is indexed [i, j]
    contours = measure.find_contours(B_n, 0.0)
    contours = [c for c in contours if len(c) >= 2]
    if len(contours) != 1:
        raise ZeroCurveError(
            f"zero set of B_n has {len(contours)} components; expected one "
            f"(assumption violated or grid under-resolved)")
    c = contours[0]
    pts = np.column_stack([c[:, 0] * grid.hx, c[:, 1] * grid.hy])

    tol = 1e-9 * max(grid.length, grid.width)
    def on_contact(pt):
        return pt[1] <= tol or pt[1] >= grid.width - tol
    e1, e2 = pts[0], pts[-1]
    if not (on_contact(e1) and on_contact(e2)):
        raise ZeroCurveError(
            "zero curve endpoints do not lie on the contact edges "
            f"(got {tuple(e1)} and {tuple(e2)})")

    p1 = bilinear(grid, phi_n, *e1)
    p2 = bilinear(grid, phi_n, *e2)
    if p1 > p2:
        pts = pts[::-1]
        e1, e2 = e2, e1
    return pts, (float(e1[0]), float(e1[1])), (float(e2[0]), float(e2[1]))


def bilinear(grid: Grid2D, f: np.ndarray, x: float, y: float) -> float:
    """Bilinear interpolation of a node field at a physical point."""
    fx = min(max(x / grid.hx, 0.0), grid.nx - 1e-12)
    fy = min(max(y / grid.hy, 0.0), grid.ny - 1e-12)
    i, j = int(fx), int(fy)
    tx, ty = fx - i, fy - j
    return float((1 - tx) * (1 - ty) * f[i, j] + tx * (1 - ty) * f[i + 1, j]
                 + (1 - tx) * ty * f[i, j + 1] + tx * ty * f[i + 1, j + 1])


def _node_gradient(grid: Grid2D, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx = np.gradient(f, grid.hx, axis=0)   # centered, one-sided at the boundary
    gy = np.gradient(f, grid.hy, axis=1)
    return gx, gy


def current_gradient_intensity(ns: NormalState, z: tuple[float, float],
                               h: float) -> float:
    """h * |grad B_n| at a point: the local current-gradient intensity."""
    gx, gy = _node_gradient(ns.grid, ns.B_n)
    return float(h * np.hypot(bilinear(ns.grid, gx, *z), bilinear(ns.grid, gy, *z)))


def current_intensity_min(ns: NormalState, h: float) -> float:
    """Minimum intensity along the zero curve."""
    if ns.gamma is None:
        raise ZeroCurveError("zero curve is empty; intensity minimum undefined")
    gx, gy = _node_gradient(ns.grid, ns.B_n)
    vals = [h * np.hypot(bilinear(ns.grid, gx, x, y), bilinear(ns.grid, gy, x, y))
            for x, y in ns.gamma]
    return float(min(vals))


def current_intensity_endpoints(ns: NormalState, h: float) -> float:
    """Minimum intensity over the two contact endpoints of the zero curve."""
    if ns.gamma is None or ns.z1 is None:
        raise ZeroCurveError("zero curve is empty; endpoint intensity undefined")
    return min(current_gradient_intensity(ns, ns.z1, h),
               current_gradient_intensity(ns, ns.z2, h))
