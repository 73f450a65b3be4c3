"""Wire geometry, tensor grids, and the boundary magnetic field.

The sample is an axis-aligned rectangle [0, L] x [0, W].  The two current
contacts are the horizontal edges y = 0 and y = W; the two insulated edges
are x = 0 and x = L.  The boundary is parametrized by arc length,
counterclockwise, starting at the corner (0, 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CONTACT = "contact"
INSULATOR = "insulator"


@dataclass(frozen=True)
class BoundarySegment:
    kind: str                      # CONTACT or INSULATOR
    start: tuple[float, float]
    end: tuple[float, float]
    arc_start: float               # arc-length coordinate of `start`
    length: float


@dataclass(frozen=True)
class Domain:
    """Rectangular wire with two contact and two insulator edges."""

    length: float                  # extent in x (between the insulated edges)
    width: float                   # extent in y (between the contacts)
    segments: tuple[BoundarySegment, ...] = field(default=())
    corners: tuple[tuple[float, float], ...] = field(default=())

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.length + self.width)

    @property
    def area(self) -> float:
        return self.length * self.width

    def contact_segments(self) -> list[BoundarySegment]:
        return [s for s in self.segments if s.kind == CONTACT]

    def insulator_segments(self) -> list[BoundarySegment]:
        return [s for s in self.segments if s.kind == INSULATOR]


class Grid2D:
    """Uniform tensor grid on [0, L] x [0, W].

    Scalar unknowns live on the (nx+1) x (ny+1) nodes or on the nx x ny cell
    centers.  Vector fields are edge-based: the x component on the nx x (ny+1)
    horizontal edges, the y component on the (nx+1) x ny vertical edges.
    Arrays are indexed [i, j] with i along x.
    """

    def __init__(self, length: float, width: float, nx: int, ny: int):
        if length <= 0 or width <= 0:
            raise ValueError("domain dimensions must be positive")
        if nx < 4 or ny < 4:
            raise ValueError("grid too coarse: need nx, ny >= 4")
        self.nx = int(nx)
        self.ny = int(ny)
        self.hx = length / nx
        self.hy = width / ny
        self.length = float(length)
        self.width = float(width)
        self.x_nodes = np.linspace(0.0, length, nx + 1)
        self.y_nodes = np.linspace(0.0, width, ny + 1)
        self.x_centers = 0.5 * (self.x_nodes[:-1] + self.x_nodes[1:])
        self.y_centers = 0.5 * (self.y_nodes[:-1] + self.y_nodes[1:])
        self._boundary = None
        self._cache: dict = {}

    # -- shapes -----------------------------------------------------------
    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny + 1)

    @property
    def center_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def edge_shapes(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return (self.nx, self.ny + 1), (self.nx + 1, self.ny)

    def node_xy(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x_nodes, self.y_nodes, indexing="ij")

    # -- trapezoid node weights (1, 1/2 on edges, 1/4 at corners) ---------
    def node_weights(self) -> np.ndarray:
        if "wn" not in self._cache:
            wx = np.ones(self.nx + 1)
            wx[0] = wx[-1] = 0.5
            wy = np.ones(self.ny + 1)
            wy[0] = wy[-1] = 0.5
            self._cache["wn"] = np.outer(wx, wy)
        return self._cache["wn"]

    def edge_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature weights for x-edges and y-edges (1/2 on the boundary)."""
        if "we" not in self._cache:
            wx = np.ones((self.nx, self.ny + 1))
            wx[:, 0] = wx[:, -1] = 0.5
            wy = np.ones((self.nx + 1, self.ny))
            wy[0, :] = wy[-1, :] = 0.5
            self._cache["we"] = (wx, wy)
        return self._cache["we"]

    # -- boundary traversal ------------------------------------------------
    def boundary_nodes(self):
        """Boundary nodes in counterclockwise arc order from (0, 0).

        Returns (i, j, s, seg) integer/float arrays: grid indices, arc-length
        coordinate, and the index of the segment each node lies on (corners
        are attached to the segment that starts there).
        """
        if self._boundary is not None:
            return self._boundary
        nx, ny, hx, hy = self.nx, self.ny, self.hx, self.hy
        L, W = self.length, self.width
        ii, jj, ss, seg = [], [], [], []
        # bottom contact: (0,0) .. (L,0), excludes final corner
        for i in range(nx):
            ii.append(i); jj.append(0); ss.append(i * hx); seg.append(0)
        # right insulator: (L,0) .. (L,W)
        for j in range(ny):
            ii.append(nx); jj.append(j); ss.append(L + j * hy); seg.append(1)
        # top contact: (L,W) .. (0,W)
        for i in range(nx, 0, -1):
            ii.append(i); jj.append(ny); ss.append(L + W + (nx - i) * hx); seg.append(2)
        # left insulator: (0,W) .. (0,0)
        for j in range(ny, 0, -1):
            ii.append(0); jj.append(j); ss.append(2 * L + W + (ny - j) * hy); seg.append(3)
        self._boundary = (np.array(ii), np.array(jj), np.array(ss), np.array(seg))
        return self._boundary

    def boundary_arc_weights(self) -> np.ndarray:
        """Trapezoid arc weights ds for the boundary nodes (loop closed)."""
        _, _, s, _ = self.boundary_nodes()
        per = 2.0 * (self.length + self.width)
        s_ext = np.concatenate([[s[-1] - per], s, [per]])
        return 0.5 * (s_ext[2:] - s_ext[:-2])

    def boundary_face_midpoints(self):
        """Face midpoints (cell faces on the boundary) in ccw arc order.

        Returns (side, k, s): side in 0..3 (bottom/right/top/left), the cell
        index along that side, and the arc coordinate of the face midpoint.
        """
        nx, ny, hx, hy = self.nx, self.ny, self.hx, self.hy
        L, W = self.length, self.width
        side, kk, ss = [], [], []
        for i in range(nx):
            side.append(0); kk.append(i); ss.append((i + 0.5) * hx)
        for j in range(ny):
            side.append(1); kk.append(j); ss.append(L + (j + 0.5) * hy)
        for i in range(nx - 1, -1, -1):
            side.append(2); kk.append(i); ss.append(L + W + (nx - i - 0.5) * hx)
        for j in range(ny - 1, -1, -1):
            side.append(3); kk.append(j); ss.append(2 * L + W + (ny - j - 0.5) * hy)
        return np.array(side), np.array(kk), np.array(ss)

    def boundary_interval_lengths(self) -> tuple[np.ndarray, np.ndarray]:
        """Arc lengths of the boundary interval before and after each node."""
        _, _, s, _ = self.boundary_nodes()
        per = 2.0 * (self.length + self.width)
        ds_after = np.diff(np.concatenate([s, [per]]))
        ds_before = np.roll(ds_after, 1)
        return ds_before, ds_after

    def scatter_boundary(self, values: np.ndarray) -> np.ndarray:
        """Place arc-ordered boundary node values onto a node array (NaN inside)."""
        ii, jj, _, _ = self.boundary_nodes()
        out = np.full(self.node_shape, np.nan)
        out[ii, jj] = values
        return out


@dataclass
class PhysicalParams:
    """Material and drive parameters.

    `jr_magnitude` is the constant reference-current density on the contacts
    (positive entering through y = 0, leaving through y = W).  A tabulated
    profile (arc length -> J_r) overrides it when given.
    """

    kappa: float
    sigma: float
    h: float
    h_ref: float = 0.0
    jr_magnitude: float = 1.0
    jr_table: tuple[np.ndarray, np.ndarray] | None = None  # (s, J_r) samples

    def __post_init__(self):
        if self.kappa <= 0 or self.sigma <= 0:
            raise ValueError("kappa and sigma must be positive")
        if self.h < 0:
            raise ValueError("h must be nonnegative")

    @property
    def c(self) -> float:
        # c is always recomputed from kappa and sigma, never stored.
        return self.kappa ** 2 / self.sigma

    def reference_current(self, dom: Domain, s: np.ndarray, seg: np.ndarray) -> np.ndarray:
        """J_r at arc positions s lying on segments seg (0..3, ccw).

        The default profile is +jr on the bottom contact and -jr on the top
        contact, zero on insulators.  A corner sample takes the value of the
        segment it is attributed to.
        """
        if self.jr_table is not None:
            st, vt = self.jr_table
            vals = np.interp(np.mod(s, dom.perimeter), st, vt)
        else:
            vals = np.where(seg == 0, self.jr_magnitude,
                            np.where(seg == 2, -self.jr_magnitude, 0.0))
        # insulators carry no current regardless of the profile
        return np.where((seg == 1) | (seg == 3), 0.0, vals)


@dataclass(frozen=True)
class BoundaryData:
    """Boundary magnetic field sampled at the boundary nodes, arc ordered."""

    values: np.ndarray             # at grid.boundary_nodes() positions
    face_values: np.ndarray        # at grid.boundary_face_midpoints()
    closure_defect: float          # |B(s+P) - B(s)| before mean adjustment

    def on_nodes(self, grid: Grid2D) -> np.ndarray:
        return grid.scatter_boundary(self.values)

    def face_sides(self, grid: Grid2D) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Split face values into (bottom, right, top, left) in grid index order."""
        nx, ny = grid.nx, grid.ny
        v = self.face_values
        bottom = v[:nx]
        right = v[nx:nx + ny]
        top = v[nx + ny:2 * nx + ny][::-1]
        left = v[2 * nx + ny:][::-1]
        return bottom, right, top, left


def build_strip_domain(length: float, width: float, nx: int, ny: int) -> tuple[Domain, Grid2D]:
    """Rectangular wire with contacts on y=0, y=W and insulators on x=0, x=L."""
    grid = Grid2D(length, width, nx, ny)   # validates inputs
    L, W = float(length), float(width)
    segs = (
        BoundarySegment(CONTACT, (0.0, 0.0), (L, 0.0), 0.0, L),
        BoundarySegment(INSULATOR, (L, 0.0), (L, W), L, W),
        BoundarySegment(CONTACT, (L, W), (0.0, W), L + W, L),
        BoundarySegment(INSULATOR, (0.0, W), (0.0, 0.0), 2 * L + W, W),
    )
    corners = ((0.0, 0.0), (L, 0.0), (L, W), (0.0, W))
    return Domain(L, W, segs, corners), grid


def onesided_reference_current(dom: Domain, grid: Grid2D, p: PhysicalParams
                               ) -> tuple[np.ndarray, np.ndarray]:
    """J_r at each boundary node as seen from the preceding / following
    boundary interval (corner nodes carry the contact-side value only on the
    contact side, so no current leaks into the insulators)."""
    _, _, s, _ = grid.boundary_nodes()
    per = dom.perimeter
    s_next = np.concatenate([s[1:], [per]])
    seg_after = np.array([_segment_of_arc(dom, 0.5 * (a + b))
                          for a, b in zip(s, s_next)])
    seg_before = np.roll(seg_after, 1)
    g_minus = p.reference_current(dom, s, seg_before)
    g_plus = p.reference_current(dom, s, seg_after)
    return g_minus, g_plus


def _segment_of_arc(dom: Domain, s: float) -> int:
    L, W = dom.length, dom.width
    s = s % dom.perimeter
    if s < L:
        return 0
    if s < L + W:
        return 1
    if s < 2 * L + W:
        return 2
    return 3


def boundary_field(dom: Domain, grid: Grid2D, p: PhysicalParams,
                   compat_tol: float = 1e-10) -> BoundaryData:
    """Boundary magnetic field B from the current profile.

    B is built from its tangential increments dB/ds = J_r / kappa^2 along the
    counterclockwise arc (composite trapezoid per boundary interval, each
    interval evaluated with the one-sided current of the segment it lies in,
    so corners do not leak current into the insulators), then shifted so the
    boundary mean equals h_ref.  This is the unique field consistent with the
    increment law and the prescribed average.
    """
    ii, jj, s, seg = grid.boundary_nodes()
    per = dom.perimeter
    k2 = p.kappa ** 2

    def cumulative(arcs: np.ndarray) -> tuple[np.ndarray, float]:
        # trapezoid over each interval with segment-limited endpoint values
        s_next = np.concatenate([arcs[1:], [per]])
        ds = s_next - arcs
        mid_seg = np.array([_segment_of_arc(dom, 0.5 * (a + b))
                            for a, b in zip(arcs, s_next)])
        j_lo = p.reference_current(dom, arcs, mid_seg)
        j_hi = p.reference_current(dom, s_next, mid_seg)
        inc = 0.5 * (j_lo + j_hi) * ds / k2
        total = float(np.sum(inc))
        vals = np.concatenate([[0.0], np.cumsum(inc[:-1])])
        return vals, total

    vals, total = cumulative(s)
    loop_defect = abs(total)
    scale = max(np.max(np.abs(vals)) if len(vals) else 0.0, abs(p.h_ref), 1.0)
    if loop_defect > compat_tol * max(scale, 1.0) * 1e2 + compat_tol:
        raise ValueError(
            f"current profile violates the zero-circulation compatibility "
            f"condition: loop defect {loop_defect:.3e}")

    w = grid.boundary_arc_weights()
    mean = float(np.sum(vals * w) / per)
    vals = vals - mean + p.h_ref

    # Face midpoints: trapezoid increment from the preceding node (B is
    # continuous and piecewise smooth in s).
    _, _, s_face = grid.boundary_face_midpoints()
    fv = np.empty_like(s_face)
    node_of_face = np.searchsorted(s, s_face) - 1
    node_of_face[node_of_face < 0] = 0
    for k, sf in enumerate(s_face):
        k0 = node_of_face[k]
        a, b = s[k0], sf
        mid = _segment_of_arc(dom, 0.5 * (a + b))
        j_lo = p.reference_current(dom, np.array([a]), np.array([mid]))[0]
        j_hi = p.reference_current(dom, np.array([b]), np.array([mid]))[0]
        fv[k] = vals[k0] + 0.5 * (j_lo + j_hi) * (b - a) / k2

    return BoundaryData(values=vals, face_values=fv, closure_defect=loop_defect)
