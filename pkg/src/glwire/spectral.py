"""Link-variable magnetic operators, eigenvalues, and resolvent-norm scans.

The gauge-covariant Laplacian is discretized with link variables: the
hopping across an edge carries the phase exp(i * integral of the scaled
vector potential along the edge), which makes the discrete operator exactly
gauge invariant.  Non-Hermitian resolvent norms are computed as reciprocal
smallest singular values via Lanczos iteration on the inverse normal
equations (two triangular solves per step from one sparse LU).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grids import Domain, Grid2D
from .normal_state import NormalState
from .operators import VectorField

_SEED = 20240901


@dataclass
class SparseOperator:
    """Assembled discrete operator with boundary-condition metadata."""

    mat: sp.csr_matrix
    hermitian: bool
    bc: str                       # "dirichlet", "dirichlet-neumann", ...
    grid: object = None           # grid or (hx, hy) descriptor
    active: tuple | None = None   # index arrays of active nodes
    note: str = ""

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


@dataclass
class EigenResult:
    value: complex
    residual: float
    iterations: int = 0
    vector: np.ndarray | None = None


@dataclass
class ResolventScan:
    nu: float
    gammas: np.ndarray
    norms: np.ndarray
    sup_value: float              # max over scan and refinement
    tail_bound: float             # C / (1 + gamma_max) estimate beyond the scan
    gamma_range: tuple[float, float] = (0.0, 0.0)
    refined: list = field(default_factory=list)

    @property
    def sup_with_tail(self) -> float:
        return max(self.sup_value, self.tail_bound)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _link_form(nx, ny, hx, hy, active, theta_x, theta_y, wx_edge, wy_edge,
               mass):
    """Hermitian link-variable form on the active nodes.

    active: bool (nx+1, ny+1); theta_*: edge phases (h * A * edge length);
    wx_edge/wy_edge: quadrature weights per edge; mass: node weights.
    Returns the normalized operator D^{-1/2} K D^{-1/2} as CSR, plus the
    index map.
    """
    idx = -np.ones((nx + 1, ny + 1), dtype=np.int64)
    act_i, act_j = np.nonzero(active)
    idx[act_i, act_j] = np.arange(len(act_i))
    n = len(act_i)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)

    def add_edges(p_idx, q_idx, theta, w, inv_h2):
        both = (p_idx >= 0) & (q_idx >= 0)
        p_only = (p_idx >= 0) & (q_idx < 0)
        q_only = (q_idx >= 0) & (p_idx < 0)
        np.add.at(diag, p_idx[both | p_only], (w * inv_h2)[both | p_only])
        np.add.at(diag, q_idx[both | q_only], (w * inv_h2)[both | q_only])
        hop = -(w * inv_h2 * np.exp(-1j * theta))[both]
        rows.append(p_idx[both]); cols.append(q_idx[both]); vals.append(hop)
        rows.append(q_idx[both]); cols.append(p_idx[both]); vals.append(np.conj(hop))

    # x edges: (i, j) -> (i+1, j)
    pi, pj = np.meshgrid(np.arange(nx), np.arange(ny + 1), indexing="ij")
    add_edges(idx[pi, pj].ravel(), idx[pi + 1, pj].ravel(),
              theta_x.ravel(), wx_edge.ravel(),
              np.full(theta_x.size, 1.0 / hx ** 2))
    # y edges: (i, j) -> (i, j+1)
    pi, pj = np.meshgrid(np.arange(nx + 1), np.arange(ny), indexing="ij")
    add_edges(idx[pi, pj].ravel(), idx[pi, pj + 1].ravel(),
              theta_y.ravel(), wy_edge.ravel(),
              np.full(theta_y.size, 1.0 / hy ** 2))

    rows = np.concatenate(rows); cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    K = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    K = K + sp.diags(diag)
    m = mass[act_i, act_j]
    return K, m, (act_i, act_j)


def _normalized_link_operator(nx, ny, hx, hy, active, theta_x, theta_y,
                              wx_edge, wy_edge, mass):
    K, m, act = _link_form(nx, ny, hx, hy, active, theta_x, theta_y,
                           wx_edge, wy_edge, mass)
    D = sp.diags(1.0 / np.sqrt(m))
    return (D @ K @ D).tocsr(), act


def assemble_magnetic_laplacian(grid: Grid2D, A: VectorField, scale_h: float,
                                dom: Domain) -> SparseOperator:
    """Gauge-covariant Laplacian with psi = 0 on the contacts (y faces) and
    magnetic-Neumann (mirror) condition on the insulators."""
    nx, ny = grid.nx, grid.ny
    active = np.zeros((nx + 1, ny + 1), dtype=bool)
    active[:, 1:ny] = True
    theta_x = scale_h * A.x * grid.hx
    theta_y = scale_h * A.y * grid.hy
    wx_edge = np.ones((nx, ny + 1))          # all contributing x edges interior in j
    wy_edge = np.ones((nx + 1, ny))
    wy_edge[0, :] = wy_edge[-1, :] = 0.5
    mass = np.ones((nx + 1, ny + 1))
    mass[0, :] = mass[-1, :] = 0.5
    mat, active_idx = _normalized_link_operator(nx, ny, grid.hx, grid.hy, active,
                                                theta_x, theta_y, wx_edge,
                                                wy_edge, mass)
    return SparseOperator(mat=mat, hermitian=True, bc="dirichlet-neumann",
                          grid=grid, active=active_idx, note="magnetic laplacian")


def node_field_on_active(op: SparseOperator, f: np.ndarray) -> np.ndarray:
    i, j = op.active
    return f[i, j]


def assemble_linearized_operator(ns: NormalState, h: float, grid: Grid2D,
                                 dom: Domain, phi_sign: float = 1.0) -> SparseOperator:
    """Linearization around the normal state: magnetic Laplacian plus the
    imaginary potential i*h*phi_n.  `phi_sign` exists only for mutation tests."""
    mag = assemble_magnetic_laplacian(grid, ns.A_n, h, dom)
    phi = node_field_on_active(mag, ns.phi_n)
    mat = (mag.mat + sp.diags(1j * phi_sign * h * phi)).tocsr()
    return SparseOperator(mat=mat, hermitian=False, bc="dirichlet-neumann",
                          grid=grid, active=mag.active, note="linearized operator")


def assemble_dirichlet_laplacian(grid: Grid2D) -> SparseOperator:
    from .operators import dirichlet_matrix
    mat = dirichlet_matrix(grid).astype(complex).tocsr()
    return SparseOperator(mat=mat, hermitian=True, bc="dirichlet", grid=grid,
                          note="dirichlet laplacian")


# ---------------------------------------------------------------------------
# Hermitian eigenvalues
# ---------------------------------------------------------------------------

def smallest_eigenvalue(op: SparseOperator, tol: float = 1e-10,
                        residual_tol: float = 1e-8) -> EigenResult:
    """Smallest eigenvalue of a Hermitian positive operator (shift-invert)."""
    if not op.hermitian:
        raise ValueError("smallest_eigenvalue requires a Hermitian operator")
    n = op.dim
    rng = np.random.default_rng(_SEED)
    v0 = rng.standard_normal(n)
    w, v = spla.eigsh(op.mat, k=1, sigma=0.0, which="LM", v0=v0, tol=tol)
    lam = float(w[0])
    vec = v[:, 0] / np.linalg.norm(v[:, 0])
    res = float(np.linalg.norm(op.mat @ vec - lam * vec))
    # Rayleigh-quotient polish: shift-invert at the current estimate
    it = 0
    while res > residual_tol and it < 6:
        shifted = (op.mat - lam * sp.identity(n, format="csr")).tocsc()
        try:
            vec = spla.splu(shifted).solve(vec)
        except RuntimeError:
            break   # exactly singular: lam is already machine precision
        vec /= np.linalg.norm(vec)
        lam = float(np.real(np.vdot(vec, op.mat @ vec)))
        res = float(np.linalg.norm(op.mat @ vec - lam * vec))
        it += 1
    if res > residual_tol:
        raise RuntimeError(f"eigenvalue residual {res:.2e} exceeds {residual_tol:.1e}")
    return EigenResult(value=lam, residual=res, iterations=it, vector=vec)


def magnetic_ground_energy(ns: NormalState, h: float, grid: Grid2D,
                           dom: Domain) -> EigenResult:
    """Ground energy of the gauge-covariant Laplacian at field intensity h."""
    op = assemble_magnetic_laplacian(grid, ns.A_n, h, dom)
    return smallest_eigenvalue(op)


def dirichlet_ground_energy(grid: Grid2D, dom: Domain) -> EigenResult:
    """Ground energy of the Dirichlet Laplacian (field-relaxation rate / c)."""
    return smallest_eigenvalue(assemble_dirichlet_laplacian(grid))


# ---------------------------------------------------------------------------
# resolvent norms
# ---------------------------------------------------------------------------

class ResolventCapExceeded(RuntimeError):
    """Shift is (numerically) in the spectrum: resolvent above the cap."""


def smallest_singular_value(mat: sp.spmatrix, tol: float = 1e-8,
                            maxiter: int = 200, cap: float = 1e12
                            ) -> tuple[float, np.ndarray, int]:
    """Smallest singular value of `mat` by Lanczos on inv(B) inv(B)^H.

    Returns (sigma_min, minimizing unit vector v, iterations).  Raises
    ResolventCapExceeded when 1/sigma_min exceeds `cap`.
    """
    n = mat.shape[0]
    try:
        lu = spla.splu(mat.tocsc())
    except RuntimeError as exc:
        raise ResolventCapExceeded(f"factorization failed: {exc}") from exc
    rng = np.random.default_rng(_SEED)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)

    def apply_m(x):
        return lu.solve(lu.solve(x, trans="H"), trans="N")

    # Lanczos with full reorthogonalization (the basis stays small)
    Q = [v]
    alphas: list[float] = []
    betas: list[float] = []
    top = 0.0
    top_old = None
    y = np.array([1.0])
    it = 0
    for it in range(1, maxiter + 1):
        w = apply_m(Q[-1])
        alphas.append(float(np.real(np.vdot(Q[-1], w))))
        for q in Q:
            w -= np.vdot(q, w) * q
        beta = float(np.linalg.norm(w))
        T = np.diag(alphas)
        for k in range(len(betas)):
            T[k, k + 1] = T[k + 1, k] = betas[k]
        evals, evecs = np.linalg.eigh(T)
        top = float(evals[-1])
        y = evecs[:, -1]
        if top > cap ** 2:
            raise ResolventCapExceeded(
                f"resolvent norm exceeds cap {cap:.1e} (shift near spectrum)")
        converged = top_old is not None and abs(top - top_old) <= tol * abs(top)
        top_old = top
        if converged or beta < 1e-14 * np.sqrt(abs(top)) or it == maxiter:
            break
        Q.append(w / beta)
        betas.append(beta)

    top_vec = sum(c * q for c, q in zip(y, Q))
    sigma = 1.0 / np.sqrt(top)
    vmin = top_vec / np.linalg.norm(top_vec)
    return float(sigma), vmin, it


def resolvent_norm(op: SparseOperator, nu: float, gamma: float,
                   tol: float = 1e-8, cap: float = 1e12) -> float:
    """||(op - nu - i*gamma)^{-1}|| with an a-posteriori certificate."""
    z = nu + 1j * gamma
    shifted = (op.mat - z * sp.identity(op.dim, format="csr")).tocsr()
    sigma, vmin, _ = smallest_singular_value(shifted, tol=tol, cap=cap)
    norm = 1.0 / sigma
    # certificate: ||B v|| * norm >= 1 - 1e-6 on the minimizing vector
    bv = np.linalg.norm(shifted @ vmin)
    if bv * norm < 1.0 - 1e-6:
        # the Lanczos estimate overshot; fall back to the certified bound
        norm = 1.0 / bv
    return float(norm)


def _local_maxima(xs: np.ndarray, ys: np.ndarray) -> list[int]:
    out = []
    for k in range(len(ys)):
        left = ys[k - 1] if k > 0 else -np.inf
        right = ys[k + 1] if k < len(ys) - 1 else -np.inf
        if ys[k] >= left and ys[k] >= right:
            out.append(k)
    return out


def resolvent_sup_over_gamma(op: SparseOperator, nu: float, gamma_max: float,
                             n_gamma: int = 41, refine: int = 2,
                             tol: float = 1e-8, cap: float = 1e12) -> ResolventScan:
    """sup over gamma of ||(op - nu - i gamma)^{-1}|| on a symmetric scan.

    Local maxima are refined by golden-section search; the decay beyond the
    scan window is bounded by C/(1+|gamma|) with C calibrated from the
    outermost samples.
    """
    gammas = np.linspace(-gamma_max, gamma_max, n_gamma)
    norms = np.array([resolvent_norm(op, nu, g, tol=tol, cap=cap) for g in gammas])
    best = float(np.max(norms))
    refined = []

    phi = (np.sqrt(5.0) - 1.0) / 2.0
    for k in sorted(_local_maxima(gammas, norms), key=lambda k: -norms[k])[:refine]:
        a = gammas[max(k - 1, 0)]
        b = gammas[min(k + 1, len(gammas) - 1)]
        fcache = {}
        def f(g):
            if g not in fcache:
                fcache[g] = resolvent_norm(op, nu, g, tol=tol, cap=cap)
            return fcache[g]
        x1 = b - phi * (b - a)
        x2 = a + phi * (b - a)
        for _ in range(20):
            if f(x1) < f(x2):
                a = x1; x1 = x2; x2 = a + phi * (b - a)
            else:
                b = x2; x2 = x1; x1 = b - phi * (b - a)
            if abs(b - a) < 1e-4 * max(1.0, gamma_max):
                break
        gbest = 0.5 * (a + b)
        vbest = f(gbest)
        refined.append((gbest, vbest))
        best = max(best, vbest)

    m = max(2, n_gamma // 8)
    outer = np.argsort(np.abs(gammas))[-m:]
    c_est = float(np.max(norms[outer] * (1.0 + np.abs(gammas[outer]))))
    tail = c_est / (1.0 + gamma_max)
    return ResolventScan(nu=nu, gammas=gammas, norms=norms, sup_value=best,
                         tail_bound=tail, gamma_range=(-gamma_max, gamma_max),
                         refined=refined)


# ---------------------------------------------------------------------------
# stability certificates
# ---------------------------------------------------------------------------

@dataclass
class CertificateReport:
    mu: float
    threshold: float
    mu_margin: float
    inv_norm: float
    inv_norm_margin: float
    scan_sup: float
    scan_margin: float
    passes: dict

    @property
    def all_pass(self) -> bool:
        return all(self.passes.values())


def stability_certificates(ns: NormalState, h: float, kappa: float,
                           scan: ResolventScan, mu: float, lam: float,
                           c1: float = 0.0, nu: float = 0.0) -> CertificateReport:
    """Evaluate the three sufficient global-stability conditions.

    (i)  spectral-gap condition on the magnetic ground energy,
    (ii) contraction of the inverse of the linearized operator,
    (iii) contraction of its resolvent along the scanned vertical line.
    The comparison constant c1 defaults to 0 (pure contraction test).
    """
    from .decay import condition_threshold
    thr = condition_threshold(lam, ns.params.c, kappa)
    bound = 1.0 - c1 / kappa ** 2
    inv_norm = resolvent_norm_from_scan_at_zero(scan)
    passes = {
        "spectral_gap": mu > thr,
        "inverse_contraction": inv_norm < bound,
        "resolvent_contraction": scan.sup_with_tail < bound,
    }
    return CertificateReport(mu=mu, threshold=thr, mu_margin=mu - thr,
                             inv_norm=inv_norm, inv_norm_margin=bound - inv_norm,
                             scan_sup=scan.sup_with_tail,
                             scan_margin=bound - scan.sup_with_tail,
                             passes=passes)


def resolvent_norm_from_scan_at_zero(scan: ResolventScan) -> float:
    k = int(np.argmin(np.abs(scan.gammas - 0.0)))
    return float(scan.norms[k])
