"""IMEX time integrators for the full nonlinear system in two gauges.

Coulomb gauge: div A = 0, A.nu = 0, zero-mean electric potential.  The
field deviation A - h*A_n is divergence free with curl = 0 on the boundary,
so it is evolved through its stream function on cell centers: one backward
Euler solve with a constant operator, the Leray projection built in.  The
order parameter takes one IMEX step: exact phase rotation by the electric
potential, explicit reaction, implicit link-variable Laplacian (rebuilt
each step because the links move).

phi = -c div A gauge: the vector potential splits exactly into stream and
gradient potentials (discrete Hodge decomposition); both evolve by backward
Euler heat flows with constant operators driven by the Hodge parts of the
supercurrent.  The order parameter sees a plain implicit Laplacian with the
magnetic/electric terms explicit.

Both steppers keep the discrete normal state exactly stationary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grids import Domain, Grid2D, PhysicalParams
from .normal_state import NormalState
from .operators import (VectorField, center_dirichlet_matrix,
                        center_dirichlet_rhs, curl, grad, l2_edges, l2_nodes,
                        neumann_matrices, node_mean, perp_grad, weak_div)
from .spectral import _link_form

COULOMB = "coulomb"
PHI_DIV = "phi_div"
COHERENCE = "coherence"
PENETRATION = "penetration"

MAX_PRINCIPLE_ABORT = 1e-6
DT_REACTION_CAP = 0.25


class BlowUpError(RuntimeError):
    """The integration left the physical regime (max principle violated)."""


@dataclass
class TdglState:
    psi: np.ndarray              # nodes, complex
    A: VectorField               # edges
    phi: np.ndarray              # nodes
    t: float
    gauge: str
    scaling: str = COHERENCE
    # gauge-internal potentials (phi_div): A = h*s_A*A_nd + perp(xi) + grad(eta)
    xi: np.ndarray | None = None
    eta: np.ndarray | None = None
    # coulomb stream function: A = h*s_A*A_n + perp(r1)
    r1: np.ndarray | None = None

    def copy(self) -> "TdglState":
        return TdglState(psi=self.psi.copy(), A=self.A.copy(),
                         phi=self.phi.copy(), t=self.t, gauge=self.gauge,
                         scaling=self.scaling,
                         xi=None if self.xi is None else self.xi.copy(),
                         eta=None if self.eta is None else self.eta.copy(),
                         r1=None if self.r1 is None else self.r1.copy())


@dataclass
class ScalingCoefficients:
    """Coefficients of the generic system

        dpsi/dt = grad_{s_link A}^2 psi + r (1-|psi|^2) psi - i p phi psi
        sigma (dA/dt + grad phi) + kappa^2 curl2 A = q Im(conj(psi) grad_{s_link A} psi)

    coherence-length units: all ones; penetration-depth units: the system
    rescaled by x -> x/kappa, phi -> kappa phi.
    """
    s_link: float
    reaction: float
    p_phi: float
    q_super: float
    s_A: float                   # normal-state potential scale: A = h s_A A_n


def scaling_coefficients(scaling: str, kappa: float) -> ScalingCoefficients:
    if scaling == COHERENCE:
        return ScalingCoefficients(1.0, 1.0, 1.0, 1.0, 1.0)
    if scaling == PENETRATION:
        return ScalingCoefficients(kappa, kappa ** 2, kappa, kappa, kappa ** 2)
    raise ValueError(f"unknown scaling {scaling!r}")


# ---------------------------------------------------------------------------
# shared field helpers
# ---------------------------------------------------------------------------

def link_phases(grid: Grid2D, A: VectorField, s_link: float
                ) -> tuple[np.ndarray, np.ndarray]:
    return s_link * A.x * grid.hx, s_link * A.y * grid.hy


def supercurrent(grid: Grid2D, psi: np.ndarray, A: VectorField,
                 s_link: float, sign: float = 1.0) -> VectorField:
    """Gauge-covariant lattice current Im(conj(psi_p) e^{-i theta} psi_q)/len."""
    tx, ty = link_phases(grid, A, s_link)
    sx = np.imag(np.conj(psi[:-1, :]) * np.exp(-1j * tx) * psi[1:, :]) / grid.hx
    sy = np.imag(np.conj(psi[:, :-1]) * np.exp(-1j * ty) * psi[:, 1:]) / grid.hy
    return VectorField(sign * sx, sign * sy)


def covariant_gradient_sq(grid: Grid2D, psi: np.ndarray, A: VectorField,
                          s_link: float) -> float:
    """||grad_A psi||_2^2 from the link-covariant edge differences."""
    tx, ty = link_phases(grid, A, s_link)
    dx = (np.exp(-1j * tx) * psi[1:, :] - psi[:-1, :]) / grid.hx
    dy = (np.exp(-1j * ty) * psi[:, 1:] - psi[:, :-1]) / grid.hy
    wx, wy = grid.edge_weights()
    return float(grid.hx * grid.hy * (np.sum(wx * np.abs(dx) ** 2)
                                      + np.sum(wy * np.abs(dy) ** 2)))


def edges_to_nodes(grid: Grid2D, U: VectorField) -> tuple[np.ndarray, np.ndarray]:
    """Average edge components to nodes (one-sided at the boundary)."""
    nx, ny = grid.nx, grid.ny
    dtype = np.result_type(U.x, U.y)
    ax = np.empty((nx + 1, ny + 1), dtype=dtype)
    ax[1:-1, :] = 0.5 * (U.x[:-1, :] + U.x[1:, :])
    ax[0, :] = U.x[0, :]
    ax[-1, :] = U.x[-1, :]
    ay = np.empty((nx + 1, ny + 1), dtype=dtype)
    ay[:, 1:-1] = 0.5 * (U.y[:, :-1] + U.y[:, 1:])
    ay[:, 0] = U.y[:, 0]
    ay[:, -1] = U.y[:, -1]
    return ax, ay


def _bordered_neumann_factor(grid: Grid2D):
    """LU of the mean-constrained Neumann stiffness [[K, w], [w^T, 0]]."""
    K, mass = neumann_matrices(grid)
    n = K.shape[0]
    w = sp.csr_matrix(mass.reshape(n, 1))
    M = sp.bmat([[K, w], [w.T, None]], format="csc")
    return spla.splu(M), mass


def _solve_bordered(lu, n: int, rhs: np.ndarray) -> np.ndarray:
    full = np.concatenate([rhs, [0.0]])
    return lu.solve(full)[:n]


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def init_state(psi0: np.ndarray, A0: VectorField, dom: Domain, grid: Grid2D,
               p: PhysicalParams, gauge: str = COULOMB,
               scaling: str = COHERENCE,
               ns: NormalState | None = None) -> TdglState:
    """Gauge-fix the initial data: project A0 onto divergence-free fields
    with zero normal trace and rotate psi0 by the corresponding gauge phase.

    When the normal state is supplied, the electric potential starts on its
    stationary value (it is re-derived from the state at every step anyway).
    """
    if np.max(np.abs(psi0)) > 1.0 + 1e-12:
        raise ValueError("initial order parameter exceeds 1 in modulus")
    if not (np.all(np.isfinite(psi0.view(float))) and
            np.all(np.isfinite(A0.x)) and np.all(np.isfinite(A0.y))):
        raise ValueError("initial fields must be finite")
    from .elliptic import helmholtz_decompose
    _, W, q, _, _ = helmholtz_decompose(grid, A0, tol=1e-12)
    omega0 = -q
    psi = psi0 * np.exp(1j * omega0)
    psi[:, 0] = 0.0
    psi[:, -1] = 0.0
    phi = np.zeros(grid.node_shape)
    if ns is not None:
        phi = (p.h * scaling_coefficients(scaling, p.kappa).s_A) * ns.phi_n
    return TdglState(psi=psi.astype(complex), A=W, phi=phi,
                     t=0.0, gauge=gauge, scaling=scaling)


def gauge_transform(state: TdglState, grid: Grid2D, omega: np.ndarray,
                    domega_dt: np.ndarray) -> TdglState:
    """Exact discrete gauge map: A += grad(omega), phi -= d(omega)/dt,
    psi *= exp(i omega)."""
    out = state.copy()
    out.A = state.A + grad(grid, omega)
    out.phi = state.phi - domega_dt
    out.psi = state.psi * np.exp(1j * omega)
    return out


# ---------------------------------------------------------------------------
# Coulomb-gauge stepper
# ---------------------------------------------------------------------------

class CoulombStepper:
    """One-owner integrator; factorizations are prepared once."""

    def __init__(self, ns: NormalState, grid: Grid2D, dom: Domain,
                 p: PhysicalParams, dt: float, scaling: str = COHERENCE,
                 mutation: str | None = None):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.ns, self.grid, self.dom, self.p = ns, grid, dom, p
        self.dt = dt
        self.coef = scaling_coefficients(scaling, p.kappa)
        if dt * self.coef.reaction > DT_REACTION_CAP:
            raise ValueError(
                f"dt * reaction coefficient = {dt * self.coef.reaction:.3g} "
                f"exceeds the explicit-reaction cap {DT_REACTION_CAP}")
        self.mutation = mutation
        self.scaling = scaling
        kappa, sigma = p.kappa, p.sigma

        A_C = center_dirichlet_matrix(grid)
        self._lu_center = spla.splu(A_C.tocsc())
        helm = (sigma / dt) * sp.identity(A_C.shape[0], format="csr") \
            + kappa ** 2 * A_C
        self._lu_helm = spla.splu(helm.tocsc())
        self._lu_neu, self._neu_mass = _bordered_neumann_factor(grid)
        self._n_nodes = grid.node_shape[0] * grid.node_shape[1]

        # active set for the psi solve (contacts eliminated)
        nx, ny = grid.nx, grid.ny
        self._active = np.zeros((nx + 1, ny + 1), dtype=bool)
        self._active[:, 1:ny] = True
        self._wx_edge = np.ones((nx, ny + 1))
        self._wy_edge = np.ones((nx + 1, ny))
        self._wy_edge[0, :] = self._wy_edge[-1, :] = 0.5
        self._mass = np.ones((nx + 1, ny + 1))
        self._mass[0, :] = self._mass[-1, :] = 0.5
        self.last_energy_slack = 0.0
        self.last_grad_phi1 = 0.0
        self.last_supercurrent_l2 = 0.0

    def initial_stream(self, state: TdglState) -> np.ndarray:
        """Stream function of the initial deviation A - h s_A A_n."""
        grid = self.grid
        dev = state.A - (self.p.h * self.coef.s_A) * self.ns.A_n
        b = curl(grid, dev)
        r1 = self._lu_center.solve(
            center_dirichlet_rhs(grid, -(-b))).reshape(grid.center_shape)
        # -Lap r1 = curl(dev); rebuild A so the representation is exact
        return r1

    def step(self, state: TdglState) -> TdglState:
        grid, p, coef = self.grid, self.p, self.coef
        dt, sigma, kappa = self.dt, p.sigma, p.kappa
        psi, t = state.psi, state.t
        if state.r1 is None:
            state.r1 = self.initial_stream(state)
        r1 = state.r1

        sign = -1.0 if self.mutation == "supercurrent_sign" else 1.0
        S = supercurrent(grid, psi, state.A, coef.s_link, sign=sign)
        self.last_supercurrent_l2 = l2_edges(grid, S)

        # electric potential deviation: sigma lap(phi1) = q div(S), zero flux
        rhs = -(coef.q_super / sigma) * (
            weak_div(grid, S) * self._neu_mass.reshape(grid.node_shape))
        phi1 = _solve_bordered(self._lu_neu, self._n_nodes,
                               rhs.ravel()).reshape(grid.node_shape)
        phi1 -= node_mean(grid, phi1)
        self.last_grad_phi1 = l2_edges(grid, grad(grid, phi1))

        # field deviation via its stream function (implicit curl-curl,
        # Leray projection built in; forcing = transverse part of q S)
        rho = self._lu_center.solve(
            (coef.q_super * curl(grid, S)).ravel()).reshape(grid.center_shape)
        r1_new = self._lu_helm.solve(
            ((sigma / dt) * r1 + rho).ravel()).reshape(grid.center_shape)
        A_new = (p.h * coef.s_A) * self.ns.A_n + perp_grad(grid, r1_new)

        # order parameter: exact phase rotation + explicit reaction,
        # then implicit link Laplacian with the updated potential
        phi_full = (p.h * coef.s_A) * self.ns.phi_n + phi1
        psi_half = np.exp(-1j * dt * coef.p_phi * phi_full) * psi \
            * (1.0 + dt * coef.reaction * (1.0 - np.abs(psi) ** 2))
        psi_new = self._implicit_psi(psi_half, A_new)

        sup = float(np.max(np.abs(psi_new)))
        if not np.isfinite(sup) or sup > 1.0 + MAX_PRINCIPLE_ABORT:
            raise BlowUpError(f"max principle violated: sup|psi| = {sup:.6f} "
                              f"at t = {t + dt:.4f}")
        self._record_energy_slack(psi, psi_new, A_new)

        return TdglState(psi=psi_new, A=A_new, phi=phi_full, t=t + dt,
                         gauge=COULOMB, scaling=self.scaling, r1=r1_new)

    def _implicit_psi(self, psi_half: np.ndarray, A: VectorField) -> np.ndarray:
        grid, coef, dt = self.grid, self.coef, self.dt
        phase_sign = -1.0 if self.mutation == "link_phase_sign" else 1.0
        tx, ty = link_phases(grid, A, phase_sign * coef.s_link)
        K, m, (ai, aj) = _link_form(grid.nx, grid.ny, grid.hx, grid.hy,
                                    self._active, tx, ty,
                                    self._wx_edge, self._wy_edge, self._mass)
        Amat = (K + sp.diags(m / dt)).tocsc()
        rhs = (m / dt) * psi_half[ai, aj]
        sol = spla.splu(Amat).solve(rhs)
        out = np.zeros(grid.node_shape, dtype=complex)
        out[ai, aj] = sol
        return out

    def _record_energy_slack(self, psi_old, psi_new, A_new):
        grid, coef = self.grid, self.coef
        v_old = l2_nodes(grid, psi_old) ** 2
        v_new = l2_nodes(grid, psi_new) ** 2
        gsq = covariant_gradient_sq(grid, psi_new, A_new, coef.s_link)
        slack = 0.5 * (v_new - v_old) / self.dt + gsq - coef.reaction * v_new
        self.last_energy_slack = float(slack)


# ---------------------------------------------------------------------------
# phi = -c div A gauge stepper
# ---------------------------------------------------------------------------

class PhiDivStepper:
    """Integrator in the gauge phi + c div A = 0 (coherence scaling only)."""

    def __init__(self, ns: NormalState, grid: Grid2D, dom: Domain,
                 p: PhysicalParams, dt: float, mutation: str | None = None):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if dt > DT_REACTION_CAP:
            raise ValueError("dt exceeds the explicit-reaction cap")
        self.ns, self.grid, self.dom, self.p = ns, grid, dom, p
        self.dt = dt
        self.mutation = mutation
        c = p.c
        A_C = center_dirichlet_matrix(grid)
        self._lu_center = spla.splu(A_C.tocsc())
        self._lu_xi = spla.splu(((1.0 / dt) * sp.identity(A_C.shape[0]) +
                                 c * A_C).tocsc())
        K, mass = neumann_matrices(grid)
        self._K, self._mass = K, mass
        self._lu_eta = spla.splu((sp.diags(mass / dt) + c * K).tocsc())
        self._lu_neu, _ = _bordered_neumann_factor(grid)
        self._n_nodes = mass.size

        # plain Dirichlet-Neumann Laplacian for the implicit psi solve
        nx, ny = grid.nx, grid.ny
        active = np.zeros((nx + 1, ny + 1), dtype=bool)
        active[:, 1:ny] = True
        wx_edge = np.ones((nx, ny + 1))
        wy_edge = np.ones((nx + 1, ny))
        wy_edge[0, :] = wy_edge[-1, :] = 0.5
        node_mass = np.ones((nx + 1, ny + 1))
        node_mass[0, :] = node_mass[-1, :] = 0.5
        K0, m0, act = _link_form(nx, ny, grid.hx, grid.hy, active,
                                 np.zeros((nx, ny + 1)), np.zeros((nx + 1, ny)),
                                 wx_edge, wy_edge, node_mass)
        self._psi_act = act
        self._psi_m = m0
        self._lu_psi = spla.splu((K0.real + sp.diags(m0 / dt)).tocsc())

        # stationary normal field of this gauge, per unit h
        self.A_nd, self.div_A_nd = self._build_normal_field()
        self.last_energy_slack = 0.0
        self.last_grad_phi1 = 0.0
        self.last_supercurrent_l2 = 0.0

    def _hodge(self, U: VectorField) -> tuple[np.ndarray, np.ndarray]:
        """Exact split U = perp(xi) + grad(eta) on the staggered complex."""
        grid = self.grid
        xi = self._lu_center.solve(curl(grid, U).ravel()).reshape(grid.center_shape)
        rhs = -(weak_div(grid, U) * self._mass.reshape(grid.node_shape)).ravel()
        eta = _solve_bordered(self._lu_neu, self._n_nodes, rhs).reshape(grid.node_shape)
        eta -= node_mean(grid, eta)
        return xi, eta

    def _build_normal_field(self) -> tuple[VectorField, np.ndarray]:
        """Fixed point of the field flow with boundary curl data B (unit h):
        the discrete analogue of the gauge's normal vector potential."""
        grid = self.grid
        faces = self.ns.bdata.face_sides(grid)
        E_B = perp_grad(grid, np.zeros(grid.center_shape), faces=faces)
        xi_b, eta_b = self._hodge(E_B)
        xi_star = self._lu_center.solve(-xi_b.ravel()).reshape(grid.center_shape)
        rhs = -(self._mass * eta_b.ravel())
        eta_star = _solve_bordered(self._lu_neu, self._n_nodes, rhs
                                   ).reshape(grid.node_shape)
        eta_star -= node_mean(grid, eta_star)
        A_nd = perp_grad(grid, xi_star) + grad(grid, eta_star)
        return A_nd, weak_div(grid, A_nd)

    def initial_potentials(self, state: TdglState) -> tuple[np.ndarray, np.ndarray]:
        dev = state.A - self.p.h * self.A_nd
        return self._hodge(dev)

    def step(self, state: TdglState) -> TdglState:
        grid, p, dt = self.grid, self.p, self.dt
        c, sigma, h = p.c, p.sigma, p.h
        psi, t = state.psi, state.t
        if state.xi is None:
            state.xi, state.eta = self.initial_potentials(state)
        xi, eta = state.xi, state.eta

        sign = -1.0 if self.mutation == "supercurrent_sign" else 1.0
        S = supercurrent(grid, psi, state.A, 1.0, sign=sign)
        self.last_supercurrent_l2 = l2_edges(grid, S)
        F2 = (1.0 / sigma) * S

        rho_xi, rho_eta = self._hodge(F2)
        xi_new = self._lu_xi.solve((xi / dt + rho_xi).ravel()
                                   ).reshape(grid.center_shape)
        eta_rhs = self._mass * (eta / dt + rho_eta).ravel()
        eta_new = self._lu_eta.solve(eta_rhs).reshape(grid.node_shape)
        A_new = h * self.A_nd + perp_grad(grid, xi_new) + grad(grid, eta_new)

        div_A = weak_div(grid, A_new)
        phi_new = -c * div_A

        # explicit forcing of the order-parameter heat flow
        phase_sign = -1.0 if self.mutation == "link_phase_sign" else 1.0
        ax, ay = edges_to_nodes(grid, A_new)
        gx, gy = edges_to_nodes(grid, grad(grid, psi))
        a_dot_grad = phase_sign * (ax * gx + ay * gy)
        a_sq = ax ** 2 + ay ** 2
        F1 = (1j * (c - 1.0) * div_A * psi - 2j * a_dot_grad - a_sq * psi
              + (1.0 - np.abs(psi) ** 2) * psi)
        psi_half = psi + dt * F1
        psi_half[:, 0] = 0.0
        psi_half[:, -1] = 0.0

        ai, aj = self._psi_act
        rhs = (self._psi_m / dt) * psi_half[ai, aj]
        sol = self._lu_psi.solve(rhs.real) + 1j * self._lu_psi.solve(rhs.imag)
        psi_new = np.zeros(grid.node_shape, dtype=complex)
        psi_new[ai, aj] = sol

        sup = float(np.max(np.abs(psi_new)))
        if not np.isfinite(sup) or sup > 1.0 + MAX_PRINCIPLE_ABORT:
            raise BlowUpError(f"max principle violated: sup|psi| = {sup:.6f} "
                              f"at t = {t + dt:.4f}")

        v_old = l2_nodes(grid, psi) ** 2
        v_new = l2_nodes(grid, psi_new) ** 2
        gsq = covariant_gradient_sq(grid, psi_new, A_new, 1.0)
        self.last_energy_slack = float(0.5 * (v_new - v_old) / dt + gsq - v_new)
        phi1 = phi_new - h * self.ns.phi_n
        self.last_grad_phi1 = l2_edges(grid, grad(grid, phi1))

        return TdglState(psi=psi_new, A=A_new, phi=phi_new, t=t + dt,
                         gauge=PHI_DIV, scaling=COHERENCE,
                         xi=xi_new, eta=eta_new)


# ---------------------------------------------------------------------------
# observables, run loop, runtime invariants
# ---------------------------------------------------------------------------

@dataclass
class TimeSeries:
    t: np.ndarray
    psi_l2: np.ndarray
    psi_sup: np.ndarray
    a1_l2: np.ndarray
    phi1_l2: np.ndarray
    grad_psi_l2: np.ndarray
    energy_slack: np.ndarray
    grad_phi1_l2: np.ndarray
    supercurrent_l2: np.ndarray
    dt: float
    gauge: str
    scaling: str
    psi_abs_snapshots: list | None = None
    curl_snapshots: list | None = None
    fitted_rate: float | None = None
    fit_reliable: bool | None = None

    def row_dicts(self):
        for k in range(len(self.t)):
            yield {
                "t": self.t[k], "psi_l2": self.psi_l2[k],
                "psi_sup": self.psi_sup[k], "a1_l2": self.a1_l2[k],
                "phi1_l2": self.phi1_l2[k], "grad_psi_l2": self.grad_psi_l2[k],
                "energy_slack": self.energy_slack[k],
                "grad_phi1_l2": self.grad_phi1_l2[k],
                "supercurrent_l2": self.supercurrent_l2[k],
            }


def make_stepper(ns, grid, dom, p, dt, gauge, scaling=COHERENCE, mutation=None):
    if gauge == COULOMB:
        return CoulombStepper(ns, grid, dom, p, dt, scaling=scaling,
                              mutation=mutation)
    if gauge == PHI_DIV:
        if scaling != COHERENCE:
            raise ValueError("the phi_div stepper supports coherence scaling only")
        return PhiDivStepper(ns, grid, dom, p, dt, mutation=mutation)
    raise ValueError(f"unknown gauge {gauge!r}")


def run(ns: NormalState, grid: Grid2D, dom: Domain, p: PhysicalParams,
        state: TdglState, dt: float, t_final: float, record_every: int = 10,
        mutation: str | None = None, snapshots: bool = False) -> TimeSeries:
    """Integrate to t_final, recording observables every `record_every` steps,
    then fit the decay exponent of the order-parameter norm."""
    stepper = make_stepper(ns, grid, dom, p, dt, state.gauge, state.scaling,
                           mutation)
    coef = stepper.coef if isinstance(stepper, CoulombStepper) \
        else scaling_coefficients(COHERENCE, p.kappa)
    n_steps = int(round(t_final / dt))
    rec = {k: [] for k in ("t", "psi_l2", "psi_sup", "a1_l2", "phi1_l2",
                           "grad_psi_l2", "energy_slack", "grad_phi1_l2",
                           "supercurrent_l2")}
    snaps_psi = [] if snapshots else None
    snaps_curl = [] if snapshots else None

    def record(st: TdglState, slack: float, gphi1: float, s_l2: float):
        rec["t"].append(st.t)
        rec["psi_l2"].append(l2_nodes(grid, st.psi))
        rec["psi_sup"].append(float(np.max(np.abs(st.psi))))
        a1 = st.A - (p.h * coef.s_A) * ns.A_n
        rec["a1_l2"].append(l2_edges(grid, a1))
        phi1 = st.phi - (p.h * coef.s_A) * ns.phi_n
        rec["phi1_l2"].append(l2_nodes(grid, phi1 - node_mean(grid, phi1)))
        rec["grad_psi_l2"].append(
            math.sqrt(covariant_gradient_sq(grid, st.psi, st.A, coef.s_link)))
        rec["energy_slack"].append(slack)
        rec["grad_phi1_l2"].append(gphi1)
        rec["supercurrent_l2"].append(s_l2)
        if snapshots:
            snaps_psi.append(np.abs(st.psi))
            snaps_curl.append(curl(grid, st.A))

    record(state, 0.0, 0.0, 0.0)
    max_slack = 0.0
    for k in range(1, n_steps + 1):
        state = stepper.step(state)
        max_slack = max(max_slack, stepper.last_energy_slack)
        if k % record_every == 0 or k == n_steps:
            record(state, max_slack, stepper.last_grad_phi1,
                   stepper.last_supercurrent_l2)
            max_slack = 0.0

    series = TimeSeries(
        t=np.array(rec["t"]), psi_l2=np.array(rec["psi_l2"]),
        psi_sup=np.array(rec["psi_sup"]), a1_l2=np.array(rec["a1_l2"]),
        phi1_l2=np.array(rec["phi1_l2"]),
        grad_psi_l2=np.array(rec["grad_psi_l2"]),
        energy_slack=np.array(rec["energy_slack"]),
        grad_phi1_l2=np.array(rec["grad_phi1_l2"]),
        supercurrent_l2=np.array(rec["supercurrent_l2"]),
        dt=dt, gauge=state.gauge, scaling=state.scaling,
        psi_abs_snapshots=snaps_psi, curl_snapshots=snaps_curl)
    series.fitted_rate, series.fit_reliable = fit_decay_exponent(series)
    return series


FIT_FLOOR = 1e-12
FIT_DECADES = 3.0


def fit_decay_exponent(series: TimeSeries) -> tuple[float, bool]:
    """Least-squares exponent of the order-parameter norm over the final
    half of the run.  Reliable only when the fit window stays at least
    three decades above the arithmetic floor."""
    t, v = series.t, series.psi_l2
    mask = t >= 0.5 * (t[0] + t[-1])
    if np.count_nonzero(mask) < 3 or np.any(v[mask] <= 0):
        return float("nan"), False
    logs = np.log(v[mask])
    slope = np.polyfit(t[mask], logs, 1)[0]
    reliable = bool(np.min(v[mask]) >= FIT_FLOOR * 10 ** FIT_DECADES)
    return float(-slope), reliable


@dataclass
class InvariantReport:
    max_psi_sup: float
    max_energy_slack_rel: float
    field_bound_ok: bool
    field_bound_margin: float
    phi1_bound_ok: bool
    phi1_bound_margin: float
    monotone_after: float | None
    monotone_ok: bool | None

    @property
    def all_ok(self) -> bool:
        checks = [self.max_psi_sup <= 1.0 + 1e-10,
                  self.max_energy_slack_rel <= 1.0,
                  self.field_bound_ok, self.phi1_bound_ok]
        if self.monotone_ok is not None:
            checks.append(self.monotone_ok)
        return all(checks)


def runtime_invariant_checks(series: TimeSeries, p: PhysicalParams, lam: float,
                             area: float, monotone_after: float | None = None,
                             slack_coef: float = 10.0) -> InvariantReport:
    """Per-step verification of the recorded bounds.

    (i) discrete energy inequality with O(dt) slack; (ii) the closed-form
    field-deviation bound with the Dirichlet relaxation rate; (iii) the
    electric-deviation gradient bounded by the supercurrent norm.
    """
    kappa, sigma, c = p.kappa, p.sigma, p.c
    reaction = series_reaction(series, p)
    slack_tol = slack_coef * series.dt * max(1.0, reaction) ** 2
    rel = series.energy_slack / np.maximum(series.psi_l2 ** 2, 1e-30)
    max_slack_rel = float(np.max(rel[1:] / slack_tol)) if len(rel) > 1 else 0.0

    a0 = series.a1_l2[0]
    lc = lam * c
    const = 2 * c / (lam * kappa ** 4) \
        + (2 * c / (lam * kappa ** 4) + 4 / (lam ** 2 * kappa ** 4)) * area
    bound = a0 ** 2 * np.exp(-lc * series.t) + const
    field_margin = float(np.min(bound - series.a1_l2 ** 2))
    field_ok = bool(field_margin >= -1e-12)

    q = scaling_coefficients(series.scaling, kappa).q_super
    phi_slack = series.grad_phi1_l2 - (q / sigma) * series.supercurrent_l2
    phi_margin = float(np.max(phi_slack[1:])) if len(phi_slack) > 1 else 0.0
    phi_ok = bool(phi_margin <= 1e-8 * max(1.0, float(np.max(series.supercurrent_l2))))

    mono_ok = None
    if monotone_after is not None:
        tail = series.psi_l2[series.t >= monotone_after]
        mono_ok = bool(np.all(np.diff(tail) <= 1e-12)) if len(tail) > 1 else None

    return InvariantReport(
        max_psi_sup=float(np.max(series.psi_sup)),
        max_energy_slack_rel=max_slack_rel,
        field_bound_ok=field_ok, field_bound_margin=field_margin,
        phi1_bound_ok=phi_ok, phi1_bound_margin=phi_margin,
        monotone_after=monotone_after, monotone_ok=mono_ok)


def series_reaction(series: TimeSeries, p: PhysicalParams) -> float:
    return scaling_coefficients(series.scaling, p.kappa).reaction
