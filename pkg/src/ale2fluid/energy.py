"""Discrete energy bookkeeping and geometric-conservation checks.

Every diagnostic integral reuses the assembly quadrature so that the
identities the scheme satisfies in exact arithmetic close to rounding
error here.  The volume transport identity holds pointwise on the
reference cell when the motion has a single component, and the interface
transport defect has a sign pointwise along each edge; both facts are what
the checks in this module verify numerically.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import reference as ref
from .assembly import CellBatch, EdgeBatch
from .mesh import MeshTangledError, interface_measure, \
    interface_normals_at_quadrature
from .motion import contact_wall_tangent, discrete_normals
from .solver import wall_velocity_field


class SmallTimestepError(RuntimeError):
    """The interface stretched so fast that 1 + dt tr(grad_S w) < 0."""


@dataclass(frozen=True)
class EnergyReport:
    time: float
    K: float
    W: float
    P_v: float
    sigma_measure: float
    euler_dissipation: float
    balance: float            # explicit or implicit flavor, per scheme; may be nan
    eps_g: float
    eps_gamma: float
    friction_power: float
    contact_power: float


@dataclass(frozen=True)
class GclCheckResult:
    lhs: float
    rhs: float
    dt: float
    extra: dict = None

    @property
    def residual(self):
        return self.lhs - self.rhs

    @property
    def gap(self):
        return self.lhs - self.rhs


def _moved_mesh(mesh, displacement):
    from .mesh import _first_bad_cell
    m = replace(mesh, nodes=mesh.nodes + displacement)
    bad, worst = _first_bad_cell(m)
    if bad >= 0:
        raise MeshTangledError(bad, worst)
    return m


def _axis_displacement(mesh, w, axis, dt):
    d = np.zeros((mesh.n_nodes, 2))
    d[:, axis] = dt * np.asarray(w, dtype=float)
    return d


# ---------------------------------------------------------------------------
# pointwise energies


def kinetic_energy(mesh, velocity, params, n_gauss=5):
    cb = CellBatch(mesh, n_gauss)
    rho = cb.per_region(params.rho1, params.rho2)
    u = cb.field_values(velocity, n_comp=2)
    return 0.5 * float(np.einsum("cq,c,cqi,cqi->", cb.wdet, rho, u, u))


def potential_energy(mesh, params, n_gauss=5):
    cb = CellBatch(mesh, n_gauss)
    rho = cb.per_region(params.rho1, params.rho2)
    return float(params.g) * float(np.einsum("cq,c,cq->", cb.wdet, rho, cb.x[..., 1]))


def viscous_power(mesh, velocity, params, n_gauss=5):
    cb = CellBatch(mesh, n_gauss)
    eta = cb.per_region(params.eta1, params.eta2)
    g = cb.field_gradients(velocity, n_comp=2)      # (C, nq, comp, 2)
    sym = g + np.swapaxes(g, -1, -2)
    return 0.5 * float(np.einsum("cq,c,cqij,cqij->", cb.wdet, eta, sym, sym))


def euler_dissipation(mesh_old, u_new, u_old, params, dt, n_gauss=5):
    """Numerical dissipation of the implicit Euler update, on the old mesh."""
    cb = CellBatch(mesh_old, n_gauss)
    rho = cb.per_region(params.rho1, params.rho2)
    du = cb.field_values(u_new - u_old, n_comp=2)
    return float(np.einsum("cq,c,cqi,cqi->", cb.wdet, rho, du, du)) / (2.0 * dt)


def friction_power(mesh, velocity, params, n_gauss=5):
    """Wall dissipation beta (u - u_b, u) over all wall edges."""
    total = 0.0
    for tag, edges in mesh.wall_edges.items():
        if edges.size == 0:
            continue
        regions = mesh.cell_region[mesh.wall_edge_cells[tag]]
        beta = np.where(regions == 1, params.beta1, params.beta2)
        if not np.any(beta):
            continue
        eb = EdgeBatch(mesh, edges, n_gauss)
        u = eb.field_values(velocity, n_comp=2)
        rel = u - wall_velocity_field(mesh, params, tag)[None, None, :]
        total += float(np.einsum("q,e,eq,eqi,eqi->", eb.w, beta, eb.ds, rel, u))
    return total


def contact_power(mesh, velocity, params, normals=None, n_gauss=5):
    """gamma cos(theta_s) t_wall . u summed over the contact points."""
    if params.gamma == 0.0 or not len(mesh.contact_nodes):
        return 0.0
    if normals is None:
        normals = discrete_normals(mesh, n_gauss)
    coef = params.gamma * math.cos(params.theta_s)
    total = 0.0
    for node in mesh.contact_nodes:
        t = contact_wall_tangent(mesh, normals, int(node))
        u = velocity[2 * int(node): 2 * int(node) + 2]
        total += coef * float(t @ u)
    return total


# ---------------------------------------------------------------------------
# interface integrals entering the balances


def _chain_edge_data(mesh, chain, w, n_gauss):
    """Per-edge quadrature data for interface integrals of the motion field."""
    eb = EdgeBatch(mesh, chain.edges, n_gauss)
    _, _, dx, _, sign = interface_normals_at_quadrature(mesh, chain, n_gauss)
    perp = np.stack([dx[..., 1], -dx[..., 0]], axis=-1) * sign[:, None, None]
    w_q = eb.field_values(np.asarray(w, dtype=float))
    w_xi = eb.field_param_derivative(np.asarray(w, dtype=float))
    return eb, perp, w_q, w_xi


def interface_vertical_flux(mesh, w, params, n_gauss=5, weight="g_x2"):
    """integral over the interface of delta_rho g x2 w n_y (or plain w n_y)."""
    total = 0.0
    for ch in mesh.interface_chains:
        eb, perp, w_q, _ = _chain_edge_data(mesh, ch, w, n_gauss)
        wt = params.g * eb.x[..., 1] if weight == "g_x2" else np.ones_like(w_q)
        total += params.delta_rho * eb.integrate(wt * w_q * perp[..., 1])
    return total


def spurious_gravity_power(mesh, w, params, dt, n_gauss=5):
    """-(dt/2) delta_rho g integral of w^2 n_y: nonnegative when the heavy
    fluid sits below (delta_rho <= 0, n_y >= 0)."""
    total = 0.0
    for ch in mesh.interface_chains:
        eb, perp, w_q, _ = _chain_edge_data(mesh, ch, w, n_gauss)
        total += eb.integrate(w_q * w_q * perp[..., 1])
    return -0.5 * dt * params.delta_rho * params.g * total


def interface_stretch_rate(mesh, w, axis, n_gauss=5):
    """integral over the interface of tr(grad_S (w e_axis)) d sigma."""
    total = 0.0
    for ch in mesh.interface_chains:
        eb, _, _, w_xi = _chain_edge_data(mesh, ch, w, n_gauss)
        total += eb.integrate(eb.dx[..., axis] * w_xi / eb.ds)
    return total


def spurious_tension_power_explicit(mesh_np1, w_np1, axis, gamma, dt,
                                    sigma_np1, sigma_np2, n_gauss=5):
    tr = interface_stretch_rate(mesh_np1, w_np1, axis, n_gauss)
    return gamma / dt * (sigma_np2 - sigma_np1 - dt * tr)


def spurious_tension_power_implicit(mesh_np1, w_n, axis, gamma, dt,
                                    sigma_n, sigma_np1, n_gauss=5):
    # w_n transported to the moved mesh keeps its coefficients.
    tr = interface_stretch_rate(mesh_np1, w_n, axis, n_gauss)
    return -gamma / dt * (sigma_np1 - sigma_n - dt * tr)


# ---------------------------------------------------------------------------
# per-step report


def energy_report(state_n, state_np1, w, params, scheme, lookahead=None):
    """All energy terms for the transition state_n -> state_np1.

    w is the mesh velocity that realized the move.  For the explicit scheme
    the balance and the spurious powers reference the *next* transition;
    they are only computed when lookahead supplies {"mesh_np2": Mesh,
    "w_np1": coefficients} and are nan otherwise.
    """
    dt = scheme.dt
    nq, nqe = scheme.quad_volume, scheme.quad_edge
    explicit = scheme.motion_scheme == "M1"
    K0 = kinetic_energy(state_n.mesh, state_n.velocity, params, nq)
    K1 = kinetic_energy(state_np1.mesh, state_np1.velocity, params, nq)
    W0 = potential_energy(state_n.mesh, params, nq)
    W1 = potential_energy(state_np1.mesh, params, nq)
    Pv1 = viscous_power(state_np1.mesh, state_np1.velocity, params, nq)
    sig0 = interface_measure(state_n.mesh, nqe)
    sig1 = interface_measure(state_np1.mesh, nqe)
    euler = euler_dissipation(state_n.mesh, state_np1.velocity, state_n.velocity,
                              params, dt, nq)
    fric = friction_power(state_np1.mesh, state_np1.velocity, params, nqe)
    cpow = contact_power(state_np1.mesh, state_np1.velocity, params, n_gauss=nqe)

    if explicit:
        if lookahead is not None:
            W2 = potential_energy(lookahead["mesh_np2"], params, nq)
            sig2 = interface_measure(lookahead["mesh_np2"], nqe)
            balance = (K1 - K0) / dt + (W2 - W1) / dt + Pv1 + euler
            eps_g = spurious_gravity_power(state_np1.mesh, lookahead["w_np1"],
                                           params, dt, nqe)
            eps_gamma = spurious_tension_power_explicit(
                state_np1.mesh, lookahead["w_np1"], scheme.motion_axis,
                params.gamma, dt, sig1, sig2, nqe)
        else:
            balance = eps_g = eps_gamma = float("nan")
    else:
        balance = (K1 - K0) / dt + (W1 - W0) / dt + Pv1 + euler
        eps_g = spurious_gravity_power(state_n.mesh, w, params, dt, nqe)
        eps_gamma = spurious_tension_power_implicit(
            state_np1.mesh, w, scheme.motion_axis, params.gamma, dt, sig0,
            sig1, nqe)
    return EnergyReport(
        time=state_np1.time, K=K1, W=W1, P_v=Pv1, sigma_measure=sig1,
        euler_dissipation=euler, balance=balance, eps_g=eps_g,
        eps_gamma=eps_gamma, friction_power=fric, contact_power=cpow)


def gnbc_balance_series(levels, transitions, dt, gamma):
    """Energy balance with friction, tension and contact terms, per step.

    levels: dict of per-time-level arrays K, W, Pv, sigma (length N+1).
    transitions: dict of per-step arrays euler, friction, contact (length N),
    where friction and contact are evaluated at the end-of-step velocity.
    Entry n needs level n+2 data; trailing entries come out as nan.
    """
    K, W, Pv, sig = (np.asarray(levels[k], dtype=float)
                     for k in ("K", "W", "Pv", "sigma"))
    eul, fric, cont = (np.asarray(transitions[k], dtype=float)
                       for k in ("euler", "friction", "contact"))
    n = len(eul)
    out = np.full(n, np.nan)
    for i in range(n):
        if i + 2 >= len(K):
            break
        out[i] = ((K[i + 1] - K[i]) / dt + (W[i + 2] - W[i + 1]) / dt + Pv[i + 1]
                  + gamma * (sig[i + 2] - sig[i + 1]) / dt
                  + fric[i] + eul[i] - cont[i])
    return out


# ---------------------------------------------------------------------------
# geometric conservation checks


def _volume_integrals(mesh, cells_mask, values, n_gauss):
    cb = CellBatch(mesh, n_gauss)
    contrib = np.einsum("cq,cq->c", cb.wdet, values)
    return float(contrib[cells_mask].sum())


def _phi_at(phi, x):
    if callable(phi):
        return np.asarray(phi(x), dtype=float)
    return np.full(x.shape[:-1], float(phi))


class VolumeTransportCheck:
    """Precomputed geometry for volume-transport residuals of one motion.

    Holds both meshes' quadrature data so several test functions phi and
    regions can be checked against the same displacement cheaply.
    """

    def __init__(self, mesh, displacement, dt, n_gauss=5):
        displacement = np.asarray(displacement, dtype=float)
        self.mesh = mesh
        self.dt = dt
        self.moved = _moved_mesh(mesh, dt * displacement)
        self.cb0 = CellBatch(mesh, n_gauss)
        self.cb1 = CellBatch(self.moved, n_gauss)
        d0 = np.stack([self.cb0.field_values(displacement[:, 0]),
                       self.cb0.field_values(displacement[:, 1])], axis=-1)
        g0 = np.stack([self.cb0.field_gradients(displacement[:, 0]),
                       self.cb0.field_gradients(displacement[:, 1])], axis=-2)
        self.div0 = g0[..., 0, 0] + g0[..., 1, 1]
        g1 = np.stack([self.cb1.field_gradients(displacement[:, 0]),
                       self.cb1.field_gradients(displacement[:, 1])], axis=-2)
        self.div1 = g1[..., 0, 0] + g1[..., 1, 1]
        self.x_old_moved = self.cb0.x + dt * d0   # image of old quad points

    def residuals(self, phi, region):
        mask = self.mesh.cell_region == region
        phi_new = _phi_at(phi, self.cb1.x)
        phi_old = _phi_at(phi, self.x_old_moved)  # phi composed with the motion
        dt = self.dt

        def total(cb, values):
            return float(np.einsum("cq,cq->c", cb.wdet, values)[mask].sum())

        new_int = total(self.cb1, phi_new)
        old_int = total(self.cb0, phi_old)
        flux_old = dt * total(self.cb0, phi_old * self.div0)
        flux_new = dt * total(self.cb1, phi_new * self.div1)
        r1 = GclCheckResult(lhs=new_int - old_int, rhs=flux_old, dt=dt,
                            extra={"form": "old-mesh divergence"})
        r2 = GclCheckResult(lhs=new_int - old_int, rhs=flux_new, dt=dt,
                            extra={"form": "new-mesh divergence"})
        return r1, r2


def gcl_volume_check(mesh, displacement, dt, phi, region, n_gauss=5):
    """Residuals of the two discrete volume-transport identities.

    displacement: (N, 2) nodal field; the motion is y -> y + dt * d(y).
    With a single nonvanishing component both residuals vanish in exact
    arithmetic; with two components they are O(dt^2).
    Returns a pair of GclCheckResult (old-mesh form, new-mesh form).
    """
    return VolumeTransportCheck(mesh, displacement, dt, n_gauss).residuals(
        phi, region)


def axis_field_displacement(mesh, w, axis):
    d = np.zeros((mesh.n_nodes, 2))
    d[:, axis] = np.asarray(w, dtype=float)
    return d


def gcl_gravity_check(mesh, w, dt, params, n_gauss=6, n_edge_gauss=5):
    """Residuals of the two potential-energy transport identities.

    Both combine the interface flux of g x2, the potential-energy difference
    quotient and the quadratic-in-w correction, and hold exactly for a
    vertical single-component motion that vanishes on the horizontal walls.
    """
    w = np.asarray(w, dtype=float)
    moved = _moved_mesh(mesh, _axis_displacement(mesh, w, 1, dt))
    # difference the potential energy cell by cell before summing; the
    # global sums are ~1e3 and their direct difference would lose digits
    cb0, cb1 = CellBatch(mesh, n_gauss), CellBatch(moved, n_gauss)
    rho = cb0.per_region(params.rho1, params.rho2)
    per_cell0 = np.einsum("cq,cq->c", cb0.wdet, cb0.x[..., 1]) * rho
    per_cell1 = np.einsum("cq,cq->c", cb1.wdet, cb1.x[..., 1]) * rho
    dWdt = params.g * float((per_cell1 - per_cell0).sum()) / dt
    half_sq = 0.0
    flux_old = 0.0
    flux_new = 0.0
    for ch, ch1 in zip(mesh.interface_chains, moved.interface_chains):
        eb, perp, w_q, _ = _chain_edge_data(mesh, ch, w, n_edge_gauss)
        half_sq += 0.5 * dt * params.delta_rho * params.g * eb.integrate(
            w_q * w_q * perp[..., 1])
        flux_old += params.delta_rho * params.g * eb.integrate(
            eb.x[..., 1] * w_q * perp[..., 1])
        eb1, perp1, w_q1, _ = _chain_edge_data(moved, ch1, w, n_edge_gauss)
        flux_new += params.delta_rho * params.g * eb1.integrate(
            eb1.x[..., 1] * w_q1 * perp1[..., 1])
    r1 = GclCheckResult(lhs=flux_old, rhs=-dWdt - half_sq, dt=dt,
                        extra={"form": "old-interface flux"})
    r2 = GclCheckResult(lhs=flux_new, rhs=-dWdt + half_sq, dt=dt,
                        extra={"form": "new-interface flux"})
    return r1, r2


def gcl_surface_gap(mesh, w, dt, phi, axis=None, n_gauss=5):
    """Signed defects of the interface-transport inequality, both forms.

    gap1 uses the old-interface stretch rate and is nonnegative; gap2 uses
    the transported-field form on the moved interface and is nonpositive.
    Both are O(dt^2).  Raises SmallTimestepError when 1 + dt tr < 0
    somewhere on the old interface.
    """
    w = np.asarray(w, dtype=float)
    axis = mesh.motion_axis if axis is None else axis
    gap1 = gap2 = 0.0
    min_hyp = np.inf
    for ch in mesh.interface_chains:
        eb, _, w_q, w_xi = _chain_edge_data(mesh, ch, w, n_gauss)
        dx0 = eb.dx
        ds0 = eb.ds
        dx1 = dx0.copy()
        dx1[..., axis] += dt * w_xi
        ds1 = np.linalg.norm(dx1, axis=-1)
        x1 = eb.x.copy()
        x1[..., axis] += dt * w_q
        phi1 = _phi_at(phi, x1)
        tr0 = dx0[..., axis] * w_xi / ds0 ** 2
        tr1 = dx1[..., axis] * w_xi / ds1 ** 2
        min_hyp = min(min_hyp, float(np.min(1.0 + dt * tr0)))
        gap1 += eb.integrate(phi1 * (ds1 - ds0 - dt * tr0 * ds0))
        gap2 += eb.integrate(phi1 * (ds1 - ds0 - dt * tr1 * ds1))
    if min_hyp < 0.0:
        raise SmallTimestepError(
            f"1 + dt tr(grad_S w) reaches {min_hyp:.3e} on the interface")
    sig0 = interface_measure(mesh, n_gauss)
    r1 = GclCheckResult(lhs=gap1, rhs=0.0, dt=dt,
                        extra={"form": "forward", "min_hypothesis": min_hyp,
                               "sigma": sig0})
    r2 = GclCheckResult(lhs=gap2, rhs=0.0, dt=dt,
                        extra={"form": "backward", "min_hypothesis": min_hyp,
                               "sigma": sig0})
    return r1, r2
