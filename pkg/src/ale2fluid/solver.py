"""One time step of the two-fluid flow on a moving mesh.

The momentum/continuity system is assembled on the moved mesh with test
functions transported node-by-node (same coefficients, new geometry).  The
left-hand side carries the mass, convection, mesh-divergence, viscous and
pressure terms plus two strongly consistent stabilizations: the classical
half-divergence (Temam) correction and its two-fluid interface analogue.
Wall friction (the Navier part of the GNBC) contributes to the matrix; the
capillary line force, the contact-point Young terms, gravity and the old
mass are loads.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import assembly, linalg
from . import reference as ref
from .assembly import CellBatch, EdgeBatch
from .mesh import apply_motion, interface_normals_at_quadrature, motion_from_scalar
from .motion import (
    MeshVelocity,
    contact_wall_tangent,
    discrete_normals,
    extrapolated_trace,
    kinematic_trace,
    solve_mesh_velocity,
    velocity_at_interface_nodes,
)
from .spaces import build_spaces


class FixedPointError(RuntimeError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"mesh-velocity fixed point did not converge: {iterations} iterations, "
            f"last displacement change {residual:.3e}")


@dataclass(frozen=True)
class State:
    velocity: np.ndarray      # (2N,) interleaved
    pressure: np.ndarray      # (3C,)
    mesh: object
    time: float = 0.0


@dataclass
class StepResult:
    state: State
    mesh_velocity: MeshVelocity
    old_mesh: object
    fixed_point_iterations: int = 0
    solver_stats: dict = field(default_factory=dict)


@dataclass
class MomentumSystem:
    A: sp.csr_matrix          # velocity block (2N x 2N)
    B: sp.csr_matrix          # continuity block (3C x 2N)
    E: np.ndarray             # pressure integrals (3C,)
    load: np.ndarray          # velocity load (2N,)
    vspace: object
    pspace: object


def wall_velocity_field(mesh, params, tag):
    """Prescribed wall velocity vector for one wall tag."""
    val = params.wall_velocity(tag)
    axis = 0 if tag in ("bottom", "top") else 1
    v = np.zeros(2)
    v[axis] = val
    return v


def surface_tension_load(mesh, params, n_gauss=5, normals=None):
    """Capillary load: line-tension term plus the contact-point terms.

    The line term integrates -gamma t . d_s v over the interface.  At each
    contact point the load gains gamma cos(theta_s) t_wall where t_wall is
    the wall tangent oriented out of fluid 1 (so the whole load vanishes on
    admissible test fields exactly when the contact angle equals theta_s).
    """
    n_dofs = 2 * mesh.n_nodes
    out = np.zeros(n_dofs)
    if params.gamma == 0.0:
        return out
    for ch in mesh.interface_chains:
        eb = EdgeBatch(mesh, ch.edges, n_gauss)
        out += assembly.tension_line_load(eb, params.gamma)
    if len(mesh.contact_nodes):
        if normals is None:
            normals = discrete_normals(mesh, n_gauss)
        coef = params.gamma * math.cos(params.theta_s)
        for node in mesh.contact_nodes:
            t = contact_wall_tangent(mesh, normals, int(node))
            out += assembly.point_load(n_dofs, int(node), coef * t)
    return out


def _interface_stab_matrix(mesh, u_n, w, axis, delta_rho, n_gauss):
    """(delta_rho / 2) * integral over the interface of (u - w).n u.v."""
    n_dofs = 2 * mesh.n_nodes
    if delta_rho == 0.0:
        return sp.csr_matrix((n_dofs, n_dofs))
    total = sp.csr_matrix((n_dofs, n_dofs))
    for ch in mesh.interface_chains:
        eb = EdgeBatch(mesh, ch.edges, n_gauss)
        _, _, dx, _, sign = interface_normals_at_quadrature(mesh, ch, n_gauss)
        perp = np.stack([dx[..., 1], -dx[..., 0]], axis=-1) * sign[:, None, None]
        rel = eb.field_values(u_n, n_comp=2)
        rel[..., axis] -= eb.field_values(w)
        weight = 0.5 * delta_rho * np.einsum("eqi,eqi->eq", rel, perp)
        total = total + assembly.edge_vector_mass(eb, weight)
    return total


def _friction_terms(mesh, params, n_gauss):
    """Navier-slip wall matrix and load, with the per-fluid slip coefficient."""
    n_dofs = 2 * mesh.n_nodes
    mat = sp.csr_matrix((n_dofs, n_dofs))
    load = np.zeros(n_dofs)
    for tag, edges in mesh.wall_edges.items():
        if edges.size == 0:
            continue
        regions = mesh.cell_region[mesh.wall_edge_cells[tag]]
        beta = np.where(regions == 1, params.beta1, params.beta2)
        if not np.any(beta):
            continue
        eb = EdgeBatch(mesh, edges, n_gauss)
        weight = beta[:, None] * eb.ds
        mat = mat + assembly.edge_vector_mass(eb, weight)
        ub = wall_velocity_field(mesh, params, tag)
        if np.any(ub):
            f = (beta[:, None] * eb.ds)[..., None] * ub[None, None, :]
            load += assembly.edge_vector_load(eb, f)
    return mat, load


def gravity_load(mesh, params, n_gauss):
    """Body-force load on one mesh: rho g pointing down."""
    cb = CellBatch(mesh, n_gauss)
    rho = cb.per_region(params.rho1, params.rho2)
    f = np.zeros(cb.x.shape)
    f[..., 1] = -params.g * rho[:, None]
    return assembly.vel_load(cb, f)


def assemble_momentum_system(state_n, mesh_np1, w, params, scheme):
    """Discrete momentum/continuity system for one step.

    state_n lives on the old mesh; mesh_np1 is its image under the motion
    y + dt w e_axis; w is the scalar mesh-velocity coefficient vector.  Old
    fields enter integrals over the new mesh through nodal transport.
    """
    mesh_n = state_n.mesh
    if mesh_n.n_nodes != mesh_np1.n_nodes:
        raise ValueError("state mesh and moved mesh do not match")
    dt = scheme.dt
    axis = scheme.motion_axis
    nq, nqe = scheme.quad_volume, scheme.quad_edge
    u_n = state_n.velocity

    cb1 = CellBatch(mesh_np1, nq)
    cb0 = CellBatch(mesh_n, nq)
    vspace, pspace = build_spaces(mesh_np1)

    rho1c = cb1.per_region(params.rho1, params.rho2)
    eta1c = cb1.per_region(params.eta1, params.eta2)

    # advecting field u^n - w^n e_axis and the transported divergences
    adv = cb1.field_values(u_n, n_comp=2)
    w_q = cb1.field_values(w)
    adv[..., axis] -= w_q
    div_w = cb1.field_gradients(w)[..., axis]
    div_un = cb1.field_divergence(u_n)

    A = assembly.vel_mass(cb1, rho1c / dt)
    A = A + assembly.vel_convection(cb1, adv, rho1c)
    A = A + assembly.vel_mass(cb1, -rho1c[:, None] * div_w)
    A = A + assembly.vel_mass(cb1, 0.5 * rho1c[:, None] * div_un)
    A = A + assembly.vel_viscous(cb1, eta1c)
    A = A + _interface_stab_matrix(mesh_np1, u_n, w, axis, params.delta_rho, nqe)
    fric_mat, fric_load = _friction_terms(mesh_np1, params, nqe)
    A = A + fric_mat

    B = assembly.div_matrix(cb1, pspace)
    E = assembly.pressure_integrals(cb1, pspace)

    rho0c = cb0.per_region(params.rho1, params.rho2)
    load = assembly.vel_mass(cb0, rho0c / dt) @ u_n
    load += fric_load
    load += surface_tension_load(mesh_np1, params, nqe)
    if params.g != 0.0:
        if scheme.gravity_domain == "next":
            load += gravity_load(mesh_np1, params, nq)
        elif scheme.gravity_domain == "prev":
            load += gravity_load(mesh_n, params, nq)
        else:
            load += 0.5 * gravity_load(mesh_np1, params, nq)
            load += 0.5 * gravity_load(mesh_n, params, nq)
    return MomentumSystem(A=A, B=B, E=E, load=load, vspace=vspace, pspace=pspace)


def solve_momentum_system(system, scheme, u0=None, p0=None):
    """Reduce constraints, solve the saddle system, expand back.

    Returns (velocity, pressure, stats).  The zero-mean pressure constraint
    is a Lagrange multiplier row/column; its multiplier is part of stats.
    """
    red = system.vspace.reduction
    n_p = system.B.shape[0]
    Ecol = sp.csr_matrix(system.E.reshape(-1, 1))
    T = red.T
    A_rr = (T.T @ system.A @ T).tocsr()
    B_r = (system.B @ T).tocsr()
    K = sp.bmat([
        [A_rr, -B_r.T, None],
        [B_r, None, Ecol],
        [None, Ecol.T, None],
    ], format="csr")
    rhs = np.concatenate([T.T @ system.load, np.zeros(n_p + 1)])
    if scheme.solver == "gmres":
        x0 = np.concatenate([
            red.restrict(u0) if u0 is not None else np.zeros(red.n_free),
            p0 if p0 is not None else np.zeros(n_p),
            [0.0],
        ])
        x, iters = linalg.solve_gmres_ilu(K, rhs, x0=x0, tol=scheme.gmres_tol,
                                          max_iter=scheme.gmres_max_iter,
                                          restart=scheme.gmres_restart)
        stats = {"linear_iterations": iters}
    else:
        x = linalg.solve_direct(K, rhs)
        stats = {"linear_iterations": 0}
    n_uf = red.n_free
    velocity = red.expand(x[:n_uf])
    pressure = x[n_uf:n_uf + n_p]
    stats["multiplier"] = float(x[-1])
    return velocity, pressure, stats


def _solve_on_moved_mesh(state_n, mv, params, scheme):
    motion = motion_from_scalar(mv.w, mv.axis, scheme.dt)
    mesh_np1 = apply_motion(state_n.mesh, motion)
    system = assemble_momentum_system(state_n, mesh_np1, mv.w, params, scheme)
    u, p, stats = solve_momentum_system(system, scheme, u0=state_n.velocity,
                                        p0=state_n.pressure)
    return mesh_np1, u, p, stats


def step(state_n, params, scheme, prev_state=None):
    """Advance one time step with the configured mesh-motion scheme.

    M1 drives the motion with the current velocity, M3 with the two-level
    extrapolation (falling back to M1 on the first step), M2 iterates a
    relaxed fixed point until the motion is consistent with the end-of-step
    velocity.
    """
    mesh_n = state_n.mesh
    axis = scheme.motion_axis
    nqe = scheme.quad_edge
    normals_n = discrete_normals(mesh_n, nqe)
    u_if = velocity_at_interface_nodes(mesh_n, state_n.velocity, normals_n)
    stats = {}

    if scheme.motion_scheme in ("M1", "M3"):
        if scheme.motion_scheme == "M1":
            trace = kinematic_trace(normals_n, u_if, axis, scheme.n_min)
        else:
            if prev_state is None:
                trace = kinematic_trace(normals_n, u_if, axis, scheme.n_min)
                stats["m3_fallback"] = True
            else:
                u_prev = velocity_at_interface_nodes(mesh_n, prev_state.velocity,
                                                     normals_n)
                trace = extrapolated_trace(normals_n, u_if, u_prev, axis,
                                           scheme.n_min)
        mv = solve_mesh_velocity(mesh_n, normals_n.nodes, trace, axis,
                                 n_gauss=scheme.quad_volume)
        mesh_np1, u, p, sstats = _solve_on_moved_mesh(state_n, mv, params, scheme)
        stats.update(sstats)
        new_state = State(velocity=u, pressure=p, mesh=mesh_np1,
                          time=state_n.time + scheme.dt)
        return StepResult(state=new_state, mesh_velocity=mv, old_mesh=mesh_n,
                          fixed_point_iterations=0, solver_stats=stats)

    # M2: relaxed fixed point on the interface displacement.  The first
    # iterate extrapolates from the previous step when available; this only
    # changes the starting point, not the fixed point.
    omega = scheme.m2_relaxation
    u_cur = state_n.velocity.copy()
    if prev_state is not None:
        u_cur = 2.0 * state_n.velocity - prev_state.velocity
    p_cur = state_n.pressure.copy()
    mesh_cur = mesh_n
    result = None
    for it in range(1, scheme.m2_max_iter + 1):
        normals_cur = discrete_normals(mesh_cur, nqe)
        u_cur_if = velocity_at_interface_nodes(mesh_cur, u_cur, normals_cur)
        trace = kinematic_trace(normals_cur, u_cur_if, axis, scheme.n_min)
        mv = solve_mesh_velocity(mesh_cur, normals_cur.nodes, trace, axis,
                                 n_gauss=scheme.quad_volume)
        mesh_np1, u_new, p_new, sstats = _solve_on_moved_mesh(state_n, mv, params,
                                                              scheme)
        normals_new = discrete_normals(mesh_np1, nqe)
        u_new_if = velocity_at_interface_nodes(mesh_np1, u_new, normals_new)
        trace_new = kinematic_trace(normals_new, u_new_if, axis, scheme.n_min)
        residual = scheme.dt * float(np.max(np.abs(trace_new - trace)))
        if residual <= scheme.m2_tol:
            stats.update(sstats)
            stats["fixed_point_residual"] = residual
            new_state = State(velocity=u_new, pressure=p_new, mesh=mesh_np1,
                              time=state_n.time + scheme.dt)
            return StepResult(state=new_state, mesh_velocity=mv, old_mesh=mesh_n,
                              fixed_point_iterations=it, solver_stats=stats)
        u_cur = omega * u_new + (1.0 - omega) * u_cur
        p_cur = omega * p_new + (1.0 - omega) * p_cur
        mesh_cur = mesh_np1
        result = residual
    raise FixedPointError(scheme.m2_max_iter, result)


@dataclass(frozen=True)
class ContactState:
    node: int
    wall: str
    position: np.ndarray
    theta: float              # dynamic contact angle, measured in fluid 1
    slip: float               # tangential velocity relative to the wall


def measure_contact_state(state, params, n_gauss=5):
    """Contact-point positions, dynamic angles and slip velocities."""
    mesh = state.mesh
    if not len(mesh.contact_nodes):
        raise ValueError("mesh has no contact nodes")
    normals = discrete_normals(mesh, n_gauss)
    out = []
    for ch in mesh.interface_chains:
        ends = ((int(ch.edges[0, 0]), ch.edges[0], -1.0),
                (int(ch.edges[-1, 2]), ch.edges[-1], 1.0))
        for node, edge, xi_end in ends:
            tag = mesh.wall_tag_of_node(node)
            if tag is None:
                continue
            dM = ref.edge_derivatives(np.array([xi_end]))[0]
            dx = dM @ mesh.nodes[edge]
            m = xi_end * dx
            m = m / np.linalg.norm(m)
            t_wall = contact_wall_tangent(mesh, normals, node)
            theta = math.acos(float(np.clip(m @ t_wall, -1.0, 1.0)))
            axis = 0 if tag in ("bottom", "top") else 1
            ub = params.wall_velocity(tag)
            slip = float(state.velocity[2 * node + axis] - ub)
            out.append(ContactState(node=node, wall=tag,
                                    position=mesh.nodes[node].copy(),
                                    theta=theta, slip=slip))
    return out
