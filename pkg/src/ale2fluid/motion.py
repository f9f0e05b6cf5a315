"""Interface normals and the one-directional mesh velocity.

Nodal interface normals are the basis-weighted averages of the elementwise
geometric normals, N_i = integral over the interface of phi_i n.  With this
choice the nodal kinematic condition transfers volume fluxes exactly: the
weighted sum of nodal traces reproduces the integral of u . n, which is what
keeps each fluid's area constant under the discrete motion.

The mesh velocity itself is the harmonic extension of the interface trace:
a scalar Laplace problem per subdomain with Dirichlet data on the interface,
zero Dirichlet data on walls the motion would otherwise penetrate, natural
(zero Neumann) conditions on walls parallel to the motion, and periodic
identification when the mesh is periodic.
"""

from dataclasses import dataclass

import numpy as np

from . import assembly, linalg
from . import reference as ref
from .mesh import WALL_NORMALS, interface_normals_at_quadrature
from .spaces import build_scalar_space


class DegenerateInterfaceError(RuntimeError):
    pass


class SteepInterfaceError(RuntimeError):
    """Interface too steep for the configured motion direction."""

    def __init__(self, node, component, n_min):
        self.node = int(node)
        super().__init__(
            f"interface too steep for motion direction at node {node}: "
            f"|n_dir| = {abs(component):.3e} < {n_min:g}")


@dataclass(frozen=True)
class NodalNormals:
    nodes: np.ndarray        # (K,) interface node ids, chain order
    unit: np.ndarray         # (K, 2) unit normals, outward of fluid 1
    weighted: np.ndarray     # (K, 2) unnormalized weighted normals

    def index_of(self, node):
        return int(np.nonzero(self.nodes == node)[0][0])


@dataclass(frozen=True)
class MeshVelocity:
    w: np.ndarray            # (N,) scalar Q2 coefficients of the moving component
    axis: int
    trace_nodes: np.ndarray  # interface node ids carrying Dirichlet data
    trace_values: np.ndarray


def discrete_normals(mesh, n_gauss=5):
    """Weighted nodal normals on the interface, one entry per distinct node."""
    if not mesh.interface_chains:
        raise ValueError("mesh has no interface chain")
    acc = {}
    order = []
    for ch in mesh.interface_chains:
        w, x, dx, nrm, sign = interface_normals_at_quadrature(mesh, ch, n_gauss)
        # phi_i n dsigma = phi_i * sign * perp(dx) dxi: the measure cancels.
        perp = np.stack([dx[..., 1], -dx[..., 0]], axis=-1) * sign[:, None, None]
        M = ref.edge_values(ref.gauss_1d(n_gauss)[0])
        contrib = np.einsum("q,qa,eqi->eai", w, M, perp)
        for e, edge in enumerate(ch.edges):
            for a, node in enumerate(edge):
                node = int(node)
                if node not in acc:
                    acc[node] = np.zeros(2)
                    order.append(node)
                acc[node] += contrib[e, a]
    nodes = np.array(order, dtype=int)
    weighted = np.array([acc[n] for n in order])
    norms = np.linalg.norm(weighted, axis=1)
    if np.any(norms <= 1e-300):
        bad = nodes[int(np.argmin(norms))]
        raise DegenerateInterfaceError(f"zero weighted normal at interface node {bad}")
    unit = weighted / norms[:, None]
    return NodalNormals(nodes=nodes, unit=unit, weighted=weighted)


def kinematic_trace(normals, u_at_nodes, motion_axis, n_min=0.1):
    """Per-node trace (u . n) / n_dir with a steepness guard on n_dir."""
    u = np.asarray(u_at_nodes, dtype=float)
    ncomp = normals.unit[:, motion_axis]
    small = np.abs(ncomp) < n_min
    if np.any(small):
        k = int(np.argmax(small))
        raise SteepInterfaceError(normals.nodes[k], ncomp[k], n_min)
    return np.einsum("ki,ki->k", u, normals.unit) / ncomp


def extrapolated_trace(normals, u_now, u_prev, motion_axis, n_min=0.1):
    """Trace built from the linear extrapolation 2 u_now - u_prev.

    Node correspondence between time levels is the identity because nodes
    are transported; u_prev holds the previous coefficients at the same
    interface nodes.
    """
    return kinematic_trace(normals, 2.0 * np.asarray(u_now) - np.asarray(u_prev),
                           motion_axis, n_min)


def velocity_at_interface_nodes(mesh, velocity, normals):
    """(K, 2) velocity samples at the interface nodes (nodal coefficients)."""
    return np.stack([velocity[2 * normals.nodes], velocity[2 * normals.nodes + 1]],
                    axis=-1)


def orthogonal_wall_nodes(mesh, motion_axis):
    """Nodes of walls the motion direction would penetrate; pinned to w = 0."""
    tags = ("left", "right") if motion_axis == 0 else ("bottom", "top")
    out = set()
    for tag in tags:
        edges = mesh.wall_edges.get(tag)
        if edges is not None and edges.size:
            out.update(int(n) for n in np.unique(edges))
    return out


def solve_mesh_velocity(mesh, trace_nodes, trace_values, motion_axis,
                        n_gauss=5, solver="direct", solver_opts=None):
    """Harmonic extension of the interface trace into both subdomains."""
    trace_nodes = np.asarray(trace_nodes, dtype=int)
    trace_values = np.asarray(trace_values, dtype=float)
    pinned = orthogonal_wall_nodes(mesh, motion_axis)
    overlap = pinned.intersection(int(n) for n in trace_nodes)
    if overlap:
        raise ValueError(f"interface trace collides with a pinned wall at nodes {sorted(overlap)}")
    fixed_nodes = list(trace_nodes) + sorted(pinned)
    space = build_scalar_space(mesh, fixed_nodes=fixed_nodes)
    cb = assembly.CellBatch(mesh, n_gauss)
    A = assembly.scalar_laplace(cb)
    b = np.zeros(mesh.n_nodes)
    values = {int(n): float(v) for n, v in zip(trace_nodes, trace_values)}
    values.update({n: 0.0 for n in pinned})
    A_red, b_red, lift = space.reduction.reduce_system(A, b, values)
    if solver == "gmres":
        opts = solver_opts or {}
        x_red, _ = linalg.solve_gmres_ilu(A_red, b_red, **opts)
    else:
        x_red = linalg.solve_direct(A_red, b_red)
    w = space.reduction.expand(x_red, lift)
    return MeshVelocity(w=w, axis=motion_axis, trace_nodes=trace_nodes,
                        trace_values=trace_values)


def contact_wall_tangent(mesh, normals, node):
    """Unit wall tangent at a contact node, oriented out of fluid 1.

    This is the tangential projection of the interface normal onto the wall
    plane; with it the dot product with the interface's outward end tangent
    equals the cosine of the contact angle measured in fluid 1.
    """
    tag = mesh.wall_tag_of_node(node)
    if tag is None:
        raise ValueError(f"contact node {node} does not lie on a wall")
    nw = WALL_NORMALS[tag]
    n_sigma = normals.unit[normals.index_of(node)]
    t = n_sigma - (n_sigma @ nw) * nw
    nt = np.linalg.norm(t)
    if nt < 1e-12:
        raise ValueError(f"interface is tangent to the wall at contact node {node}")
    return t / nt
