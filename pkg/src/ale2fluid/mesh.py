"""Two-region quadrilateral meshes with a tracked fluid-fluid interface.

Meshes are logically rectangular grids of 9-node biquadratic cells.  The
interface between the two fluids is a mesh line: an ordered chain of curved
element edges whose nodes sit exactly on a user-supplied curve.  Mesh motion
is restricted to a single coordinate direction; nodes are displaced and the
topology (cells, region tags, chains, walls) is carried over unchanged.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import reference as ref

WALL_NORMALS = {
    "bottom": np.array([0.0, -1.0]),
    "top": np.array([0.0, 1.0]),
    "left": np.array([-1.0, 0.0]),
    "right": np.array([1.0, 0.0]),
}


class MeshConstructionError(ValueError):
    pass


class MeshTangledError(RuntimeError):
    """Raised when a motion produces a nonpositive cell Jacobian."""

    def __init__(self, cell, worst):
        self.cell = int(cell)
        self.worst = float(worst)
        super().__init__(f"mesh tangled: cell {cell} has Jacobian {worst:.3e}")


@dataclass(frozen=True)
class InterfaceChain:
    """Ordered chain of curved edges on the interface.

    edges: (E, 3) node ids (start, mid, end) walking the chain.
    cells: (E, 2) adjacent cell ids, fluid-1 cell first.
    """

    edges: np.ndarray
    cells: np.ndarray


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray                 # (N, 2)
    cells: np.ndarray                 # (C, 9)
    cell_region: np.ndarray           # (C,) values 1 or 2
    interface_chains: tuple           # tuple[InterfaceChain, ...]
    wall_edges: dict                  # tag -> (E, 3) node ids
    wall_edge_cells: dict             # tag -> (E,) adjacent cell ids
    contact_nodes: np.ndarray         # (K,) node ids
    periodic_pairs: np.ndarray        # (P, 2) (slave, master) node ids
    motion_axis: int                  # 0 horizontal, 1 vertical
    rect: tuple                       # (x0, x1, y0, y1) of the initial box
    grid_shape: tuple = field(default=())   # (2nx+1, 2ny+1) logical layout

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    @property
    def interface_edges(self):
        """All interface edges concatenated, chain by chain; (E_total, 3)."""
        if not self.interface_chains:
            return np.zeros((0, 3), dtype=int)
        return np.concatenate([c.edges for c in self.interface_chains], axis=0)

    @property
    def interface_nodes(self):
        """Node ids on the interface, in chain order without duplicates."""
        out = []
        for ch in self.interface_chains:
            ids = [ch.edges[0, 0]]
            for e in ch.edges:
                ids.extend([e[1], e[2]])
            out.extend(ids)
        return np.array(out, dtype=int)

    def region_cells(self, region):
        return np.nonzero(self.cell_region == region)[0]

    def wall_tag_of_node(self, node):
        for tag, edges in self.wall_edges.items():
            if edges.size and np.any(edges == node):
                return tag
        return None


@dataclass(frozen=True)
class MotionMap:
    """Nodal displacement field with a single nonvanishing component."""

    displacement: np.ndarray          # (N, 2)
    dt: float

    def __post_init__(self):
        d = self.displacement
        if d.ndim != 2 or d.shape[1] != 2:
            raise ValueError("displacement must have shape (N, 2)")
        nz = [np.any(d[:, k] != 0.0) for k in (0, 1)]
        if all(nz):
            raise ValueError("displacement must act along a single axis")


def motion_from_scalar(values, axis, dt):
    """Build a MotionMap displacing by dt * values along the given axis."""
    disp = np.zeros((len(values), 2))
    disp[:, axis] = dt * np.asarray(values, dtype=float)
    return MotionMap(displacement=disp, dt=dt)


# ---------------------------------------------------------------------------
# construction


def _node_id(i, j, n1):
    return i * n1 + j


def build_structured_mesh(rect, nx, ny, interface_curves, motion_axis,
                          periodic=False):
    """Structured two-region mesh whose interfaces are mesh lines.

    rect: (x0, x1, y0, y1) bounding box.
    interface_curves: list of callables.  For vertical motion each curve is a
        height function y = f(x); for horizontal motion an abscissa function
        x = f(y).  Curves must be strictly inside the box, ordered along the
        motion axis, and cross every station of the transverse axis once.
    periodic identifies the two gridlines orthogonal to the motion axis
    (left/right for horizontal motion); only supported there.
    """
    x0, x1, y0, y1 = map(float, rect)
    if nx < 2 or ny < 2:
        raise MeshConstructionError("need nx, ny >= 2")
    if motion_axis not in (0, 1):
        raise MeshConstructionError("motion_axis must be 0 or 1")
    if periodic and motion_axis != 0:
        raise MeshConstructionError("periodic meshes are supported for horizontal motion only")
    curves = list(interface_curves)

    # Work in (transverse, motion) logical coordinates: vertical motion means
    # transverse = x with nx stations; horizontal means transverse = y.
    if motion_axis == 1:
        nt, nm = nx, ny
        t0, t1, m0, m1 = x0, x1, y0, y1
    else:
        nt, nm = ny, nx
        t0, t1, m0, m1 = y0, y1, x0, x1

    tt = np.linspace(t0, t1, 2 * nt + 1)
    cvals = []
    for f in curves:
        v = np.asarray([float(f(t)) for t in tt])
        if np.any(v <= m0) or np.any(v >= m1):
            raise MeshConstructionError("interface curve leaves the domain box")
        cvals.append(v)
    means = [v.mean() for v in cvals]
    if any(means[k] >= means[k + 1] for k in range(len(means) - 1)):
        raise MeshConstructionError("interface curves must be ordered along the motion axis")
    rows = [int(round(nm * (m - m0) / (m1 - m0))) for m in means]
    rows = [min(max(r, 1), nm - 1) for r in rows]
    if len(set(rows)) != len(rows):
        raise MeshConstructionError("interface curves collapse onto the same mesh row")

    # Motion-axis coordinate of every logical gridline: blend linearly
    # between the fixed walls and the curve values.
    anchors_rows = [0] + [2 * r for r in rows] + [2 * nm]
    anchors_vals = [np.full_like(tt, m0)] + cvals + [np.full_like(tt, m1)]
    mcoord = np.empty((2 * nt + 1, 2 * nm + 1))
    for a in range(len(anchors_rows) - 1):
        ja, jb = anchors_rows[a], anchors_rows[a + 1]
        va, vb = anchors_vals[a], anchors_vals[a + 1]
        for j in range(ja, jb + 1):
            s = (j - ja) / (jb - ja)
            mcoord[:, j] = va + s * (vb - va)

    n1 = 2 * nm + 1
    n_nodes = (2 * nt + 1) * n1
    nodes = np.empty((n_nodes, 2))
    for i in range(2 * nt + 1):
        for j in range(n1):
            nid = _node_id(i, j, n1)
            if motion_axis == 1:
                nodes[nid] = (tt[i], mcoord[i, j])
            else:
                nodes[nid] = (mcoord[i, j], tt[i])

    # Cells: ct transverse index, cm motion-axis index; id = cm * nt + ct.
    cells = np.empty((nt * nm, 9), dtype=int)
    for cm in range(nm):
        for ct in range(nt):
            i, j = 2 * ct, 2 * cm
            loc = [
                (i, j), (i + 2, j), (i + 2, j + 2), (i, j + 2),
                (i + 1, j), (i + 2, j + 1), (i + 1, j + 2), (i, j + 1),
                (i + 1, j + 1),
            ]
            cells[cm * nt + ct] = [_node_id(a, b, n1) for a, b in loc]
    if motion_axis == 0:
        # Local node order above walks (transverse, motion) = (y, x); swap to
        # keep cells counterclockwise in physical (x, y).
        cells = cells[:, [0, 3, 2, 1, 7, 6, 5, 4, 8]]

    region = np.empty(nt * nm, dtype=int)
    band_edges = [0] + rows + [nm]
    for b in range(len(band_edges) - 1):
        reg = 1 + (b % 2)
        for cm in range(band_edges[b], band_edges[b + 1]):
            region[cm * nt: (cm + 1) * nt] = reg

    chains = []
    for k, r in enumerate(rows):
        J = 2 * r
        edges = np.empty((nt, 3), dtype=int)
        adj = np.empty((nt, 2), dtype=int)
        for ct in range(nt):
            edges[ct] = [_node_id(2 * ct, J, n1), _node_id(2 * ct + 1, J, n1),
                         _node_id(2 * ct + 2, J, n1)]
            below = (r - 1) * nt + ct
            above = r * nt + ct
            if region[below] == 1:
                adj[ct] = (below, above)
            else:
                adj[ct] = (above, below)
        chains.append(InterfaceChain(edges=edges, cells=adj))

    # Wall edges.  Tags follow physical sides.
    wall_edges, wall_cells = {}, {}

    def motion_line_edges(j_log, cm):
        e = np.empty((nt, 3), dtype=int)
        c = np.empty(nt, dtype=int)
        for ct in range(nt):
            e[ct] = [_node_id(2 * ct, j_log, n1), _node_id(2 * ct + 1, j_log, n1),
                     _node_id(2 * ct + 2, j_log, n1)]
            c[ct] = cm * nt + ct
        return e, c

    def transverse_line_edges(i_log, ct):
        e = np.empty((nm, 3), dtype=int)
        c = np.empty(nm, dtype=int)
        for cm in range(nm):
            e[cm] = [_node_id(i_log, 2 * cm, n1), _node_id(i_log, 2 * cm + 1, n1),
                     _node_id(i_log, 2 * cm + 2, n1)]
            c[cm] = cm * nt + ct
        return e, c

    if motion_axis == 1:
        wall_edges["bottom"], wall_cells["bottom"] = motion_line_edges(0, 0)
        wall_edges["top"], wall_cells["top"] = motion_line_edges(2 * nm, nm - 1)
        wall_edges["left"], wall_cells["left"] = transverse_line_edges(0, 0)
        wall_edges["right"], wall_cells["right"] = transverse_line_edges(2 * nt, nt - 1)
    else:
        wall_edges["bottom"], wall_cells["bottom"] = transverse_line_edges(0, 0)
        wall_edges["top"], wall_cells["top"] = transverse_line_edges(2 * nt, nt - 1)
        if not periodic:
            wall_edges["left"], wall_cells["left"] = motion_line_edges(0, 0)
            wall_edges["right"], wall_cells["right"] = motion_line_edges(2 * nm, nm - 1)

    if periodic:
        # The seam is the pair of gridlines at motion coordinate m0 and m1.
        pairs = np.array([[_node_id(i, 2 * nm, n1), _node_id(i, 0, n1)]
                          for i in range(2 * nt + 1)], dtype=int)
    else:
        pairs = np.zeros((0, 2), dtype=int)

    # Chains span the full transverse extent, so their endpoints sit on walls.
    contacts = []
    for ch in chains:
        contacts.extend([ch.edges[0, 0], ch.edges[-1, 2]])
    contacts = np.array(sorted(set(contacts)), dtype=int)

    mesh = Mesh(
        nodes=nodes, cells=cells, cell_region=region,
        interface_chains=tuple(chains), wall_edges=wall_edges,
        wall_edge_cells=wall_cells, contact_nodes=contacts,
        periodic_pairs=pairs, motion_axis=motion_axis,
        rect=(x0, x1, y0, y1), grid_shape=(2 * nt + 1, n1),
    )
    bad, worst = _first_bad_cell(mesh)
    if bad >= 0:
        raise MeshConstructionError(
            f"degenerate cell {bad} in constructed mesh (Jacobian {worst:.3e})")
    return mesh


# ---------------------------------------------------------------------------
# geometry and integration


def cell_coords(mesh, cell_ids=None):
    """(ncell, 9, 2) physical coordinates of cell nodes."""
    c = mesh.cells if cell_ids is None else mesh.cells[cell_ids]
    return mesh.nodes[c]


def _first_bad_cell(mesh, n_gauss=3):
    pts, _ = ref.gauss_tensor(n_gauss)
    sample = np.vstack([pts, ref.LOCAL_NODES])
    dN = ref.q2_gradients(sample)
    _, detJ, _ = ref.jacobians(cell_coords(mesh), dN)
    worst_per_cell = detJ.min(axis=1)
    bad = int(np.argmin(worst_per_cell))
    if worst_per_cell[bad] <= 0.0:
        return bad, worst_per_cell[bad]
    return -1, worst_per_cell[bad]


def apply_motion(mesh, motion):
    """Displace the nodes; topology and tags are unchanged.

    Raises MeshTangledError if any cell Jacobian becomes nonpositive.
    """
    if motion.displacement.shape[0] != mesh.n_nodes:
        raise ValueError("motion does not cover all mesh nodes")
    moved = replace(mesh, nodes=mesh.nodes + motion.displacement)
    bad, worst = _first_bad_cell(moved)
    if bad >= 0:
        raise MeshTangledError(bad, worst)
    return moved


def edge_geometry(mesh, edges, n_gauss=5):
    """Quadrature geometry along curved edges.

    Returns (xi_w, x, dx) with x, dx of shape (nedge, nq, 2): points and
    parameter derivatives d x / d xi.  The arclength measure is |dx| dxi.
    """
    xi, w = ref.gauss_1d(n_gauss)
    M = ref.edge_values(xi)
    dM = ref.edge_derivatives(xi)
    pts = mesh.nodes[edges]                      # (nedge, 3, 2)
    x = np.einsum("qa,eai->eqi", M, pts)
    dx = np.einsum("qa,eai->eqi", dM, pts)
    return (xi, w), x, dx


def interface_normals_at_quadrature(mesh, chain, n_gauss=5):
    """Unit geometric normals (outward of fluid 1) at edge quadrature points.

    Returns (w, x, dx, nrm, sign) where nrm has unit length and
    sign * perp(dx) points out of fluid 1, perp(t) = (t_y, -t_x).
    """
    (xi, w), x, dx = edge_geometry(mesh, chain.edges, n_gauss)
    perp = np.stack([dx[..., 1], -dx[..., 0]], axis=-1)
    mid = x.mean(axis=1)
    c1 = mesh.nodes[mesh.cells[chain.cells[:, 0]][:, :4]].mean(axis=1)
    s = np.sign(np.einsum("ei,ei->e", perp.mean(axis=1), mid - c1))
    s[s == 0.0] = 1.0
    nrm = perp * s[:, None, None]
    nrm = nrm / np.linalg.norm(nrm, axis=-1, keepdims=True)
    return w, x, dx, nrm, s


def interface_measure(mesh, n_gauss=5):
    """Total arclength of the interface chains by per-edge Gauss quadrature."""
    if not mesh.interface_chains:
        raise ValueError("mesh has no interface chain")
    total = 0.0
    for ch in mesh.interface_chains:
        (xi, w), _, dx = edge_geometry(mesh, ch.edges, n_gauss)
        total += float(np.einsum("q,eq->", w, np.linalg.norm(dx, axis=-1)))
    return total


def region_integral(mesh, region, integrand, n_gauss=5):
    """Integral of a pointwise field over one fluid region.

    integrand may be a scalar constant, a callable taking an (..., 2) array
    of physical points, or a precomputed (ncell, nq) array of samples.
    """
    ids = mesh.region_cells(region)
    if ids.size == 0:
        return 0.0
    pts, w = ref.gauss_tensor(n_gauss)
    N = ref.q2_values(pts)
    dN = ref.q2_gradients(pts)
    cn = cell_coords(mesh, ids)
    _, detJ, _ = ref.jacobians(cn, dN)
    x = np.einsum("qa,cai->cqi", N, cn)
    if callable(integrand):
        vals = np.asarray(integrand(x), dtype=float)
    elif np.ndim(integrand) == 0:
        vals = np.full(detJ.shape, float(integrand))
    else:
        vals = np.asarray(integrand, dtype=float)
    return float(np.einsum("q,cq,cq->", w, detJ, vals))


def quadrature_points(mesh, region=None, n_gauss=5):
    """Physical quadrature points and weights (including |J|) per cell."""
    ids = np.arange(mesh.n_cells) if region is None else mesh.region_cells(region)
    pts, w = ref.gauss_tensor(n_gauss)
    N = ref.q2_values(pts)
    dN = ref.q2_gradients(pts)
    cn = cell_coords(mesh, ids)
    _, detJ, _ = ref.jacobians(cn, dN)
    x = np.einsum("qa,cai->cqi", N, cn)
    return x, detJ * w[None, :]


# ---------------------------------------------------------------------------
# snapshot format


SNAPSHOT_HEADER = "ale2fluid-mesh v1"


def write_snapshot(mesh, path):
    """Plain-text mesh snapshot, decimal with 17 significant digits."""
    lines = [SNAPSHOT_HEADER, str(mesh.n_nodes)]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes]
    lines.append(str(mesh.n_cells))
    for c, r in zip(mesh.cells, mesh.cell_region):
        lines.append(" ".join(str(int(i)) for i in c) + f" {int(r)}")
    edges = mesh.interface_edges
    lines.append(str(len(edges)))
    lines += [" ".join(str(int(i)) for i in e) for e in edges]
    lines.append(str(len(mesh.contact_nodes)))
    lines += [str(int(i)) for i in mesh.contact_nodes]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_snapshot(path):
    """Read a snapshot back as plain arrays (not a full Mesh)."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if lines[0] != SNAPSHOT_HEADER:
        raise ValueError(f"not a mesh snapshot: {lines[0]!r}")
    k = 1
    n_nodes = int(lines[k]); k += 1
    nodes = np.array([[float(v) for v in lines[k + i].split()] for i in range(n_nodes)])
    k += n_nodes
    n_cells = int(lines[k]); k += 1
    raw = np.array([[int(v) for v in lines[k + i].split()] for i in range(n_cells)])
    k += n_cells
    cells, region = raw[:, :9], raw[:, 9]
    n_edges = int(lines[k]); k += 1
    edges = np.array([[int(v) for v in lines[k + i].split()] for i in range(n_edges)],
                     dtype=int).reshape(n_edges, 3)
    k += n_edges
    n_contacts = int(lines[k]); k += 1
    contacts = np.array([int(lines[k + i]) for i in range(n_contacts)], dtype=int)
    return {"nodes": nodes, "cells": cells, "cell_region": region,
            "interface_edges": edges, "contact_nodes": contacts}
