"""Finite element spaces, dof constraints, and field evaluation.

Velocity lives in vector Q2 (two dofs per node, interleaved), pressure in
discontinuous per-cell linears spanned by {1, x - xc, y - yc} in physical
coordinates, and scalar Q2 carries the mesh velocity.  Constraints are
linear reductions: periodic pairs share dofs and wall nodes have their
normal Cartesian component eliminated (walls are axis-aligned).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import reference as ref
from .mesh import cell_coords

FREE, SLAVE, FIXED = 0, 1, 2


@dataclass
class Reduction:
    """Linear reduction u_full = T u_free + lift(values on fixed dofs)."""

    n_full: int
    kind: np.ndarray          # FREE / SLAVE / FIXED per dof
    master: np.ndarray        # owning dof for slaves, self otherwise
    free_index: np.ndarray    # column of each dof in the reduced system, -1 if fixed
    T: sp.csr_matrix

    @property
    def n_free(self):
        return self.T.shape[1]

    def lift(self, fixed_values):
        """Full-length vector holding the fixed values (0 on free dofs)."""
        v = np.zeros(self.n_full)
        for dof, val in (fixed_values or {}).items():
            v[self.master[dof]] = val
        return v[self.master]

    def reduce_system(self, A, b, fixed_values=None):
        lift = self.lift(fixed_values or {})
        A_red = (self.T.T @ A @ self.T).tocsr()
        b_red = self.T.T @ (b - A @ lift)
        return A_red, b_red, lift

    def expand(self, x_red, lift=None):
        x = self.T @ x_red
        if lift is not None:
            x = x + lift
        return x

    def restrict(self, x_full):
        """Free-dof values of a full vector (used for initial guesses)."""
        out = np.zeros(self.n_free)
        own = (self.master == np.arange(self.n_full)) & (self.free_index >= 0)
        out[self.free_index[own]] = x_full[own]
        return out


def make_reduction(n_full, pairs=(), fixed=()):
    """Build a Reduction from (slave, master) dof pairs and fixed dof ids."""
    master = np.arange(n_full)
    for s, m in pairs:
        master[s] = m
    master = master[master]          # collapse one level of chaining
    fixed_mask = np.zeros(n_full, dtype=bool)
    for d in fixed:
        fixed_mask[master[d]] = True
    is_fixed = fixed_mask[master]    # fixed iff the owning dof is fixed
    own = master == np.arange(n_full)
    kind = np.where(is_fixed, FIXED, np.where(own, FREE, SLAVE)).astype(np.int8)
    n_free = int((own & ~is_fixed).sum())
    cols_of_own = np.full(n_full, -1, dtype=int)
    cols_of_own[own & ~is_fixed] = np.arange(n_free)
    free_index = cols_of_own[master]
    rows = np.nonzero(~is_fixed)[0]
    T = sp.csr_matrix((np.ones(rows.size), (rows, free_index[rows])),
                      shape=(n_full, n_free))
    return Reduction(n_full=n_full, kind=kind, master=master,
                     free_index=free_index, T=T)


@dataclass
class FunctionSpace:
    kind: str                 # "velocity-Q2-vector" | "pressure-P1disc" | "scalar-Q2"
    mesh: object
    dof_count: int            # before constraints
    reduction: Reduction
    # pressure-only geometry (per cell): centers and scales of the local basis
    p_centers: np.ndarray = None
    p_scales: np.ndarray = None

    @property
    def constrained_dofs(self):
        return np.nonzero(self.reduction.kind != FREE)[0]


def velocity_dofs(node_ids, comp=None):
    """Global velocity dof ids (interleaved x/y) for the given nodes."""
    node_ids = np.asarray(node_ids, dtype=int)
    if comp is None:
        return np.stack([2 * node_ids, 2 * node_ids + 1], axis=-1)
    return 2 * node_ids + comp


def _wall_constraints(mesh):
    """(slave,master) pairs from periodicity and fixed normal components."""
    fixed = set()
    for tag, edges in mesh.wall_edges.items():
        if edges.size == 0:
            continue
        comp = 1 if tag in ("bottom", "top") else 0
        for node in np.unique(edges):
            fixed.add(2 * int(node) + comp)
    pairs = []
    for s, m in mesh.periodic_pairs:
        pairs.append((2 * int(s), 2 * int(m)))
        pairs.append((2 * int(s) + 1, 2 * int(m) + 1))
    return pairs, fixed


def pressure_cell_geometry(mesh):
    """Per-cell centroid and half-diameter used to scale the local basis."""
    corners = mesh.nodes[mesh.cells[:, :4]]
    centers = corners.mean(axis=1)
    scales = 0.5 * np.linalg.norm(corners.max(axis=1) - corners.min(axis=1), axis=1)
    return centers, scales


def build_spaces(mesh, periodic=None):
    """Velocity and pressure spaces on one mesh.

    periodic defaults to whatever the mesh carries; passing False ignores
    the mesh's periodic pairs (mostly useful in tests).
    """
    use_periodic = bool(len(mesh.periodic_pairs)) if periodic is None else periodic
    pairs, fixed = _wall_constraints(mesh)
    if not use_periodic:
        pairs = []
    vred = make_reduction(2 * mesh.n_nodes, pairs=pairs, fixed=sorted(fixed))
    vspace = FunctionSpace(kind="velocity-Q2-vector", mesh=mesh,
                           dof_count=2 * mesh.n_nodes, reduction=vred)
    centers, scales = pressure_cell_geometry(mesh)
    pred = make_reduction(3 * mesh.n_cells)
    pspace = FunctionSpace(kind="pressure-P1disc", mesh=mesh,
                           dof_count=3 * mesh.n_cells, reduction=pred,
                           p_centers=centers, p_scales=scales)
    return vspace, pspace


def build_scalar_space(mesh, fixed_nodes=(), periodic=None):
    """Scalar Q2 space with Dirichlet nodes (values supplied at solve time)."""
    use_periodic = bool(len(mesh.periodic_pairs)) if periodic is None else periodic
    pairs = [(int(s), int(m)) for s, m in mesh.periodic_pairs] if use_periodic else []
    red = make_reduction(mesh.n_nodes, pairs=pairs, fixed=sorted(int(n) for n in fixed_nodes))
    return FunctionSpace(kind="scalar-Q2", mesh=mesh, dof_count=mesh.n_nodes,
                         reduction=red)


def pressure_basis_at(pspace, cell_ids, x):
    """Local pressure basis {1, (x-xc)/s, (y-yc)/s} at points x (ncell,nq,2)."""
    c = pspace.p_centers[cell_ids][:, None, :]
    s = pspace.p_scales[cell_ids][:, None]
    one = np.ones(x.shape[:2])
    return np.stack([one, (x[..., 0] - c[..., 0]) / s, (x[..., 1] - c[..., 1]) / s],
                    axis=-1)          # (ncell, nq, 3)


def evaluate_field(mesh, coeffs, cell, local_points, n_comp=1):
    """Isoparametric value and Eulerian gradient of a Q2 field in one cell.

    coeffs is the global coefficient vector: (N,) for scalars or
    interleaved (2N,) for vector fields.  Returns (values, gradients) with
    shapes (npts, n_comp) and (npts, n_comp, 2).
    """
    pts = np.atleast_2d(np.asarray(local_points, dtype=float))
    N = ref.q2_values(pts)
    dN = ref.q2_gradients(pts)
    cn = cell_coords(mesh, [cell])
    _, _, invJ = ref.jacobians(cn, dN)
    G = ref.physical_gradients(invJ, dN)[0]      # (npts, 9, 2)
    nodes = mesh.cells[cell]
    if n_comp == 1:
        local = coeffs[nodes]
        vals = N @ local
        grads = np.einsum("qai,a->qi", G, local)
        return vals[:, None], grads[:, None, :]
    local = np.stack([coeffs[2 * nodes + k] for k in range(n_comp)], axis=-1)
    vals = np.einsum("qa,ak->qk", N, local)
    grads = np.einsum("qai,ak->qki", G, local)
    return vals, grads
