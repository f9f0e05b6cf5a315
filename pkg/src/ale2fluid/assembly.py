"""Vectorized assembly of volume, interface-line, wall and point terms.

All kernels return scipy CSR matrices / dense vectors indexed by the full
(unconstrained) dof layout: velocity dofs interleaved (2*node + component),
pressure dofs 3*cell + local index.  Constraint elimination happens at the
system level through the spaces' reductions, so assembly stays additive:
summing separately assembled pieces equals assembling them jointly.
"""

import numpy as np
import scipy.sparse as sp

from . import reference as ref
from .mesh import cell_coords
from .spaces import pressure_basis_at


class CellBatch:
    """Geometry of every cell at one tensor-Gauss rule, precomputed."""

    def __init__(self, mesh, n_gauss):
        self.mesh = mesh
        self.n_gauss = n_gauss
        self.pts, self.w = ref.gauss_tensor(n_gauss)
        self.N = ref.q2_values(self.pts)             # (nq, 9)
        self.dN = ref.q2_gradients(self.pts)         # (nq, 9, 2)
        cn = cell_coords(mesh)
        self.J, self.detJ, invJ = ref.jacobians(cn, self.dN)
        self.G = ref.physical_gradients(invJ, self.dN)   # (C, nq, 9, 2)
        self.x = np.einsum("qa,cai->cqi", self.N, cn)    # (C, nq, 2)
        self.wdet = self.detJ * self.w[None, :]          # (C, nq)

    def per_region(self, v1, v2):
        """Per-cell coefficient from two per-fluid values."""
        return np.where(self.mesh.cell_region == 1, float(v1), float(v2))

    def field_values(self, coeffs, n_comp=1):
        """Q2 field at the volume quadrature points; (C, nq[, n_comp])."""
        cells = self.mesh.cells
        if n_comp == 1:
            return np.einsum("qa,ca->cq", self.N, coeffs[cells])
        local = np.stack([coeffs[2 * cells + k] for k in range(n_comp)], axis=-1)
        return np.einsum("qa,cak->cqk", self.N, local)

    def field_gradients(self, coeffs, n_comp=1):
        """Eulerian gradients at quadrature points; (C, nq, 2) or (C, nq, n_comp, 2)."""
        cells = self.mesh.cells
        if n_comp == 1:
            return np.einsum("cqai,ca->cqi", self.G, coeffs[cells])
        local = np.stack([coeffs[2 * cells + k] for k in range(n_comp)], axis=-1)
        return np.einsum("cqai,cak->cqki", self.G, local)

    def field_divergence(self, coeffs):
        """Divergence of an interleaved vector field at quadrature points."""
        g = self.field_gradients(coeffs, n_comp=2)
        return g[..., 0, 0] + g[..., 1, 1]


def _scatter(rows, cols, vals, shape):
    a = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    return a.tocsr()


def _vel_dofs(mesh):
    cells = mesh.cells
    vd = np.empty((cells.shape[0], 18), dtype=int)
    vd[:, 0::2] = 2 * cells
    vd[:, 1::2] = 2 * cells + 1
    return vd


def _scatter_vel_block(mesh, block, n_dofs):
    """block: (C, 9, 2, 9, 2) ordered (test node, test comp, trial node, trial comp)."""
    vd = _vel_dofs(mesh)
    C = block.shape[0]
    rows = np.broadcast_to(vd[:, :, None], (C, 18, 18))
    cols = np.broadcast_to(vd[:, None, :], (C, 18, 18))
    return _scatter(rows, cols, block.reshape(C, 18, 18), (n_dofs, n_dofs))


def _diag_block(scalar_block):
    """Embed a (C,9,9) scalar block on both velocity components."""
    C = scalar_block.shape[0]
    out = np.zeros((C, 9, 2, 9, 2))
    out[:, :, 0, :, 0] = scalar_block
    out[:, :, 1, :, 1] = scalar_block
    return out


def vel_mass(cb, coeff):
    """rho-weighted velocity mass matrix; coeff per (cell,) or (cell, nq)."""
    cq = cb.wdet * (coeff[:, None] if np.ndim(coeff) == 1 else coeff)
    m = np.einsum("cq,qa,qb->cab", cq, cb.N, cb.N)
    return _scatter_vel_block(cb.mesh, _diag_block(m), 2 * cb.mesh.n_nodes)


def vel_convection(cb, adv, coeff):
    """Advection form: integral of coeff (adv . grad u) . v."""
    cq = cb.wdet * (coeff[:, None] if np.ndim(coeff) == 1 else coeff)
    ag = np.einsum("cq,cqi,cqbi->cqb", cq, adv, cb.G)
    m = np.einsum("cqb,qa->cab", ag, cb.N)
    return _scatter_vel_block(cb.mesh, _diag_block(m), 2 * cb.mesh.n_nodes)


def vel_viscous(cb, eta_cells):
    """Symmetric-gradient viscous form (eta/2) (grad u + grad u^T) : (grad v + grad v^T)."""
    cq = cb.wdet * eta_cells[:, None]
    GG = np.einsum("cq,cqai,cqbi->cab", cq, cb.G, cb.G)
    GK = np.einsum("cq,cqak,cqbl->cabkl", cq, cb.G, cb.G)
    blk = np.zeros(GK.shape[:3] + (2, 2))
    # rows (a, l), cols (b, k): value eta [ delta_kl G_a.G_b + G_{a,k} G_{b,l} ]
    blk[..., 0, 0] = GG + GK[..., 0, 0]
    blk[..., 1, 1] = GG + GK[..., 1, 1]
    blk[..., 0, 1] = GK[..., 1, 0]
    blk[..., 1, 0] = GK[..., 0, 1]
    blk = np.moveaxis(blk, 3, 2)     # -> (C, a, l, b, k)
    return _scatter_vel_block(cb.mesh, blk, 2 * cb.mesh.n_nodes)


def div_matrix(cb, pspace):
    """B[(cell,m),(node,k)] = integral of q_m d/dx_k (N_node)."""
    PB = pressure_basis_at(pspace, np.arange(cb.mesh.n_cells), cb.x)
    bloc = np.einsum("cq,cqm,cqbk->cmbk", cb.wdet, PB, cb.G)
    C = cb.mesh.n_cells
    prow = (3 * np.arange(C)[:, None, None, None] + np.arange(3)[None, :, None, None])
    vd = _vel_dofs(cb.mesh).reshape(C, 9, 2)
    rows = np.broadcast_to(prow, bloc.shape)
    cols = np.broadcast_to(vd[:, None, :, :], bloc.shape)
    return _scatter(rows, cols, bloc, (3 * C, 2 * cb.mesh.n_nodes))


def pressure_integrals(cb, pspace):
    """Vector of integrals of each pressure basis function (zero-mean row)."""
    PB = pressure_basis_at(pspace, np.arange(cb.mesh.n_cells), cb.x)
    return np.einsum("cq,cqm->cm", cb.wdet, PB).ravel()


def vel_load(cb, f):
    """Load vector for integral of f . v; f per (cell, nq, 2)."""
    loc = np.einsum("cq,cql,qa->cal", cb.wdet, f, cb.N)
    out = np.zeros(2 * cb.mesh.n_nodes)
    vd = _vel_dofs(cb.mesh).reshape(-1, 9, 2)
    np.add.at(out, vd.ravel(), loc.ravel())
    return out


def scalar_laplace(cb):
    lap = np.einsum("cq,cqai,cqbi->cab", cb.wdet, cb.G, cb.G)
    cells = cb.mesh.cells
    C = cells.shape[0]
    rows = np.broadcast_to(cells[:, :, None], (C, 9, 9))
    cols = np.broadcast_to(cells[:, None, :], (C, 9, 9))
    return _scatter(rows, cols, lap, (cb.mesh.n_nodes, cb.mesh.n_nodes))


def scalar_mass(cb, coeff=None):
    cq = cb.wdet if coeff is None else cb.wdet * (
        coeff[:, None] if np.ndim(coeff) == 1 else coeff)
    m = np.einsum("cq,qa,qb->cab", cq, cb.N, cb.N)
    cells = cb.mesh.cells
    C = cells.shape[0]
    rows = np.broadcast_to(cells[:, :, None], (C, 9, 9))
    cols = np.broadcast_to(cells[:, None, :], (C, 9, 9))
    return _scatter(rows, cols, m, (cb.mesh.n_nodes, cb.mesh.n_nodes))


# ---------------------------------------------------------------------------
# curved-edge kernels


class EdgeBatch:
    """Geometry of a set of curved edges at a 1D Gauss rule."""

    def __init__(self, mesh, edges, n_gauss):
        self.mesh = mesh
        self.edges = np.asarray(edges, dtype=int).reshape(-1, 3)
        self.n_gauss = n_gauss
        self.xi, self.w = ref.gauss_1d(n_gauss)
        self.M = ref.edge_values(self.xi)            # (nq, 3)
        self.dM = ref.edge_derivatives(self.xi)
        pts = mesh.nodes[self.edges]                 # (E, 3, 2)
        self.x = np.einsum("qa,eai->eqi", self.M, pts)
        self.dx = np.einsum("qa,eai->eqi", self.dM, pts)
        self.ds = np.linalg.norm(self.dx, axis=-1)   # measure |dx/dxi|

    def field_values(self, coeffs, n_comp=1):
        if n_comp == 1:
            return np.einsum("qa,ea->eq", self.M, coeffs[self.edges])
        local = np.stack([coeffs[2 * self.edges + k] for k in range(n_comp)], axis=-1)
        return np.einsum("qa,eak->eqk", self.M, local)

    def field_param_derivative(self, coeffs, n_comp=1):
        """d(field)/dxi along the edge (not arclength)."""
        if n_comp == 1:
            return np.einsum("qa,ea->eq", self.dM, coeffs[self.edges])
        local = np.stack([coeffs[2 * self.edges + k] for k in range(n_comp)], axis=-1)
        return np.einsum("qa,eak->eqk", self.dM, local)

    def integrate(self, samples):
        """Gauss sum of samples (E, nq) against the bare 1D weights."""
        return float(np.einsum("q,eq->", self.w, samples))


def edge_vector_mass(eb, weight):
    """Componentwise mass on edges: sum_q w_q weight[e,q] M_a M_b.

    The weight carries everything else (coefficients and the arclength
    measure, or their polynomial product when the measure cancels).
    """
    m = np.einsum("q,eq,qa,qb->eab", eb.w, weight, eb.M, eb.M)
    E = m.shape[0]
    blk = np.zeros((E, 3, 2, 3, 2))
    blk[:, :, 0, :, 0] = m
    blk[:, :, 1, :, 1] = m
    vd = np.empty((E, 6), dtype=int)
    vd[:, 0::2] = 2 * eb.edges
    vd[:, 1::2] = 2 * eb.edges + 1
    rows = np.broadcast_to(vd[:, :, None], (E, 6, 6))
    cols = np.broadcast_to(vd[:, None, :], (E, 6, 6))
    n = 2 * eb.mesh.n_nodes
    return _scatter(rows, cols, blk.reshape(E, 6, 6), (n, n))


def edge_vector_load(eb, f):
    """Load for integral of f . v over edges; f per (E, nq, 2), measure included."""
    loc = np.einsum("q,eql,qa->eal", eb.w, f, eb.M)
    out = np.zeros(2 * eb.mesh.n_nodes)
    vd = np.stack([2 * eb.edges, 2 * eb.edges + 1], axis=-1)
    np.add.at(out, vd.ravel(), loc.ravel())
    return out


def tension_line_load(eb, gamma):
    """Surface-tension load: -gamma * integral over the line of t . d_s v.

    Using t = dx/|dx| and ds = |dx| dxi, the integrand reduces to the
    polynomial dx . dv/dxi / |dx|.
    """
    loc = -gamma * np.einsum("q,eqk,qa,eq->eak", eb.w, eb.dx, eb.dM, 1.0 / eb.ds)
    out = np.zeros(2 * eb.mesh.n_nodes)
    vd = np.stack([2 * eb.edges, 2 * eb.edges + 1], axis=-1)
    np.add.at(out, vd.ravel(), loc.ravel())
    return out


def point_load(n_dofs, node, vector):
    out = np.zeros(n_dofs)
    out[2 * node] = vector[0]
    out[2 * node + 1] = vector[1]
    return out
