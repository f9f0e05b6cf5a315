"""Reference-element machinery: Gauss rules and Q2 shape functions.

The reference cell is [-1,1]^2 with 9 nodes ordered as four corners, four
edge midnodes (bottom, right, top, left) and the center.  Curved element
edges carry the 1D quadratic restriction on [-1,1] with nodes (-1, 0, +1).
"""

from functools import lru_cache

import numpy as np

# Local node coordinates of the 9-node biquadratic cell.
LOCAL_NODES = np.array(
    [
        (-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0),
        (0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0),
        (0.0, 0.0),
    ]
)

# Cell-local edges as (start corner, midnode, end corner), counterclockwise.
CELL_EDGES = ((0, 4, 1), (1, 5, 2), (2, 6, 3), (3, 7, 0))


@lru_cache(maxsize=None)
def gauss_1d(n: int):
    """n-point Gauss-Legendre rule on [-1,1]; exact for degree 2n-1."""
    pts, wts = np.polynomial.legendre.leggauss(n)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


@lru_cache(maxsize=None)
def gauss_tensor(n: int):
    """Tensor Gauss rule with n*n points on the reference cell."""
    p, w = gauss_1d(n)
    xi, eta = np.meshgrid(p, p, indexing="ij")
    pts = np.column_stack([xi.ravel(), eta.ravel()])
    wts = np.outer(w, w).ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def _lag1d(x):
    """1D quadratic Lagrange basis at nodes (-1, 0, +1); shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    return np.stack([0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)], axis=-1)


def _dlag1d(x):
    x = np.asarray(x, dtype=float)
    return np.stack([x - 0.5, -2.0 * x, x + 0.5], axis=-1)


# Maps local node -> (index of its xi 1D node, index of its eta 1D node),
# with 1D node order (-1, 0, +1) -> (0, 1, 2).
_IJ = np.array([(0, 0), (2, 0), (2, 2), (0, 2), (1, 0), (2, 1), (1, 2), (0, 1), (1, 1)])


def q2_values(points):
    """Q2 shape functions at reference points; shape (npts, 9)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lx = _lag1d(pts[:, 0])
    ly = _lag1d(pts[:, 1])
    return lx[:, _IJ[:, 0]] * ly[:, _IJ[:, 1]]


def q2_gradients(points):
    """Reference-frame gradients of the Q2 basis; shape (npts, 9, 2)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lx, ly = _lag1d(pts[:, 0]), _lag1d(pts[:, 1])
    dlx, dly = _dlag1d(pts[:, 0]), _dlag1d(pts[:, 1])
    gx = dlx[:, _IJ[:, 0]] * ly[:, _IJ[:, 1]]
    gy = lx[:, _IJ[:, 0]] * dly[:, _IJ[:, 1]]
    return np.stack([gx, gy], axis=-1)


def edge_values(xi):
    """1D quadratic basis (start, mid, end) at edge parameters xi."""
    return _lag1d(xi)


def edge_derivatives(xi):
    return _dlag1d(xi)


def jacobians(cell_nodes, dN):
    """Isoparametric Jacobians for a batch of cells.

    cell_nodes: (ncell, 9, 2) physical node coordinates.
    dN: (npts, 9, 2) reference gradients.
    Returns (J, detJ, invJ) with shapes (ncell, npts, 2, 2), (ncell, npts),
    (ncell, npts, 2, 2).  J[c,q,i,j] = d x_i / d xi_j.
    """
    J = np.einsum("qaj,cai->cqij", dN, cell_nodes)
    detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    invJ = np.empty_like(J)
    invJ[..., 0, 0] = J[..., 1, 1]
    invJ[..., 0, 1] = -J[..., 0, 1]
    invJ[..., 1, 0] = -J[..., 1, 0]
    invJ[..., 1, 1] = J[..., 0, 0]
    invJ /= detJ[..., None, None]
    return J, detJ, invJ


def physical_gradients(invJ, dN):
    """Eulerian-frame basis gradients: dN/dx_i = sum_j dN/dxi_j * invJ[j,i]."""
    return np.einsum("qaj,cqji->cqai", dN, invJ)
