"""
Reference-triangle quadrature and the P1/P2 Lagrange shape functions.

Reference triangle: (0,0), (1,0), (0,1). P2 local nodes: the three vertices,
then the midpoints of the edges 0-1, 1-2, 2-0.
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def triangle_quadrature(degree):
    """Collapsed Gauss-Legendre rule exact for polynomials of total degree
    ``degree``. Returns (points (nq, 2), weights (nq,)); weights sum to 1/2."""
    n = degree // 2 + 1
    nodes, weights = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    u, v = np.meshgrid(s, s, indexing='ij')
    wu, wv = np.meshgrid(w, w, indexing='ij')
    x = u * (1.0 - v)
    y = v
    points = np.column_stack([x.ravel(), y.ravel()])
    weights = (wu * wv * (1.0 - v)).ravel()
    points.setflags(write=False)
    weights.setflags(write=False)
    return points, weights


def _barycentric(points):
    points = np.atleast_2d(points)
    x, y = points[:, 0], points[:, 1]
    return np.stack([1.0 - x - y, x, y], axis=1)


_BARY_GRAD = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_P2_EDGES = ((0, 1), (1, 2), (2, 0))


def p1_values(points):
    return _barycentric(points)


def p1_gradients(points):
    nq = len(np.atleast_2d(points))
    return np.broadcast_to(_BARY_GRAD, (nq, 3, 2)).copy()


def p2_values(points):
    lam = _barycentric(points)
    vertex = lam * (2.0 * lam - 1.0)
    edge = np.stack([4.0 * lam[:, i] * lam[:, j] for i, j in _P2_EDGES], axis=1)
    return np.concatenate([vertex, edge], axis=1)


def p2_gradients(points):
    lam = _barycentric(points)
    nq = len(lam)
    grads = np.empty((nq, 6, 2))
    for i in range(3):
        grads[:, i, :] = (4.0 * lam[:, i])[:, None] * _BARY_GRAD[i] - _BARY_GRAD[i]
    for k, (i, j) in enumerate(_P2_EDGES):
        grads[:, 3 + k, :] = 4.0 * (lam[:, j][:, None] * _BARY_GRAD[i]
                                    + lam[:, i][:, None] * _BARY_GRAD[j])
    return grads


def affine_maps(vertices, triangles):
    """Per-triangle Jacobian determinants and inverse-transposed Jacobians."""
    p = vertices[triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_t = np.empty_like(jac)
    inv_t[:, 0, 0] = jac[:, 1, 1]
    inv_t[:, 0, 1] = -jac[:, 1, 0]
    inv_t[:, 1, 0] = -jac[:, 0, 1]
    inv_t[:, 1, 1] = jac[:, 0, 0]
    inv_t /= det[:, None, None]
    return det, inv_t


def map_points(vertices, triangles, ref_points):
    """Physical coordinates (nt, nq, 2) of reference points on every triangle."""
    p = vertices[triangles]
    lam = _barycentric(ref_points)
    return np.einsum('qa,tad->tqd', lam, p)
