"""
Taylor-Hood (P2 velocity / P1 pressure) assembly on a ChannelMesh.

Velocity dofs are blocked by component: dof ``c * n_nodes + i`` is component
``c`` at P2 node ``i`` (vertices first, then edge midpoints). Only nodes on
Γ_D are pinned; Γ_N nodes stay free, so the do-nothing condition is the
natural boundary condition of the weak form.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import elements
from .exceptions import AssemblyError, DimensionError
from .mesh import DIRICHLET, NEUMANN

logger = logging.getLogger(__name__)

ASSEMBLY_DEGREE = 4


@dataclass(frozen=True, eq=False)
class DiscreteSpaces:
    mesh: object
    M: sp.csr_matrix
    K: sp.csr_matrix
    B: sp.csr_matrix
    Mp: sp.csr_matrix
    dirichlet_dofs: np.ndarray
    cell_nodes: np.ndarray
    node_coords: np.ndarray
    det: np.ndarray
    inv_t: np.ndarray

    def __str__(self):
        return (f"DiscreteSpaces(P2/P1, {self.ndof_v} velocity dofs "
                f"({len(self.free_dofs)} free), {self.ndof_p} pressure dofs)")

    @property
    def n_nodes(self):
        return len(self.node_coords)

    @property
    def ndof_v(self):
        return 2 * self.n_nodes

    @property
    def ndof_p(self):
        return self.mesh.num_vertices

    @cached_property
    def free_dofs(self):
        mask = np.ones(self.ndof_v, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)

    @property
    def has_neumann(self):
        return bool(np.any(self.mesh.edge_tags == NEUMANN))

    @cached_property
    def free_blocks(self):
        """(K, M, B) restricted to the free velocity dofs."""
        f = self.free_dofs
        return (self.K[f][:, f].tocsc(), self.M[f][:, f].tocsc(), self.B[:, f].tocsc())

    def cell_dofs(self, component):
        return component * self.n_nodes + self.cell_nodes

    def embed(self, free_values):
        """Full velocity vector with zeros on Γ_D from free-dof values."""
        full = np.zeros(free_values.shape[:-1] + (self.ndof_v,))
        full[..., self.free_dofs] = free_values
        return full


def check_vectors(spaces, *vectors):
    for v in vectors:
        if np.shape(v)[-1:] != (spaces.ndof_v,):
            raise DimensionError(
                f"Expected velocity coefficient vectors of length {spaces.ndof_v}, got shape {np.shape(v)}")


def _scatter(local, rows, cols, shape):
    nt, nr, nc = local.shape
    r = np.repeat(rows[:, :, None], nc, axis=2)
    c = np.repeat(cols[:, None, :], nr, axis=1)
    return sp.coo_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=shape).tocsr()


def _scalar_blocks(mesh, cell_nodes, n_nodes, det, inv_t):
    points, weights = elements.triangle_quadrature(ASSEMBLY_DEGREE)
    phi = elements.p2_values(points)
    grad = np.einsum('tab,qib->tqia', inv_t, elements.p2_gradients(points))
    wdet = det[:, None] * weights[None, :]
    mass = np.einsum('tq,qi,qj->tij', wdet, phi, phi)
    stiff = np.einsum('tq,tqia,tqja->tij', wdet, grad, grad)
    psi = elements.p1_values(points)
    div_x = -np.einsum('tq,qp,tqj->tpj', wdet, psi, grad[..., 0])
    div_y = -np.einsum('tq,qp,tqj->tpj', wdet, psi, grad[..., 1])
    pmass = np.einsum('tq,qp,qr->tpr', wdet, psi, psi)

    shape = (n_nodes, n_nodes)
    Ms = _scatter(mass, cell_nodes, cell_nodes, shape)
    Ks = _scatter(stiff, cell_nodes, cell_nodes, shape)
    pshape = (mesh.num_vertices, n_nodes)
    Bx = _scatter(div_x, mesh.triangles, cell_nodes, pshape)
    By = _scatter(div_y, mesh.triangles, cell_nodes, pshape)
    Mp = _scatter(pmass, mesh.triangles, mesh.triangles, (mesh.num_vertices,) * 2)
    return Ms, Ks, Bx, By, Mp


def _check_boundary(mesh):
    unique, tri_edges = mesh.edges
    counts = np.bincount(tri_edges.ravel(), minlength=len(unique))
    topological = {tuple(e) for e in unique[counts == 1].tolist()}
    tagged = {tuple(sorted(map(int, e))) for e in mesh.boundary_edges}
    if topological != tagged:
        missing = sorted(topological - tagged)[:5]
        raise AssemblyError(f"Boundary edges without a tag, e.g. {missing}")


def p2_nodes(mesh):
    """Scalar P2 node coordinates and the per-triangle node indices."""
    unique, tri_edges = mesh.edges
    nv = mesh.num_vertices
    coords = np.vstack([mesh.vertices,
                        0.5 * (mesh.vertices[unique[:, 0]] + mesh.vertices[unique[:, 1]])])
    cell_nodes = np.hstack([mesh.triangles, nv + tri_edges])
    return coords, cell_nodes


def dirichlet_nodes(mesh):
    nv = mesh.num_vertices
    nodes = set()
    for (p, q), tag in mesh.tagged_edges:
        if tag == DIRICHLET:
            nodes.update((p, q, nv + mesh.edge_index[(min(p, q), max(p, q))]))
    return np.asarray(sorted(nodes), dtype=np.int64)


def assemble(mesh):
    if mesh is None or mesh.num_triangles == 0:
        raise AssemblyError("Cannot assemble on an empty mesh")
    _check_boundary(mesh)
    det, inv_t = elements.affine_maps(mesh.vertices, mesh.triangles)
    if np.any(det <= 0):
        raise AssemblyError("Mesh has degenerate or negatively oriented triangles")
    coords, cell_nodes = p2_nodes(mesh)
    n_nodes = len(coords)
    Ms, Ks, Bx, By, Mp = _scalar_blocks(mesh, cell_nodes, n_nodes, det, inv_t)

    pinned = dirichlet_nodes(mesh)
    spaces = DiscreteSpaces(
        mesh=mesh,
        M=sp.block_diag([Ms, Ms], format='csr'),
        K=sp.block_diag([Ks, Ks], format='csr'),
        B=sp.hstack([Bx, By], format='csr'),
        Mp=Mp,
        dirichlet_dofs=np.concatenate([pinned, n_nodes + pinned]),
        cell_nodes=cell_nodes,
        node_coords=coords,
        det=det,
        inv_t=inv_t,
    )
    logger.info("Assembled %s", spaces)
    return spaces


def inner_L2(spaces, u, v):
    check_vectors(spaces, u, v)
    return float(u @ (spaces.M @ v))


def inner_V(spaces, u, v):
    check_vectors(spaces, u, v)
    return float(u @ (spaces.K @ v))


def pressure_norm(spaces, q):
    if np.shape(q) != (spaces.ndof_p,):
        raise DimensionError(f"Expected {spaces.ndof_p} pressure values, got shape {np.shape(q)}")
    return float(np.sqrt(max(q @ (spaces.Mp @ q), 0.0)))


def interpolate(spaces, func):
    """Nodal P2 interpolant of ``func(x, y) -> (u1, u2)``."""
    x, y = spaces.node_coords.T
    u1, u2 = func(x, y)
    return np.concatenate([np.broadcast_to(u1, x.shape), np.broadcast_to(u2, x.shape)]).astype(float)


def interpolate_pressure(spaces, func):
    x, y = spaces.mesh.vertices.T
    return np.broadcast_to(func(x, y), x.shape).astype(float)


def evaluate(spaces, u, ref_points):
    """Values (nt, nq, 2) and gradients (nt, nq, 2, 2) of a velocity field at
    ``ref_points`` mapped into every triangle; gradient[..., i, j] = ∂u_i/∂x_j."""
    check_vectors(spaces, u)
    phi = elements.p2_values(ref_points)
    grad = np.einsum('tab,qib->tqia', spaces.inv_t, elements.p2_gradients(ref_points))
    local = np.stack([u[spaces.cell_dofs(c)] for c in range(2)], axis=1)  # (nt, 2, 6)
    values = np.einsum('tci,qi->tqc', local, phi)
    gradients = np.einsum('tci,tqia->tqca', local, grad)
    return values, gradients


def evaluate_pressure(spaces, q, ref_points):
    psi = elements.p1_values(ref_points)
    return np.einsum('tp,qp->tq', q[spaces.mesh.triangles], psi)


def locate_points(mesh, points, tol=1e-12):
    """Containing triangle and reference coordinates of physical points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    p0 = mesh.vertices[mesh.triangles[:, 0]]
    _, inv_t = elements.affine_maps(mesh.vertices, mesh.triangles)
    offset = points[:, None, :] - p0[None, :, :]  # (np, nt, 2)
    ref = np.einsum('tba,ntb->nta', inv_t, offset)
    inside = (ref[..., 0] >= -tol) & (ref[..., 1] >= -tol) & (ref.sum(axis=2) <= 1 + tol)
    found = inside.any(axis=1)
    if not found.all():
        missing = points[~found][:3].tolist()
        raise DimensionError(f"Points outside the mesh, e.g. {missing}")
    cells = inside.argmax(axis=1)
    return cells, ref[np.arange(len(points)), cells]


def evaluate_at(spaces, u, q, points):
    """Velocity (np, 2) and pressure (np,) at physical points."""
    check_vectors(spaces, u)
    cells, ref = locate_points(spaces.mesh, points)
    phi = elements.p2_values(ref)
    psi = elements.p1_values(ref)
    velocity = np.stack([np.sum(u[spaces.cell_dofs(c)[cells]] * phi, axis=1) for c in range(2)], axis=1)
    pressure = np.sum(q[spaces.mesh.triangles[cells]] * psi, axis=1)
    return velocity, pressure


def scalar_laplace_eigenvalues(mesh, k):
    """Smallest ``k`` eigenvalues of the scalar P2 Laplacian with Dirichlet
    conditions on Γ_D and natural conditions on Γ_N."""
    det, inv_t = elements.affine_maps(mesh.vertices, mesh.triangles)
    coords, cell_nodes = p2_nodes(mesh)
    Ms, Ks, _, _, _ = _scalar_blocks(mesh, cell_nodes, len(coords), det, inv_t)
    mask = np.ones(len(coords), dtype=bool)
    mask[dirichlet_nodes(mesh)] = False
    free = np.flatnonzero(mask)
    Kf = Ks[free][:, free].toarray()
    Mf = Ms[free][:, free].toarray()
    return scipy.linalg.eigh(Kf, Mf, eigvals_only=True, subset_by_index=[0, k - 1])


def inf_sup_constant(spaces):
    """Discrete inf-sup constant: the square root of the smallest eigenvalue
    of B K⁻¹ Bᵀ against the pressure mass (constant pressure excluded when
    Γ_N is empty)."""
    Kf, _, Bf = spaces.free_blocks
    solve = spla.factorized(Kf)
    Bd = Bf.toarray()
    schur = Bd @ np.column_stack([solve(row) for row in Bd])
    schur = 0.5 * (schur + schur.T)
    eigs = scipy.linalg.eigh(schur, spaces.Mp.toarray(), eigvals_only=True)
    index = 0 if spaces.has_neumann else 1
    return float(np.sqrt(max(eigs[index], 0.0)))


def export_matrices(spaces, directory):
    """Matrix Market (coordinate) files for M, K, B and the pressure mass."""
    written = []
    for name in ('M', 'K', 'B', 'Mp'):
        path = f"{directory}/{name}.mtx"
        scipy.io.mmwrite(path, getattr(spaces, name).tocoo(), comment=f"mixedflow {name}")
        written.append(path)
    return written
