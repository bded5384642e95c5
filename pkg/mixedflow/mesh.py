"""
Structured triangulations of a rectangular channel.

The walls carry the Dirichlet tag (Γ_D), the in/outflow ends the Neumann
("do-nothing") tag (Γ_N). A corner point is a boundary vertex where a
Dirichlet edge meets a Neumann edge; on a rectangle these meet at a right
angle, which is the only kind of type change accepted.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import MeshError

logger = logging.getLogger(__name__)

DIRICHLET = 'dirichlet'
NEUMANN = 'neumann'
TAGS = (DIRICHLET, NEUMANN)

SIDES = ('bottom', 'right', 'top', 'left')

DEFAULT_GAMMA = {
    'bottom': DIRICHLET,
    'top': DIRICHLET,
    'left': NEUMANN,
    'right': NEUMANN,
}


def _frozen(array, dtype):
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ChannelMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: np.ndarray
    corner_points: np.ndarray
    h: float
    length: float
    height: float

    def __post_init__(self):
        object.__setattr__(self, 'vertices', _frozen(self.vertices, float))
        object.__setattr__(self, 'triangles', _frozen(self.triangles, np.int64))
        object.__setattr__(self, 'boundary_edges', _frozen(self.boundary_edges, np.int64))
        object.__setattr__(self, 'edge_tags', _frozen(self.edge_tags, '<U9'))
        object.__setattr__(self, 'corner_points', _frozen(self.corner_points, np.int64))

    def __str__(self):
        return (f"ChannelMesh({self.length:g}x{self.height:g}, "
                f"{self.num_vertices} vertices, {self.num_triangles} triangles, h={self.h:.4g})")

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @property
    def tagged_edges(self):
        return [((int(p), int(q)), str(tag))
                for (p, q), tag in zip(self.boundary_edges, self.edge_tags)]

    @cached_property
    def areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self):
        return float(self.areas.sum())

    @cached_property
    def edges(self):
        """Unique edges (sorted vertex pairs) and, per triangle, the ids of
        its local edges in the order (0-1, 1-2, 2-0)."""
        t = self.triangles
        local = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1)
        flat = np.sort(local.reshape(-1, 2), axis=1)
        unique, inverse = np.unique(flat, axis=0, return_inverse=True)
        return unique, inverse.reshape(-1, 3)

    @cached_property
    def edge_index(self):
        unique, _ = self.edges
        return {(int(a), int(b)): k for k, (a, b) in enumerate(unique)}

    def boundary_length(self, tag):
        if tag not in TAGS:
            raise MeshError(f"Unknown boundary tag {tag!r}")
        mask = self.edge_tags == tag
        seg = self.vertices[self.boundary_edges[mask]]
        return float(np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1).sum())

    def to_json(self):
        return {
            'length': self.length,
            'height': self.height,
            'h': self.h,
            'vertices': self.vertices.tolist(),
            'triangles': self.triangles.tolist(),
            'boundary_edges': [
                {'vertices': [p, q], 'tag': tag} for (p, q), tag in self.tagged_edges
            ],
            'corner_points': self.corner_points.tolist(),
        }

    @classmethod
    def from_json(cls, data):
        edges = data['boundary_edges']
        vertices = np.asarray(data['vertices'], dtype=float)
        triangles = np.asarray(data['triangles'], dtype=np.int64)
        boundary = np.asarray([e['vertices'] for e in edges], dtype=np.int64)
        tags = np.asarray([e['tag'] for e in edges])
        _check_tags(tags)
        return cls(
            vertices=vertices,
            triangles=triangles,
            boundary_edges=boundary,
            edge_tags=tags,
            corner_points=_find_corners(vertices, boundary, tags),
            h=_max_edge_length(vertices, triangles),
            length=float(data['length']),
            height=float(data['height']),
        )

    def to_vtk(self, point_data=None, title='mixedflow mesh'):
        """Legacy-VTK ASCII unstructured grid. ``point_data`` maps names to
        per-vertex scalars (shape (nv,)) or vectors (shape (nv, 2))."""
        lines = ['# vtk DataFile Version 3.0', title, 'ASCII', 'DATASET UNSTRUCTURED_GRID']
        lines.append(f'POINTS {self.num_vertices} double')
        lines.extend(f'{x:.17g} {y:.17g} 0' for x, y in self.vertices)
        nt = self.num_triangles
        lines.append(f'CELLS {nt} {4 * nt}')
        lines.extend(f'3 {a} {b} {c}' for a, b, c in self.triangles)
        lines.append(f'CELL_TYPES {nt}')
        lines.extend(['5'] * nt)
        if point_data:
            lines.append(f'POINT_DATA {self.num_vertices}')
            for name, values in point_data.items():
                values = np.asarray(values, dtype=float)
                if values.shape[0] != self.num_vertices:
                    raise MeshError(f"Point data {name!r} has {values.shape[0]} values, "
                                    f"expected {self.num_vertices}")
                if values.ndim == 1:
                    lines.append(f'SCALARS {name} double 1')
                    lines.append('LOOKUP_TABLE default')
                    lines.extend(f'{v:.17g}' for v in values)
                else:
                    lines.append(f'VECTORS {name} double')
                    lines.extend(f'{u:.17g} {v:.17g} 0' for u, v in values[:, :2])
        return '\n'.join(lines) + '\n'


def _graded_nodes(n, extent, ratio):
    """1D nodes on [0, extent]; spacing grows by ``ratio`` per cell away
    from both ends (ratio 1 gives a uniform grid)."""
    if ratio == 1.0:
        return np.linspace(0.0, extent, n + 1)
    index = np.arange(n)
    widths = ratio ** np.minimum(index, n - 1 - index).astype(float)
    nodes = np.concatenate([[0.0], np.cumsum(widths)])
    return extent * nodes / nodes[-1]


def _segments(rule):
    if isinstance(rule, str):
        return [(-np.inf, np.inf, rule)]
    return [(float(s0), float(s1), tag) for s0, s1, tag in rule]


def _tag_for(segments, s, side):
    for s0, s1, tag in segments:
        if s0 <= s <= s1:
            return tag
    raise MeshError(f"Boundary edge on side {side!r} at s={s:g} is not covered by the tagging rule")


def _check_tags(tags):
    unknown = set(np.unique(tags)) - set(TAGS)
    if unknown:
        raise MeshError(f"Unknown boundary tags: {sorted(unknown)}")
    if not np.any(tags == DIRICHLET):
        raise MeshError("The tagging rule leaves the Dirichlet boundary empty")


def _max_edge_length(vertices, triangles):
    p = vertices[triangles]
    lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
    return float(lengths.max())


def _find_corners(vertices, boundary_edges, tags):
    """Vertices where a Dirichlet and a Neumann edge meet; such a meeting
    must be a right angle."""
    incident = {}
    for (p, q), tag in zip(boundary_edges, tags):
        incident.setdefault(int(p), []).append((int(p), int(q), tag))
        incident.setdefault(int(q), []).append((int(p), int(q), tag))
    corners = []
    for vertex in sorted(incident):
        edges = incident[vertex]
        if len(edges) != 2:
            raise MeshError(f"Boundary vertex {vertex} has {len(edges)} boundary edges")
        (p0, q0, tag0), (p1, q1, tag1) = edges
        if tag0 == tag1:
            continue
        d0 = vertices[q0] - vertices[p0]
        d1 = vertices[q1] - vertices[p1]
        cosine = abs(d0 @ d1) / (np.linalg.norm(d0) * np.linalg.norm(d1))
        if cosine > 1e-12:
            raise MeshError(f"Boundary type changes at vertex {vertex} "
                            f"({vertices[vertex].tolist()}) without a right angle")
        corners.append(vertex)
    return np.asarray(corners, dtype=np.int64)


def build_channel_mesh(length, height, nx, ny, gamma_spec=None, grading=1.0):
    """
    Crossed-triangle mesh of (0, length) x (0, height): every grid cell is
    split by its (0,0)-(1,1) diagonal into two positively oriented triangles.

    ``gamma_spec`` maps each side ('bottom', 'right', 'top', 'left') to a tag
    or to a list of ``(s0, s1, tag)`` segments, ``s`` being the coordinate
    along that side. Missing sides fall back to the default walls/ends rule.
    """
    if length <= 0 or height <= 0:
        raise MeshError(f"Channel extents must be positive, got {length} x {height}")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError(f"nx and ny must be positive integers, got {nx}, {ny}")
    if grading < 1.0:
        raise MeshError(f"Grading ratio must be >= 1, got {grading}")
    nx, ny = int(nx), int(ny)
    rule = dict(DEFAULT_GAMMA)
    rule.update(gamma_spec or {})
    unknown_sides = set(rule) - set(SIDES)
    if unknown_sides:
        raise MeshError(f"Unknown sides in tagging rule: {sorted(unknown_sides)}")

    xs = _graded_nodes(nx, float(length), float(grading))
    ys = _graded_nodes(ny, float(height), float(grading))
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    v00, v10, v11, v01 = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
    triangles = np.concatenate([
        np.column_stack([v00, v10, v11]),
        np.column_stack([v00, v11, v01]),
    ])

    # Counter-clockwise walk: bottom, right, top, left.
    edges, tags = [], []
    sides = {
        'bottom': [((vid(k, 0), vid(k + 1, 0)), 0.5 * (xs[k] + xs[k + 1])) for k in range(nx)],
        'right': [((vid(nx, k), vid(nx, k + 1)), 0.5 * (ys[k] + ys[k + 1])) for k in range(ny)],
        'top': [((vid(k + 1, ny), vid(k, ny)), 0.5 * (xs[k] + xs[k + 1])) for k in reversed(range(nx))],
        'left': [((vid(0, k + 1), vid(0, k)), 0.5 * (ys[k] + ys[k + 1])) for k in reversed(range(ny))],
    }
    for side in SIDES:
        segments = _segments(rule[side])
        for edge, s in sides[side]:
            edges.append(edge)
            tags.append(_tag_for(segments, s, side))
    edges = np.asarray(edges, dtype=np.int64)
    tags = np.asarray(tags)
    _check_tags(tags)

    mesh = ChannelMesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=edges,
        edge_tags=tags,
        corner_points=_find_corners(vertices, edges, tags),
        h=_max_edge_length(vertices, triangles),
        length=float(length),
        height=float(height),
    )
    logger.info("Built %s with %d corner points", mesh, len(mesh.corner_points))
    return mesh


def refine(mesh):
    """Uniform red refinement: every triangle split into four through its
    edge midpoints. Original vertices keep their indices."""
    unique, tri_edges = mesh.edges
    nv = mesh.num_vertices
    midpoints = 0.5 * (mesh.vertices[unique[:, 0]] + mesh.vertices[unique[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])

    a, b, c = mesh.triangles.T
    m_ab, m_bc, m_ca = (nv + tri_edges).T
    triangles = np.concatenate([
        np.column_stack([a, m_ab, m_ca]),
        np.column_stack([m_ab, b, m_bc]),
        np.column_stack([m_ca, m_bc, c]),
        np.column_stack([m_ab, m_bc, m_ca]),
    ])

    edges, tags = [], []
    for (p, q), tag in mesh.tagged_edges:
        m = nv + mesh.edge_index[(min(p, q), max(p, q))]
        edges.extend([(p, m), (m, q)])
        tags.extend([tag, tag])
    edges = np.asarray(edges, dtype=np.int64)
    tags = np.asarray(tags)

    refined = ChannelMesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=edges,
        edge_tags=tags,
        corner_points=_find_corners(vertices, edges, tags),
        h=_max_edge_length(vertices, triangles),
        length=mesh.length,
        height=mesh.height,
    )
    logger.debug("Refined to %s", refined)
    return refined


def refine_times(mesh, levels):
    for _ in range(int(levels)):
        mesh = refine(mesh)
    return mesh
