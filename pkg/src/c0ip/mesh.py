"""Triangulations of convex polygons with uniform red refinement.

The mesh layer produces conforming triangulations together with the oriented
edge topology (T-, T+ adjacency and unit normals) that the interior penalty
bilinear form needs.  All meshes are immutable after construction.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "Polygon",
    "Edge",
    "Triangulation",
    "MeshError",
    "built_in_polygon",
    "load_polygon",
    "triangulate_initial",
    "refine_uniform",
    "build_edges",
    "BUILT_IN_DOMAINS",
]

_AREA_RTOL = 1e-12


class MeshError(ValueError):
    """Invalid polygon or triangulation input."""


@dataclass(frozen=True)
class Polygon:
    """Strictly convex polygon given by counter-clockwise vertices."""

    vertices: np.ndarray
    name: str = "polygon"

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise MeshError("polygon needs at least 3 planar vertices")
        object.__setattr__(self, "vertices", v)
        n = len(v)
        for i in range(n):
            for j in range(i + 1, n):
                if np.allclose(v[i], v[j], rtol=0.0, atol=1e-14):
                    raise MeshError(f"repeated polygon vertex at index {i} and {j}")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.any(cross <= 0.0):
            bad = int(np.argmin(cross))
            raise MeshError(
                f"polygon is not strictly convex / counter-clockwise (turn at vertex {(bad + 1) % n})"
            )

    @property
    def area(self):
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))

    @property
    def perimeter(self):
        v = self.vertices
        return float(np.sum(np.hypot(*(np.roll(v, -1, axis=0) - v).T)))


class Edge(NamedTuple):
    """Record view of one mesh edge."""

    vertex_ids: tuple
    length: float
    kind: str              # "interior" | "boundary"
    t_minus: int
    t_plus: int            # -1 on boundary edges
    normal: np.ndarray     # interior: unit normal from T- into T+; boundary: outward
    midpoint: np.ndarray


@dataclass(frozen=True)
class Triangulation:
    """Conforming triangulation with oriented edge topology.

    Vertices created by refinement are appended after their parents in
    parent-edge order, so vertex ids (and with them the vertex-then-edge dof
    numbering) form a stable prefix across refinement levels.
    """

    polygon: Polygon
    vertices: np.ndarray           # (nv, 2)
    triangles: np.ndarray          # (nt, 3) CCW vertex ids
    level: int
    edge_vertices: np.ndarray = field(default=None)   # (ne, 2), sorted pairs
    edge_t_minus: np.ndarray = field(default=None)    # (ne,)
    edge_t_plus: np.ndarray = field(default=None)     # (ne,), -1 on boundary
    edge_normal: np.ndarray = field(default=None)     # (ne, 2)
    edge_length: np.ndarray = field(default=None)
    edge_midpoint: np.ndarray = field(default=None)
    cell_edges: np.ndarray = field(default=None)      # (nt, 3), edge opposite local vertex
    boundary_vertex_flags: np.ndarray = field(default=None)
    corner_vertex_ids: np.ndarray = field(default=None)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def n_edges(self):
        return self.edge_vertices.shape[0]

    @property
    def is_boundary_edge(self):
        return self.edge_t_plus < 0

    @property
    def h_max(self):
        """Mesh size h: the largest triangle diameter (= largest edge length)."""
        return float(self.edge_length.max())

    def triangle_areas(self):
        v = self.vertices
        t = self.triangles
        d1 = v[t[:, 1]] - v[t[:, 0]]
        d2 = v[t[:, 2]] - v[t[:, 0]]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge(self, i):
        """Edge record for edge index ``i``."""
        tp = int(self.edge_t_plus[i])
        return Edge(
            vertex_ids=(int(self.edge_vertices[i, 0]), int(self.edge_vertices[i, 1])),
            length=float(self.edge_length[i]),
            kind="boundary" if tp < 0 else "interior",
            t_minus=int(self.edge_t_minus[i]),
            t_plus=tp,
            normal=self.edge_normal[i].copy(),
            midpoint=self.edge_midpoint[i].copy(),
        )

    def __str__(self):
        return (
            f"Triangulation(level={self.level}, {self.n_vertices} vertices, "
            f"{self.n_triangles} triangles, {self.n_edges} edges)"
        )


BUILT_IN_DOMAINS = {
    "unit-square": [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
    "right-triangle": [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)],
    # regular hexagon with unit circumradius
    "hexagon": [
        (np.cos(k * np.pi / 3.0), np.sin(k * np.pi / 3.0)) for k in range(6)
    ],
    # convex pentagon stressing the large-interior-angle regime
    "pentagon150": [(0.0, 0.0), (1.0, 0.0), (1.5, 0.866), (0.75, 1.5), (-0.25, 0.75)],
}


def built_in_polygon(name):
    """Named built-in domain as a Polygon."""
    try:
        verts = BUILT_IN_DOMAINS[name]
    except KeyError:
        known = ", ".join(sorted(BUILT_IN_DOMAINS))
        raise MeshError(f"unknown domain {name!r} (available: {known})") from None
    return Polygon(np.asarray(verts, dtype=float), name=name)


def load_polygon(path, name=None):
    """Read a polygon from plain text: one ``x y`` pair per line, CCW order."""
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise MeshError(f"{path}:{lineno}: expected 'x y', got {raw.strip()!r}")
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise MeshError(f"{path}:{lineno}: non-numeric coordinate") from None
    return Polygon(np.asarray(rows, dtype=float), name=name or str(path))


def triangulate_initial(polygon):
    """Coarse conforming triangulation of a convex polygon.

    The unit square gets the canonical two-triangle split along the
    (0,0)-(1,1) diagonal; every other polygon is fan-triangulated from
    vertex 0.  All polygon vertices become mesh vertices.
    """
    v = polygon.vertices
    n = len(v)
    if n == 4 and _is_unit_square(v):
        tris = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int64)
    else:
        tris = np.array([[0, i, i + 1] for i in range(1, n - 1)], dtype=np.int64)
    mesh = Triangulation(polygon=polygon, vertices=v.copy(), triangles=tris, level=0)
    return build_edges(mesh)


def _is_unit_square(v):
    ref = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return np.allclose(v, ref, rtol=0.0, atol=1e-14)


def build_edges(mesh):
    """Populate edge topology: adjacency, kind, oriented normals, corners.

    Edges are ordered by their sorted vertex-index pair; for interior edges
    the adjacent triangle with the smaller index is T- and the normal points
    from T- into T+; boundary normals point out of the polygon.
    """
    verts = mesh.vertices
    tris = mesh.triangles

    areas2 = _signed_areas2(verts, tris)
    if np.any(areas2 <= 0.0):
        bad = int(np.argmin(areas2))
        raise MeshError(f"triangle {bad} is degenerate or not counter-clockwise")

    # Conformity bookkeeping on sorted vertex pairs.
    pair_map = {}
    for ti, tri in enumerate(tris):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(min(a, b)), int(max(a, b)))
            owners = pair_map.setdefault(key, [])
            owners.append(ti)
            if len(owners) > 2:
                raise MeshError(f"edge {key} shared by more than two triangles")

    keys = sorted(pair_map)
    ne = len(keys)
    edge_vertices = np.array(keys, dtype=np.int64)
    edge_index = {k: i for i, k in enumerate(keys)}
    t_minus = np.empty(ne, dtype=np.int64)
    t_plus = np.empty(ne, dtype=np.int64)
    for i, k in enumerate(keys):
        owners = sorted(pair_map[k])
        t_minus[i] = owners[0]
        t_plus[i] = owners[1] if len(owners) == 2 else -1

    pa = verts[edge_vertices[:, 0]]
    pb = verts[edge_vertices[:, 1]]
    tangent = pb - pa
    length = np.hypot(tangent[:, 0], tangent[:, 1])
    normal = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / length[:, None]
    midpoint = 0.5 * (pa + pb)

    centroids = verts[tris].mean(axis=1)
    interior = t_plus >= 0
    # interior: orient from T- to T+; boundary: outward = away from T- centroid
    ref = np.where(
        interior[:, None],
        centroids[np.where(interior, t_plus, 0)] - centroids[t_minus],
        midpoint - centroids[t_minus],
    )
    flip = np.einsum("ij,ij->i", normal, ref) < 0.0
    normal[flip] *= -1.0

    cell_edges = np.empty_like(tris)
    for ti, tri in enumerate(tris):
        for loc, (a, b) in enumerate(((tri[1], tri[2]), (tri[2], tri[0]), (tri[0], tri[1]))):
            cell_edges[ti, loc] = edge_index[(int(min(a, b)), int(max(a, b)))]

    boundary_flags = np.zeros(len(verts), dtype=bool)
    bedges = edge_vertices[~interior]
    boundary_flags[bedges.ravel()] = True

    corner_ids = _corner_vertex_ids(mesh.polygon, verts)

    out = Triangulation(
        polygon=mesh.polygon,
        vertices=verts,
        triangles=tris,
        level=mesh.level,
        edge_vertices=edge_vertices,
        edge_t_minus=t_minus,
        edge_t_plus=t_plus,
        edge_normal=normal,
        edge_length=length,
        edge_midpoint=midpoint,
        cell_edges=cell_edges,
        boundary_vertex_flags=boundary_flags,
        corner_vertex_ids=corner_ids,
    )
    _check_cover(out)
    return out


def _signed_areas2(verts, tris):
    d1 = verts[tris[:, 1]] - verts[tris[:, 0]]
    d2 = verts[tris[:, 2]] - verts[tris[:, 0]]
    return d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]


def _corner_vertex_ids(polygon, verts):
    ids = []
    for p in polygon.vertices:
        d = np.hypot(verts[:, 0] - p[0], verts[:, 1] - p[1])
        j = int(np.argmin(d))
        if d[j] > 1e-12:
            raise MeshError("polygon corner missing from mesh vertices")
        ids.append(j)
    return np.asarray(ids, dtype=np.int64)


def _check_cover(mesh):
    total = float(mesh.triangle_areas().sum())
    target = mesh.polygon.area
    if abs(total - target) > _AREA_RTOL * max(abs(target), 1.0):
        raise MeshError(
            f"triangle areas sum to {total!r}, polygon area is {target!r}"
        )


def refine_uniform(mesh):
    """Red refinement: split every triangle into four similar children.

    New vertices are exactly the parent edge midpoints, appended in parent
    edge order, so vertex numbering is a prefix of every finer level and h
    halves exactly.
    """
    nv = mesh.n_vertices
    verts = np.vstack([mesh.vertices, mesh.edge_midpoint])

    t = mesh.triangles
    # midpoint vertex opposite local vertex k is on edge cell_edges[:, k]
    m0 = nv + mesh.cell_edges[:, 0]
    m1 = nv + mesh.cell_edges[:, 1]
    m2 = nv + mesh.cell_edges[:, 2]
    children = np.empty((4 * mesh.n_triangles, 3), dtype=np.int64)
    children[0::4] = np.column_stack([t[:, 0], m2, m1])
    children[1::4] = np.column_stack([m2, t[:, 1], m0])
    children[2::4] = np.column_stack([m1, m0, t[:, 2]])
    children[3::4] = np.column_stack([m0, m1, m2])

    out = Triangulation(
        polygon=mesh.polygon,
        vertices=verts,
        triangles=children,
        level=mesh.level + 1,
    )
    return build_edges(out)


def mesh_hierarchy(polygon, max_level):
    """Meshes at levels 0..max_level produced by repeated red refinement."""
    meshes = [triangulate_initial(polygon)]
    for _ in range(max_level):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes
