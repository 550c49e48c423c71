"""P2 Lagrange reference element, quadrature rules, and dof maps.

Degrees of freedom live at triangle vertices and edge midpoints; globally
they are numbered vertices first, then edges, which keeps the numbering a
stable prefix under red refinement.  The boundary-vanishing space is the
same dof set with the boundary dofs marked for elimination.
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np

__all__ = [
    "ReferenceElement",
    "P2",
    "QuadratureRule",
    "TriangleGeometry",
    "DofMap",
    "eval_basis",
    "build_dofmap",
    "interpolate",
    "evaluate",
]

# barycentric gradients on the reference triangle (0,0)-(1,0)-(0,1)
_GRADL = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


class ReferenceElement:
    """Quadratic nodal element on the reference triangle.

    Local ordering: three vertex nodes, then the midpoint nodes opposite
    each vertex (node 3 on edge (1,2), node 4 on edge (2,0), node 5 on
    edge (0,1)).
    """

    n_basis = 6
    nodes = np.array(
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.0, 0.5], [0.5, 0.0]]
    )

    def __init__(self):
        H = np.empty((6, 2, 2))
        for i in range(3):
            H[i] = 4.0 * np.outer(_GRADL[i], _GRADL[i])
        for k, (i, j) in enumerate([(1, 2), (2, 0), (0, 1)]):
            H[3 + k] = 4.0 * (np.outer(_GRADL[i], _GRADL[j]) + np.outer(_GRADL[j], _GRADL[i]))
        self.hessians = H  # constant per shape function

    @staticmethod
    def _bary(points):
        pts = np.asarray(points, dtype=float)
        lam = np.empty(pts.shape[:-1] + (3,))
        lam[..., 0] = 1.0 - pts[..., 0] - pts[..., 1]
        lam[..., 1] = pts[..., 0]
        lam[..., 2] = pts[..., 1]
        return lam

    def values(self, points):
        """Shape function values at reference points; shape (..., 6)."""
        lam = self._bary(points)
        out = np.empty(lam.shape[:-1] + (6,))
        out[..., :3] = lam * (2.0 * lam - 1.0)
        out[..., 3] = 4.0 * lam[..., 1] * lam[..., 2]
        out[..., 4] = 4.0 * lam[..., 2] * lam[..., 0]
        out[..., 5] = 4.0 * lam[..., 0] * lam[..., 1]
        return out

    def gradients(self, points):
        """Reference gradients at reference points; shape (..., 6, 2)."""
        lam = self._bary(points)
        out = np.empty(lam.shape[:-1] + (6, 2))
        for i in range(3):
            out[..., i, :] = (4.0 * lam[..., i, None] - 1.0) * _GRADL[i]
        for k, (i, j) in enumerate([(1, 2), (2, 0), (0, 1)]):
            out[..., 3 + k, :] = 4.0 * (
                lam[..., i, None] * _GRADL[j] + lam[..., j, None] * _GRADL[i]
            )
        return out


P2 = ReferenceElement()


def eval_basis(element, point):
    """Values, gradients, and (constant) Hessians of all shape functions."""
    pt = np.asarray(point, dtype=float)
    return element.values(pt), element.gradients(pt), element.hessians.copy()


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference triangle or the unit interval."""

    points: np.ndarray    # (Q, 2) reference coords, or (Q,) on [0, 1]
    weights: np.ndarray   # sums to the reference measure (1/2 resp. 1)
    degree: int

    @staticmethod
    def triangle(degree=6):
        """Symmetric rule exact for polynomials up to ``degree``."""
        if degree <= 6:
            groups = [
                ((0.873821971016996, 0.063089014491502, 0.063089014491502),
                 0.050844906370207),
                ((0.501426509658179, 0.249286745170910, 0.249286745170910),
                 0.116786275726379),
                ((0.636502499121399, 0.310352451033785, 0.053145049844816),
                 0.082851075618374),
            ]
            pts, wts = [], []
            for lam, w in groups:
                for p in sorted(set(permutations(lam))):
                    pts.append((p[1], p[2]))
                    wts.append(w)
            return QuadratureRule(np.array(pts), 0.5 * np.array(wts), 6)
        # collapsed tensor Gauss (Duffy); exact to ``degree`` and spectrally
        # accurate for smooth non-polynomial integrands
        n = degree // 2 + 2
        x, w = np.polynomial.legendre.leggauss(n)
        x = 0.5 * (x + 1.0)
        w = 0.5 * w
        U, V = np.meshgrid(x, x, indexing="ij")
        WU, WV = np.meshgrid(w, w, indexing="ij")
        xs = U.ravel()
        ys = (V * (1.0 - U)).ravel()
        ws = (WU * WV * (1.0 - U)).ravel()
        return QuadratureRule(np.column_stack([xs, ys]), ws, degree)

    @staticmethod
    def interval(degree=9):
        """Gauss-Legendre on [0, 1] exact for polynomials up to ``degree``."""
        n = degree // 2 + 1
        x, w = np.polynomial.legendre.leggauss(n)
        return QuadratureRule(0.5 * (x + 1.0), 0.5 * w, 2 * n - 1)


@dataclass(frozen=True)
class TriangleGeometry:
    """Affine maps of all triangles of a mesh."""

    v0: np.ndarray       # (nt, 2)
    jac: np.ndarray      # (nt, 2, 2), columns are edge vectors
    jac_inv: np.ndarray  # (nt, 2, 2)
    area: np.ndarray     # (nt,)

    @staticmethod
    def from_mesh(mesh):
        v = mesh.vertices
        t = mesh.triangles
        d1 = v[t[:, 1]] - v[t[:, 0]]
        d2 = v[t[:, 2]] - v[t[:, 0]]
        jac = np.stack([d1, d2], axis=-1)
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1] / det
        inv[:, 0, 1] = -jac[:, 0, 1] / det
        inv[:, 1, 0] = -jac[:, 1, 0] / det
        inv[:, 1, 1] = jac[:, 0, 0] / det
        return TriangleGeometry(v0=v[t[:, 0]], jac=jac, jac_inv=inv, area=0.5 * det)

    def to_physical(self, ref_points):
        """Map reference points (Q, 2) into every triangle; (nt, Q, 2)."""
        return self.v0[:, None, :] + np.einsum("tij,qj->tqi", self.jac, ref_points)

    def to_reference(self, cells, points):
        """Reference coordinates of physical ``points`` inside ``cells``."""
        d = points - self.v0[cells]
        return np.einsum("...ij,...j->...i", self.jac_inv[cells], d)

    def laplacians(self, element=P2):
        """Physical Laplacian of each shape function; constant, (nt, 6)."""
        # hess_phys = Jinv^T Href Jinv; trace via einsum
        return np.einsum(
            "tmk,bmn,tnk->tb", self.jac_inv, element.hessians, self.jac_inv
        )


@dataclass(frozen=True)
class DofMap:
    """Global P2 dof numbering for Q_h, with V_h as a constrained subset."""

    space_kind: str            # "Qh" | "Vh"
    n_dofs: int
    nodes: np.ndarray          # (n_dofs, 2) dof coordinates
    cell_dofs: np.ndarray      # (nt, 6) local-to-global
    boundary_dof_ids: np.ndarray
    corner_dof_ids: np.ndarray

    @property
    def free_dof_ids(self):
        """Dofs that carry unknowns (all for Q_h; interior ones for V_h)."""
        if self.space_kind == "Qh":
            return np.arange(self.n_dofs)
        return np.setdiff1d(np.arange(self.n_dofs), self.boundary_dof_ids)


def build_dofmap(mesh, kind="Qh"):
    """P2 dof map: vertex dofs 0..nv-1 then edge dofs nv..nv+ne-1."""
    if kind not in ("Qh", "Vh"):
        raise ValueError(f"space kind must be 'Qh' or 'Vh', got {kind!r}")
    nv = mesh.n_vertices
    cell_dofs = np.empty((mesh.n_triangles, 6), dtype=np.int64)
    cell_dofs[:, :3] = mesh.triangles
    cell_dofs[:, 3:] = nv + mesh.cell_edges
    nodes = np.vstack([mesh.vertices, mesh.edge_midpoint])

    bnd = np.concatenate(
        [
            np.flatnonzero(mesh.boundary_vertex_flags),
            nv + np.flatnonzero(mesh.is_boundary_edge),
        ]
    )
    return DofMap(
        space_kind=kind,
        n_dofs=nv + mesh.n_edges,
        nodes=nodes,
        cell_dofs=cell_dofs,
        boundary_dof_ids=np.sort(bnd),
        corner_dof_ids=mesh.corner_vertex_ids.copy(),
    )


def interpolate(dofmap, function):
    """Nodal interpolation: coefficients are point values at the dof nodes.

    For V_h the boundary coefficients are forced to zero.
    """
    coeffs = np.asarray(function(dofmap.nodes[:, 0], dofmap.nodes[:, 1]), dtype=float)
    coeffs = np.broadcast_to(coeffs, (dofmap.n_dofs,)).copy()
    if dofmap.space_kind == "Vh":
        coeffs[dofmap.boundary_dof_ids] = 0.0
    return coeffs


def evaluate(mesh, dofmap, coeffs, points, element=P2):
    """Point evaluation of a finite element function (brute-force location)."""
    geom = TriangleGeometry.from_mesh(mesh)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(pts))
    for k, p in enumerate(pts):
        ref = geom.to_reference(np.arange(mesh.n_triangles), p[None, :])
        lam0 = 1.0 - ref[:, 0] - ref[:, 1]
        inside = (ref[:, 0] >= -1e-12) & (ref[:, 1] >= -1e-12) & (lam0 >= -1e-12)
        hits = np.flatnonzero(inside)
        if len(hits) == 0:
            raise ValueError(f"point {p} lies outside the mesh")
        t = int(hits[0])
        out[k] = element.values(np.clip(ref[t], 0.0, 1.0)) @ coeffs[dofmap.cell_dofs[t]]
    return out if out.size > 1 else float(out[0])
