"""Fourth-order problem with Cahn-Hilliard type boundary conditions.

The continuous problem prescribes a vanishing normal derivative and a given
normal flux of the Laplacian; its solution is unique only up to constants,
so the discrete space pins the value at one polygon corner to zero.  The
data must satisfy the compatibility condition

    int_Omega g1 dx = int_{boundary} g2 ds,

which the problem constructor checks with high-order quadrature.
"""

import inspect
import warnings
from dataclasses import dataclass

import numpy as np

from .c0ip import C0ipParams, assemble_a_h, assemble_boundary_load, assemble_load
from .fem import P2, QuadratureRule, TriangleGeometry, build_dofmap
from .linalg import BandedCholesky, SolveReport, constrain

__all__ = [
    "ChProblem",
    "ChSolution",
    "CompatibilityError",
    "check_compatibility",
    "solve_ch",
    "default_pin_corner",
]

_TINY = 1e-300
_COMPAT_HARD = 1e-8
_COMPAT_WARN = 1e-10
_CHECK_TRI_RULE = QuadratureRule.triangle(20)
_CHECK_EDGE_RULE = QuadratureRule.interval(19)


class CompatibilityError(ValueError):
    """Source and flux data violate the compatibility condition."""


def default_pin_corner(mesh):
    """Vertex id of the lexicographically smallest polygon corner."""
    corners = mesh.corner_vertex_ids
    pts = mesh.vertices[corners]
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    return int(corners[order[0]])


def _wants_normal(g2):
    try:
        return len(inspect.signature(g2).parameters) >= 4
    except (TypeError, ValueError):
        return False


def _boundary_integral(mesh, g2, rule):
    edges = np.flatnonzero(mesh.is_boundary_edge)
    if len(edges) == 0:
        return 0.0, 0.0
    pa = mesh.vertices[mesh.edge_vertices[edges, 0]]
    pb = mesh.vertices[mesh.edge_vertices[edges, 1]]
    pts = pa[:, None, :] + rule.points[None, :, None] * (pb - pa)[:, None, :]
    if _wants_normal(g2):
        n = mesh.edge_normal[edges]
        gv = g2(pts[..., 0], pts[..., 1], n[:, None, 0], n[:, None, 1])
    else:
        gv = g2(pts[..., 0], pts[..., 1])
    gv = np.broadcast_to(np.asarray(gv, dtype=float), pts.shape[:2])
    line = mesh.edge_length[edges] @ (gv @ rule.weights)
    l2sq = mesh.edge_length[edges] @ (gv**2 @ rule.weights)
    return float(line), float(np.sqrt(max(l2sq, 0.0)))


def _volume_integral(mesh, g1, rule):
    geom = TriangleGeometry.from_mesh(mesh)
    pts = geom.to_physical(rule.points)
    gv = np.broadcast_to(
        np.asarray(g1(pts[..., 0], pts[..., 1]), dtype=float), pts.shape[:2]
    )
    vol = float(2.0 * geom.area @ (gv @ rule.weights))
    l2sq = float(2.0 * geom.area @ (gv**2 @ rule.weights))
    return vol, float(np.sqrt(max(l2sq, 0.0)))


class ChProblem:
    """Source/flux data on a mesh, with corner pinning and validated data."""

    def __init__(self, mesh, g1, g2, params=None, pinned_corner=None, dofmap=None):
        self.mesh = mesh
        self.g1 = g1
        self.g2 = g2
        self.params = params or C0ipParams()
        self.dofmap = dofmap or build_dofmap(mesh, "Qh")
        self.pinned_corner = (
            default_pin_corner(mesh) if pinned_corner is None else int(pinned_corner)
        )
        if self.pinned_corner not in set(mesh.corner_vertex_ids.tolist()):
            raise ValueError(
                f"pinned vertex {self.pinned_corner} is not a polygon corner"
            )

        vol, g1_norm = _volume_integral(mesh, g1, _CHECK_TRI_RULE)
        line, g2_norm = _boundary_integral(mesh, g2, _CHECK_EDGE_RULE)
        self.compatibility_defect = vol - line
        self._data_scale = g1_norm + g2_norm + 1.0
        defect = abs(self.compatibility_defect)
        if defect > _COMPAT_HARD * self._data_scale:
            raise CompatibilityError(
                f"compatibility defect {self.compatibility_defect:.3e} exceeds "
                f"{_COMPAT_HARD:.0e} * data scale {self._data_scale:.3e}"
            )
        if defect > _COMPAT_WARN * self._data_scale:
            warnings.warn(
                f"compatibility defect {self.compatibility_defect:.3e} is within "
                "tolerance but not negligible",
                stacklevel=2,
            )


def check_compatibility(problem):
    """Signed quadrature value of int g1 - int g2."""
    return problem.compatibility_defect


@dataclass(frozen=True)
class ChSolution:
    psi_h: np.ndarray
    residual: float
    report: SolveReport


def solve_ch(problem):
    """Solve the corner-pinned discrete problem by direct factorization."""
    mesh, dofmap = problem.mesh, problem.dofmap
    A = assemble_a_h(mesh, dofmap, problem.params)
    b = assemble_load(mesh, dofmap, problem.g1)
    if _wants_normal(problem.g2):
        b -= _boundary_load_with_normals(mesh, dofmap, problem.g2)
    else:
        b -= assemble_boundary_load(mesh, dofmap, problem.g2)

    pin = problem.pinned_corner  # vertex dofs come first, so dof id = vertex id
    A_red, b_red, expand = constrain(A, b, [pin])
    factor = BandedCholesky(A_red)
    x = factor.solve(b_red)
    psi = expand.expand(x)

    res = np.linalg.norm(A_red @ x - b_red)
    rel = float(res / max(np.linalg.norm(b_red), _TINY))
    report = SolveReport("cholesky", 0, rel, rel <= 1e-10)
    return ChSolution(psi_h=psi, residual=rel, report=report)


def _boundary_load_with_normals(mesh, dofmap, g2, rule=QuadratureRule.interval(9)):
    """Boundary load for flux fields that depend on the outward normal."""
    geom = TriangleGeometry.from_mesh(mesh)
    edges = np.flatnonzero(mesh.is_boundary_edge)
    b = np.zeros(dofmap.n_dofs)
    if len(edges) == 0:
        return b
    pa = mesh.vertices[mesh.edge_vertices[edges, 0]]
    pb = mesh.vertices[mesh.edge_vertices[edges, 1]]
    pts = pa[:, None, :] + rule.points[None, :, None] * (pb - pa)[:, None, :]
    n = mesh.edge_normal[edges]
    gv = np.broadcast_to(
        np.asarray(
            g2(pts[..., 0], pts[..., 1], n[:, None, 0], n[:, None, 1]), dtype=float
        ),
        pts.shape[:2],
    )
    tri_ids = mesh.edge_t_minus[edges]
    d = pts - geom.v0[tri_ids][:, None, :]
    ref = np.einsum("tij,tqj->tqi", geom.jac_inv[tri_ids], d)
    vals = P2.values(ref)
    contrib = mesh.edge_length[edges][:, None] * np.einsum(
        "q,eq,eqb->eb", rule.weights, gv, vals
    )
    np.add.at(b, dofmap.cell_dofs[tri_ids], contrib)
    return b
