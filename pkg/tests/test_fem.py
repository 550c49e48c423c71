from math import factorial

import numpy as np
import pytest

from c0ip.fem import P2, QuadratureRule, build_dofmap, eval_basis, evaluate, interpolate
from c0ip.mesh import built_in_polygon, mesh_hierarchy, refine_uniform, triangulate_initial


def test_nodal_property():
    vals = P2.values(P2.nodes)
    assert np.allclose(vals, np.eye(6), atol=1e-14)


def test_vertex_node_values():
    v, g, h = eval_basis(P2, (0.0, 0.0))
    assert np.allclose(v, [1, 0, 0, 0, 0, 0], atol=1e-15)


def test_partition_of_unity(rng=np.random.default_rng(0)):
    pts = rng.uniform(0, 1, size=(50, 2))
    pts = pts[pts.sum(axis=1) <= 1.0]
    vals = P2.values(pts)
    assert np.allclose(vals.sum(axis=-1), 1.0, atol=1e-14)
    grads = P2.gradients(pts)
    assert np.allclose(grads.sum(axis=-2), 0.0, atol=1e-13)
    # Hessians are constant and sum to zero
    assert np.allclose(P2.hessians.sum(axis=0), 0.0, atol=1e-14)


def test_midpoint_value_at_barycenter():
    vals = P2.values((1.0 / 3.0, 1.0 / 3.0))
    for k in (3, 4, 5):
        assert vals[k] == pytest.approx(4.0 / 9.0, abs=1e-15)


def test_triangle_quadrature_exactness():
    rule = QuadratureRule.triangle(6)
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-14)
    for a in range(7):
        for b in range(7 - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            got = float(rule.weights @ (rule.points[:, 0] ** a * rule.points[:, 1] ** b))
            assert got == pytest.approx(exact, rel=1e-13), (a, b)


def test_high_order_triangle_rule_exactness():
    rule = QuadratureRule.triangle(12)
    for a, b in [(6, 6), (12, 0), (5, 7), (0, 12)]:
        exact = factorial(a) * factorial(b) / factorial(a + b + 2)
        got = float(rule.weights @ (rule.points[:, 0] ** a * rule.points[:, 1] ** b))
        assert got == pytest.approx(exact, rel=1e-12), (a, b)


def test_interval_quadrature_exactness():
    rule = QuadratureRule.interval(9)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    for k in range(10):
        got = float(rule.weights @ rule.points**k)
        assert got == pytest.approx(1.0 / (k + 1), rel=1e-13), k


def test_dofmap_counts_two_triangle_square():
    mesh = triangulate_initial(built_in_polygon("unit-square"))
    qh = build_dofmap(mesh, "Qh")
    assert qh.n_dofs == 4 + 5 == 9
    vh = build_dofmap(mesh, "Vh")
    assert vh.n_dofs == 9
    assert len(vh.boundary_dof_ids) == 8
    assert len(vh.free_dof_ids) == 1
    # the single free dof is the diagonal midpoint
    node = vh.nodes[vh.free_dof_ids[0]]
    assert np.allclose(node, [0.5, 0.5])


def test_dofmap_counts_refined_square():
    mesh = refine_uniform(triangulate_initial(built_in_polygon("unit-square")))
    qh = build_dofmap(mesh, "Qh")
    assert qh.n_dofs == 9 + 16 == 25


def test_dofmap_shared_midpoints():
    mesh = mesh_hierarchy(built_in_polygon("pentagon150"), 2)[2]
    dm = build_dofmap(mesh)
    # each edge dof appears in exactly the triangles adjacent to its edge
    counts = np.zeros(dm.n_dofs, dtype=int)
    np.add.at(counts, dm.cell_dofs, 1)
    ne_interior = int(np.sum(~mesh.is_boundary_edge))
    edge_counts = counts[mesh.n_vertices :]
    assert int(np.sum(edge_counts == 2)) == ne_interior
    assert int(np.sum(edge_counts == 1)) == mesh.n_edges - ne_interior


def test_interpolate_constant_and_linear():
    mesh = refine_uniform(triangulate_initial(built_in_polygon("unit-square")))
    dm = build_dofmap(mesh)
    ones = interpolate(dm, lambda x, y: np.ones_like(x))
    assert np.allclose(ones, 1.0)
    xs = interpolate(dm, lambda x, y: x)
    assert np.allclose(xs, dm.nodes[:, 0], atol=1e-15)


def test_interpolate_vh_zeroes_boundary():
    mesh = mesh_hierarchy(built_in_polygon("unit-square"), 2)[2]
    dm = build_dofmap(mesh, "Vh")
    u = lambda x, y: x**2 * (1 - x) ** 2 * y**2 * (1 - y) ** 2
    coeffs = interpolate(dm, u)
    assert np.all(coeffs[dm.boundary_dof_ids] == 0.0)
    interior = dm.free_dof_ids
    assert np.allclose(
        coeffs[interior], u(dm.nodes[interior, 0], dm.nodes[interior, 1]), atol=1e-15
    )


def test_interpolation_reproduces_quadratics(rng=np.random.default_rng(3)):
    mesh = mesh_hierarchy(built_in_polygon("hexagon"), 2)[2]
    dm = build_dofmap(mesh)
    c = rng.standard_normal(6)
    q = lambda x, y: c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
    coeffs = interpolate(dm, q)
    # evaluate at random interior points and compare
    pts = []
    while len(pts) < 50:
        p = rng.uniform(-0.4, 0.4, size=2)
        pts.append(p)
    vals = evaluate(mesh, dm, coeffs, np.array(pts))
    exact = np.array([q(x, y) for x, y in pts])
    assert np.max(np.abs(vals - exact)) <= 1e-12
