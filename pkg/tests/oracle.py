"""Independent slow reference implementations used as test oracles.

Everything here is deliberately scalar and loop-based, structurally
unrelated to the vectorized assembly in the package: per-edge Gauss
quadrature with explicit outward normals, per-triangle Duffy quadrature,
and symbolic P2 basis evaluation.  Oracles only consume mesh arrays and
basis formulas, never the package's assembly code.
"""

import numpy as np


def p2_value(lam, i):
    l0, l1, l2 = lam
    table = [
        l0 * (2 * l0 - 1),
        l1 * (2 * l1 - 1),
        l2 * (2 * l2 - 1),
        4 * l1 * l2,
        4 * l2 * l0,
        4 * l0 * l1,
    ]
    return table[i]


_GRADL = [(-1.0, -1.0), (1.0, 0.0), (0.0, 1.0)]


def p2_grad_ref(lam, i):
    l = lam
    if i < 3:
        g = _GRADL[i]
        return ((4 * l[i] - 1) * g[0], (4 * l[i] - 1) * g[1])
    j, k = [(1, 2), (2, 0), (0, 1)][i - 3]
    return (
        4 * (l[j] * _GRADL[k][0] + l[k] * _GRADL[j][0]),
        4 * (l[j] * _GRADL[k][1] + l[k] * _GRADL[j][1]),
    )


def p2_hess_ref(i):
    def outer(a, b):
        return np.array(
            [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]]
        )

    if i < 3:
        g = _GRADL[i]
        return 4.0 * outer(g, g)
    j, k = [(1, 2), (2, 0), (0, 1)][i - 3]
    return 4.0 * (outer(_GRADL[j], _GRADL[k]) + outer(_GRADL[k], _GRADL[j]))


class OracleElement:
    """Scalar geometry of one triangle."""

    def __init__(self, verts, tri):
        self.pts = [verts[tri[0]], verts[tri[1]], verts[tri[2]]]
        p0, p1, p2 = self.pts
        self.jac = np.array(
            [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]]
        )
        self.det = float(np.linalg.det(self.jac))
        self.area = 0.5 * self.det
        self.jinv = np.linalg.inv(self.jac)

    def ref_coords(self, x):
        d = np.asarray(x, dtype=float) - self.pts[0]
        r = self.jinv @ d
        return np.array([1 - r[0] - r[1], r[0], r[1]])

    def grad_phys(self, lam, i):
        g = p2_grad_ref(lam, i)
        return self.jinv.T @ np.asarray(g)

    def laplacian(self, i):
        h = self.jinv.T @ p2_hess_ref(i) @ self.jinv
        return float(h[0, 0] + h[1, 1])


def duffy_points(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    pts, wts = [], []
    for i in range(n):
        for j in range(n):
            lam1 = x[i]
            lam2 = x[j] * (1.0 - x[i])
            pts.append((1 - lam1 - lam2, lam1, lam2))
            wts.append(w[i] * w[j] * (1.0 - x[i]))
    return pts, wts


def gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def oracle_a_h(mesh, dofmap, sigma, consistency_sign, nq_edge=8, nq_tri=8):
    """Dense a_h assembled edge by edge with explicit one-sided quantities."""
    verts = mesh.vertices
    tris = mesh.triangles
    n = dofmap.n_dofs
    A = np.zeros((n, n))
    elems = [OracleElement(verts, t) for t in tris]

    # volume term: Laplacians are constant
    for t, el in enumerate(elems):
        dofs = dofmap.cell_dofs[t]
        for a in range(6):
            for b in range(6):
                A[dofs[a], dofs[b]] += el.laplacian(a) * el.laplacian(b) * el.area

    gx, gw = gauss01(nq_edge)
    for e in range(mesh.n_edges):
        va, vb = mesh.edge_vertices[e]
        pa, pb = verts[va], verts[vb]
        L = float(np.hypot(*(pb - pa)))
        sides = [int(mesh.edge_t_minus[e])]
        if mesh.edge_t_plus[e] >= 0:
            sides.append(int(mesh.edge_t_plus[e]))
        mw = 1.0 / len(sides)
        # outward normal per adjacent triangle: away from its centroid
        normals = {}
        for t in sides:
            cent = verts[tris[t]].mean(axis=0)
            nrm = np.array([(pb - pa)[1], -(pb - pa)[0]]) / L
            mid = 0.5 * (pa + pb)
            normals[t] = nrm if float(nrm @ (mid - cent)) > 0 else -nrm

        union = sorted({int(d) for t in sides for d in dofmap.cell_dofs[t]})
        idx = {d: i for i, d in enumerate(union)}
        m = len(union)
        jump = np.zeros((m, nq_edge))
        mean = np.zeros(m)
        for t in sides:
            el = elems[t]
            for loc in range(6):
                g = int(dofmap.cell_dofs[t][loc])
                mean[idx[g]] += mw * el.laplacian(loc)
                for qi, s in enumerate(gx):
                    x = pa + s * (pb - pa)
                    lam = el.ref_coords(x)
                    jump[idx[g], qi] += float(el.grad_phys(lam, loc) @ normals[t])
        for a in range(m):
            for b in range(m):
                pen = sigma / L * L * float((jump[a] * jump[b]) @ gw)
                cons = consistency_sign * L * (
                    mean[a] * float(jump[b] @ gw) + float(jump[a] @ gw) * mean[b]
                )
                A[union[a], union[b]] += pen + cons
    return A


def oracle_mass(mesh, dofmap, nq=8):
    verts = mesh.vertices
    n = dofmap.n_dofs
    M = np.zeros((n, n))
    pts, wts = duffy_points(nq)
    for t in range(mesh.n_triangles):
        el = OracleElement(verts, mesh.triangles[t])
        dofs = dofmap.cell_dofs[t]
        for a in range(6):
            for b in range(6):
                s = sum(
                    w * p2_value(lam, a) * p2_value(lam, b) for lam, w in zip(pts, wts)
                )
                M[dofs[a], dofs[b]] += 2.0 * el.area * s
    return M


def oracle_load(mesh, dofmap, f, nq=12):
    verts = mesh.vertices
    b = np.zeros(dofmap.n_dofs)
    pts, wts = duffy_points(nq)
    for t in range(mesh.n_triangles):
        el = OracleElement(verts, mesh.triangles[t])
        dofs = dofmap.cell_dofs[t]
        for lam, w in zip(pts, wts):
            x = lam[0] * el.pts[0] + lam[1] * el.pts[1] + lam[2] * el.pts[2]
            fv = float(f(x[0], x[1]))
            for a in range(6):
                b[dofs[a]] += 2.0 * el.area * w * fv * p2_value(lam, a)
    return b


def oracle_integral(mesh, f, nq=12):
    verts = mesh.vertices
    pts, wts = duffy_points(nq)
    total = 0.0
    for t in range(mesh.n_triangles):
        el = OracleElement(verts, mesh.triangles[t])
        for lam, w in zip(pts, wts):
            x = lam[0] * el.pts[0] + lam[1] * el.pts[1] + lam[2] * el.pts[2]
            total += 2.0 * el.area * w * float(f(x[0], x[1]))
    return total


def oracle_consistency_defect(mesh, dofmap, v, lap_u, f, sign, nq_edge=10, nq_tri=12):
    """Galerkin-orthogonality defect of the form against an exact solution.

    For a smooth u with  Delta^2 u = f  and clamped boundary values, exact
    integration by parts gives

        sum_T (Lap u, Lap v)_T  + sign * sum_e int_e {Lap u}[dv/dn] - (f, v) = 0

    when sign = -1 and v is continuous, piecewise quadratic, and zero on the
    boundary.  Everything here is integrated with high-order quadrature,
    independently of the package assembly.
    """
    verts = mesh.vertices
    tris = mesh.triangles
    elems = [OracleElement(verts, t) for t in tris]
    pts, wts = duffy_points(nq_tri)
    total = 0.0
    for t, el in enumerate(elems):
        dofs = dofmap.cell_dofs[t]
        lap_v = sum(float(v[dofs[i]]) * el.laplacian(i) for i in range(6))
        for lam, w in zip(pts, wts):
            x = lam[0] * el.pts[0] + lam[1] * el.pts[1] + lam[2] * el.pts[2]
            vh = sum(float(v[dofs[i]]) * p2_value(lam, i) for i in range(6))
            total += 2.0 * el.area * w * (lap_u(x[0], x[1]) * lap_v - f(x[0], x[1]) * vh)

    gx, gw = gauss01(nq_edge)
    for e in range(mesh.n_edges):
        va, vb = mesh.edge_vertices[e]
        pa, pb = verts[va], verts[vb]
        L = float(np.hypot(*(pb - pa)))
        sides = [int(mesh.edge_t_minus[e])]
        if mesh.edge_t_plus[e] >= 0:
            sides.append(int(mesh.edge_t_plus[e]))
        acc = 0.0
        for qi, s in enumerate(gx):
            x = pa + s * (pb - pa)
            jump = 0.0
            for t in sides:
                el = elems[t]
                cent = verts[tris[t]].mean(axis=0)
                nrm = np.array([(pb - pa)[1], -(pb - pa)[0]]) / L
                mid = 0.5 * (pa + pb)
                if float(nrm @ (mid - cent)) < 0:
                    nrm = -nrm
                lam = el.ref_coords(x)
                g = sum(
                    float(v[dofmap.cell_dofs[t][i]]) * el.grad_phys(lam, i)
                    for i in range(6)
                )
                jump += float(g @ nrm)
            acc += gw[qi] * L * lap_u(x[0], x[1]) * jump
        total += sign * acc
    return total
