import csv
import math

import numpy as np
import pytest
from scipy.special import factorial

from lcfrisk.errors import MeshError, MeshIOError
from lcfrisk.fem import (
    KINDS,
    BoundaryConditions,
    assemble_and_solve,
    centrifugal_force,
    gauss_cube,
    gauss_square,
    gauss_tetrahedron,
    gauss_triangle,
    load_mesh,
    promote_quadratic,
    refine,
    save_mesh,
    stress_at_quadrature,
    surface_integral,
    surface_quadrature,
    write_stress_csv,
)
from lcfrisk.fem.meshgen import box_mesh, facet_area, structured
from lcfrisk.fem.post import ones_field
from lcfrisk.fem.solver import element_stiffness
from lcfrisk.material import ElasticParams

EL = ElasticParams.from_young_poisson(200e3, 0.3)
G = 600.0


def roller_bar_bc(g=G):
    return BoundaryConditions({"x0": (0,), "y0": (1,), "z0": (2,)}, {"x1": np.array([g, 0.0, 0.0])})


def distorted_box(kind, divisions=(2, 2, 2), L=(4.0, 1.0, 1.0)):
    # interior nodes moved, faces stay planar
    def mapping(u):
        b = 0.08 * np.prod(np.sin(np.pi * u), axis=1)
        return (u + b[:, None] * np.array([1.0, -0.7, 0.5])) * np.asarray(L)

    return structured(kind, divisions, mapping)


# -- quadrature --------------------------------------------------------------------
@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_triangle_rule_exact(n):
    r = gauss_triangle(n)
    for a in range(2 * n):
        for b in range(2 * n - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            got = np.sum(r.weights * r.points[:, 0] ** a * r.points[:, 1] ** b)
            assert got == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_tetrahedron_rule_exact(n):
    r = gauss_tetrahedron(n)
    x, y, z = r.points.T
    for a in range(2 * n):
        for b in range(2 * n - a):
            for c in range(2 * n - a - b):
                exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)
                assert np.sum(r.weights * x**a * y**b * z**c) == pytest.approx(exact, rel=1e-13)


def test_tensor_rules_exact():
    sq, cu = gauss_square(3), gauss_cube(2)
    f = sq.points[:, 0] ** 5 * sq.points[:, 1] ** 4
    ref_sum = sq.weights.sum()
    # reference square [-1, 1]^2 or [0, 1]^2: compare against 1-D moments
    lo = sq.points.min()
    if lo < 0:
        assert ref_sum == pytest.approx(4.0)
        assert np.sum(sq.weights * f) == pytest.approx(0.0, abs=1e-15)
        assert np.sum(cu.weights * cu.points[:, 2] ** 2) == pytest.approx(8 / 3, rel=1e-14)
    else:
        assert ref_sum == pytest.approx(1.0)
        assert np.sum(sq.weights * f) == pytest.approx(1 / 30, rel=1e-14)
        assert np.sum(cu.weights * cu.points[:, 2] ** 2) == pytest.approx(1 / 3, rel=1e-14)


# -- elements ----------------------------------------------------------------------
@pytest.mark.parametrize("name", sorted(KINDS))
def test_shape_functions(name, rng):
    k = KINDS[name]
    N = k.shape(k.ref_nodes)
    np.testing.assert_allclose(N, np.eye(k.n_nodes), atol=1e-13)
    xi = k.volume_rule.points
    np.testing.assert_allclose(k.shape(xi).sum(axis=1), 1.0, atol=1e-13)
    np.testing.assert_allclose(k.shape_grad(xi).sum(axis=1), 0.0, atol=1e-12)


@pytest.mark.parametrize("name", sorted(KINDS))
def test_element_stiffness_rigid_modes(name):
    k = KINDS[name]
    X = k.ref_nodes * np.array([1.3, 0.8, 1.1]) + 0.05 * np.sin(k.ref_nodes[:, ::-1] * 3)
    Ke = element_stiffness(X[None], k, EL.lam, EL.mu)[0]
    np.testing.assert_allclose(Ke, Ke.T, rtol=1e-12, atol=1e-9 * np.abs(Ke).max())
    ev = np.linalg.eigvalsh(Ke)
    zero = np.sum(np.abs(ev) < 1e-9 * ev.max())
    # reduced 2x2x2 integration leaves six extra modes on an isolated hex20
    assert zero == (12 if name == "hex20" else 6)
    assert ev.min() > -1e-9 * ev.max()


def test_hex20_reduced_modes_do_not_survive_assembly():
    mesh = box_mesh("hex20", (2, 2, 2))
    bc = BoundaryConditions({"x0": (0, 1, 2)}, {"x1": [1.0, 0.0, 0.0]})
    u = assemble_and_solve(mesh, EL, bc)
    K = u.system.K.toarray()
    free = ~u.fixed.ravel()
    ev = np.linalg.eigvalsh(K[np.ix_(free, free)])
    assert ev.min() > 1e-8 * ev.max()


def test_tet4_stiffness_closed_form():
    X = np.array([[0, 0, 0], [2.0, 0, 0], [0, 1.0, 0], [0.3, 0.2, 1.5]])
    Ke = element_stiffness(X[None], KINDS["tet4"], EL.lam, EL.mu)[0]
    T = np.column_stack([X[1] - X[0], X[2] - X[0], X[3] - X[0]])
    V = np.linalg.det(T) / 6
    grads = np.vstack([-np.ones(3), np.eye(3)]) @ np.linalg.inv(T)
    B = np.zeros((6, 12))
    for a, (gx, gy, gz) in enumerate(grads):
        B[:, 3 * a: 3 * a + 3] = [[gx, 0, 0], [0, gy, 0], [0, 0, gz], [0, gz, gy], [gz, 0, gx], [gy, gx, 0]]
    lam, mu = EL.lam, EL.mu
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[np.arange(3), np.arange(3)] += 2 * mu
    D[3:, 3:] = mu * np.eye(3)
    np.testing.assert_allclose(Ke, V * B.T @ D @ B, rtol=1e-12, atol=1e-6)


# -- patch test --------------------------------------------------------------------
@pytest.mark.parametrize("name", sorted(KINDS))
@pytest.mark.parametrize("method", ["direct", "cg"])
def test_patch_test(name, method):
    mesh = distorted_box(name)
    u = assemble_and_solve(mesh, EL, roller_bar_bc(), method=method)
    s = stress_at_quadrature(u).values
    exact = np.zeros((3, 3))
    exact[0, 0] = G
    assert np.max(np.abs(s - exact)) <= 1e-8 * G
    eps = G / EL.E
    ux = u.values[:, 0]
    np.testing.assert_allclose(ux, eps * mesh.nodes[:, 0], atol=1e-9 * eps * 4)
    np.testing.assert_allclose(u.values[:, 1], -EL.nu * eps * mesh.nodes[:, 1], atol=1e-9 * eps * 4)
    assert u.residual <= 1e-10


def test_energy_matches_work():
    mesh = box_mesh("hex8", (4, 1, 1), (4.0, 1.0, 1.0))
    u = assemble_and_solve(mesh, EL, roller_bar_bc())
    # U = sigma^2 V / (2E)
    assert u.energy() == pytest.approx(G**2 * 4.0 / (2 * EL.E), rel=1e-10)


@pytest.mark.parametrize("name", ["hex8", "tet10"])
def test_body_force_reactions_balance(name):
    f = np.array([3.0, -1.0, 0.5])
    mesh = box_mesh(name, (2, 1, 1), (4.0, 1.0, 1.0))
    bc = BoundaryConditions({"x0": (0, 1, 2)}, {}, f)
    u = assemble_and_solve(mesh, EL, bc)
    r = (u.system.K @ u.values.ravel() - u.load).reshape(-1, 3)
    # support reactions carry the whole body load; free dofs are in equilibrium
    np.testing.assert_allclose(r.sum(axis=0), -f * mesh.volume(), rtol=1e-10)
    np.testing.assert_allclose(r[~u.fixed], 0.0, atol=1e-10 * np.abs(f).max())


def test_centrifugal_force():
    fn = centrifugal_force(7.8e-9, rpm=60.0)
    x = np.array([[1.0, 0.0, 5.0], [0.0, 2.0, -1.0]])
    w2 = (2 * math.pi) ** 2
    np.testing.assert_allclose(fn(x), 7.8e-9 * w2 * np.array([[1.0, 0, 0], [0, 2.0, 0]]), rtol=1e-14)


def test_bc_errors():
    mesh = box_mesh("tet4", (1, 1, 1))
    with pytest.raises(MeshError, match="unknown"):
        BoundaryConditions({"nope": (0,)}).check(mesh)
    with pytest.raises(MeshError, match="empty"):
        BoundaryConditions({}, {"x1": [1.0, 0, 0]}).check(mesh)


# -- surfaces ----------------------------------------------------------------------
@pytest.mark.parametrize("name", sorted(KINDS))
def test_box_surface_area(name):
    mesh = box_mesh(name, (2, 1, 1), (4.0, 1.0, 1.0))
    assert surface_integral(ones_field(mesh)) == pytest.approx(18.0, rel=1e-13)


def test_ball_area_matches_facet_area(data_dir):
    mesh = load_mesh(data_dir / "ball_tet4.msh")
    assert ones_field(mesh).area == pytest.approx(facet_area(mesh), rel=1e-13)


def test_normals_point_outward():
    mesh = box_mesh("hex8", (2, 2, 2))
    sq = surface_quadrature(mesh)
    c = np.array([0.5, 0.5, 0.5])
    assert np.all(np.einsum("fqi,fqi->fq", sq.normals, sq.points - c) > 0)


# -- mesh handling -----------------------------------------------------------------
def test_save_load_round_trip(tmp_path):
    mesh = distorted_box("tet10")
    save_mesh(mesh, tmp_path / "m.msh", comment="test")
    back = load_mesh(tmp_path / "m.msh")
    assert np.array_equal(back.nodes, mesh.nodes)
    assert np.array_equal(back.elements, mesh.elements)
    assert back.face_tags == mesh.face_tags


def test_load_reports_line(tmp_path, data_dir):
    lines = (data_dir / "unit_cube_tet4.msh").read_text().splitlines()
    k = next(i for i, l in enumerate(lines) if l.startswith("NODES")) + 2
    lines[k] = "0.0 zero 0.0"
    p = tmp_path / "bad.msh"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(MeshIOError) as exc:
        load_mesh(p)
    assert exc.value.line == k + 1


def test_missing_file():
    with pytest.raises(MeshIOError):
        load_mesh("/nonexistent/mesh.msh")


def test_inverted_element_rejected():
    mesh = box_mesh("tet4", (1, 1, 1))
    nodes = mesh.nodes.copy()
    nodes[:, 2] *= -1
    with pytest.raises(MeshError, match="inverted"):
        mesh.with_nodes(nodes).validate()


@pytest.mark.parametrize("name", ["tet4", "hex8"])
def test_refine(name, data_dir):
    mesh = load_mesh(data_dir / f"notched_bar_{name}.msh") if name == "tet4" else box_mesh(name, (2, 1, 1))
    fine = refine(mesh)
    assert fine.n_elements == 8 * mesh.n_elements
    assert fine.volume() == pytest.approx(mesh.volume(), rel=1e-12)
    assert set(fine.tags()) == set(mesh.tags())
    assert ones_field(fine).area == pytest.approx(facet_area(fine), rel=1e-12)


def test_promote_quadratic_keeps_geometry():
    mesh = box_mesh("tet4", (2, 2, 1))
    q = promote_quadratic(mesh)
    assert q.kind.name == "tet10"
    assert q.volume() == pytest.approx(mesh.volume(), rel=1e-13)


def test_stress_csv(tmp_path):
    mesh = box_mesh("hex8", (1, 1, 1))
    u = assemble_and_solve(mesh, EL, roller_bar_bc())
    st = stress_at_quadrature(u)
    write_stress_csv(st, tmp_path / "s.csv", {"vm": st.values[..., 0, 0]})
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0][:2] == ["face", "qp"] and rows[0][-1] == "vm"
    assert len(rows) == 1 + st.values.shape[0] * st.values.shape[1]
    assert float(rows[1][6]) == pytest.approx(G, rel=1e-10)
