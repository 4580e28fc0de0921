import numpy as np
import pytest
import scipy.sparse.linalg as sla
import sympy as sym
from hypothesis import given, strategies as st

from schrobpx.fem import (assemble, default_bc, error_norms, free_dofs, interpolate,
                          manufactured)
from schrobpx.mesh import Mesh, build_hierarchy, check_nested, refine, unit_mesh


def test_1d_hierarchy_counts():
    H = build_hierarchy(1, 2, 1)
    interior = [len(free_dofs(m, default_bc(1))) for m in H.levels]
    assert interior == [1, 3]
    np.testing.assert_allclose(H.h, [0.5, 0.25])


def test_2d_initial_mesh():
    m = unit_mesh(2, 2)
    assert (m.n_cells, m.n_vertices) == (8, 9)


def test_level_two_counts():
    m = build_hierarchy(2, 2, 2)[2]
    assert (m.n_cells, m.n_vertices) == (128, 81)


@pytest.mark.parametrize("d", [0, 3])
def test_rejects_dimension(d):
    with pytest.raises(ValueError):
        build_hierarchy(d, 2, 1)


@given(d=st.sampled_from([1, 2]), J=st.integers(0, 3), n0=st.integers(1, 3))
def test_hierarchy_invariants(d, J, n0):
    H = build_hierarchy(d, n0, J)
    np.testing.assert_allclose(H.h, H.h0 * 2.0 ** -np.arange(J + 1), rtol=0, atol=0)
    for c, f in zip(H.levels, H.levels[1:]):
        check_nested(c, f)
        # inherited vertices keep their coordinates
        same = f.parents[:, 0] == f.parents[:, 1]
        np.testing.assert_array_equal(f.vertices[same], c.vertices[f.parents[same, 0]])
        assert same.sum() == c.n_vertices
    for m in H.levels:
        P = m.vertices[m.cells]
        if d == 1:
            size = np.abs(P[:, 1, 0] - P[:, 0, 0])
        else:
            e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
            size = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        np.testing.assert_allclose(size, size[0], rtol=1e-12)


def test_non_nested_pair_rejected():
    a, b = unit_mesh(2, 2), unit_mesh(2, 4)
    with pytest.raises(ValueError):
        check_nested(a, Mesh(b.vertices, b.cells, b.h, np.zeros((b.n_vertices, 2), int)))


def test_1d_stiffness_is_scaled_tridiagonal():
    m = build_hierarchy(1, 2, 2)[2]
    h = m.h
    A = assemble(manufactured("zero", 1), m).A.toarray()
    n = A.shape[0]
    ref = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h
    np.testing.assert_allclose(A, ref, atol=1e-12)


def test_zero_data_gives_zero_solution():
    pr = assemble(manufactured("zero", 1), build_hierarchy(1, 2, 3)[3])
    assert np.all(pr.b == 0)
    np.testing.assert_array_equal(sla.spsolve(pr.A.tocsc(), pr.b), 0)


def test_trig_log_source_is_minus_laplacian():
    x, y = sym.symbols("x y")
    u = sym.sin(2 * x + sym.Rational(1, 2)) * sym.cos(y + sym.Rational(3, 10)) + sym.log(1 + x * y)
    f = sym.simplify(-(sym.diff(u, x, 2) + sym.diff(u, y, 2)))
    ex = manufactured("trig_log")
    pts = np.random.default_rng(3).uniform(0, 1, (20, 2))
    ref = np.array([float(f.subs({x: a, y: b})) for a, b in pts])
    np.testing.assert_allclose(ex.f(pts), ref, rtol=1e-12)
    gx, gy = sym.diff(u, x), sym.diff(u, y)
    g = np.array([[float(gx.subs({x: a, y: b})), float(gy.subs({x: a, y: b}))] for a, b in pts])
    np.testing.assert_allclose(ex.grad(pts), g, rtol=1e-12)


@pytest.mark.parametrize("d", [1, 2])
def test_stiffness_spd(d):
    for m in build_hierarchy(d, 2, 3).levels:
        A = assemble(manufactured("sine", d), m).A
        assert (A != A.T).nnz == 0
        assert np.linalg.eigvalsh(A.toarray())[0] > 0
        n_T = m.vertex_degree().max() + 1
        assert np.diff(A.indptr).max() <= n_T


def test_linear_solution_reproduced():
    ex = manufactured("linear", 2)
    bc = {f: "dirichlet" for f in ("x0", "x1", "y0", "y1")}
    m = build_hierarchy(2, 2, 2)[2]
    pr = assemble(ex, m, bc)
    u = pr.lift(sla.spsolve(pr.A.tocsc(), pr.b))
    np.testing.assert_allclose(u, interpolate(ex, m), atol=1e-10)
    e = error_norms(interpolate(ex, m), ex, m)
    assert e["L2"] < 1e-12 and e["H1"] < 1e-12


def test_linear_with_neumann_face():
    ex = manufactured("linear", 2)
    m = build_hierarchy(2, 2, 2)[2]
    pr = assemble(ex, m)
    u = pr.lift(sla.spsolve(pr.A.tocsc(), pr.b))
    np.testing.assert_allclose(u, interpolate(ex, m), atol=1e-10)


def test_cell_reordering_invariance(rng):
    m = build_hierarchy(2, 2, 2)[2]
    perm = rng.permutation(m.n_cells)
    shuffled = Mesh(m.vertices, m.cells[perm], m.h, m.parents)
    ex = manufactured("trig_log")
    A1, A2 = assemble(ex, m).A, assemble(ex, shuffled).A
    assert abs(A1 - A2).max() <= 1e-14


def test_untagged_face_rejected():
    m = build_hierarchy(2, 2, 0)[0]
    with pytest.raises(ValueError, match="untagged"):
        assemble(manufactured("trig_log"), m, {"x0": "dirichlet", "x1": "neumann", "y0": "dirichlet"})


def test_zero_area_cell_rejected():
    m = unit_mesh(2, 1)
    bad = Mesh(m.vertices, np.array([[0, 1, 1], [0, 3, 2]]), m.h)
    with pytest.raises(ValueError):
        assemble(manufactured("zero", 2), bad)


def test_interpolation_error_rates():
    ex = manufactured("trig_log")
    errs = [error_norms(interpolate(ex, m), ex, m) for m in build_hierarchy(2, 2, 4).levels[1:]]
    l2 = [e["L2"] for e in errs]
    h1 = [e["H1"] for e in errs]
    assert np.all(np.log2(np.divide(l2[:-1], l2[1:])) > 1.8)
    assert np.all(np.abs(np.log2(np.divide(h1[:-1], h1[1:])) - 1) < 0.2)


def test_direct_solve_rates():
    ex = manufactured("trig_log")
    l2, h1 = [], []
    for m in build_hierarchy(2, 2, 4).levels[1:]:
        pr = assemble(ex, m)
        e = error_norms(pr.lift(sla.spsolve(pr.A.tocsc(), pr.b)), ex, m)
        l2.append(e["L2"])
        h1.append(e["H1"])
    o2, o1 = np.log2(np.divide(l2[:-1], l2[1:])), np.log2(np.divide(h1[:-1], h1[1:]))
    assert np.all((o2 >= 1.8) & (o2 <= 2.2)) and np.all((o1 >= 0.8) & (o1 <= 1.2))


def test_error_norms_shape_check():
    m = unit_mesh(2, 2)
    with pytest.raises(ValueError):
        error_norms(np.zeros(3), manufactured("zero", 2), m)


def test_refine_keeps_1d_order():
    m = refine(refine(unit_mesh(1, 2)))
    assert np.all(np.diff(m.vertices[:, 0]) > 0)
