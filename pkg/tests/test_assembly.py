import numpy as np
import pytest
import scipy.sparse as sp

from conftest import random_interior
from varexp.assembly import (SolverError, apply_dirichlet, assemble_logsource, assemble_mass,
                             assemble_mass_quadrature, assemble_plaplacian, assemble_stiffness,
                             cg_solve, log_kernel, zero_boundary)
from varexp.exponents import ExponentField
from varexp.functionals import energy
from varexp.mesh import Rect, build_mesh, mesh_from_arrays
from varexp.quadrature import collapsed_gauss, default_rule, strang_fix_6


def dense_p1(mesh):
    """Element-by-element dense mass and stiffness, written out longhand."""
    n = mesh.n_vertices
    M, K = np.zeros((n, n)), np.zeros((n, n))
    for t, tri in enumerate(mesh.triangles):
        (x0, y0), (x1, y1), (x2, y2) = mesh.vertices[tri]
        area = 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
        b = np.array([y1 - y2, y2 - y0, y0 - y1]) / (2 * area)
        c = np.array([x2 - x1, x0 - x2, x1 - x0]) / (2 * area)
        for a in range(3):
            for d in range(3):
                M[tri[a], tri[d]] += area / 12 * (2 if a == d else 1)
                K[tri[a], tri[d]] += area * (b[a] * b[d] + c[a] * c[d])
    return M, K


def test_matrices_match_dense_oracle():
    m = build_mesh(Rect(0, 2, -1, 0.5), 3, 4)
    Md, Kd = dense_p1(m)
    np.testing.assert_allclose(assemble_mass(m).toarray(), Md, atol=1e-15)
    np.testing.assert_allclose(assemble_stiffness(m).toarray(), Kd, atol=1e-13)


def test_matrix_identities(mesh6):
    M, K = assemble_mass(mesh6), assemble_stiffness(mesh6)
    one = np.ones(mesh6.n_vertices)
    assert one @ M @ one == pytest.approx(4.0, rel=1e-14)
    np.testing.assert_allclose(K @ one, 0, atol=1e-12)
    u = mesh6.interpolate(lambda x, y: 3 * x + y)
    assert u @ K @ u == pytest.approx(10 * 4.0, rel=1e-13)
    assert abs(M - M.T).max() == 0 and abs(K - K.T).max() < 1e-15


def test_mass_by_quadrature(mesh6):
    np.testing.assert_allclose(assemble_mass_quadrature(mesh6, strang_fix_6()).toarray(),
                               assemble_mass(mesh6).toarray(), atol=1e-15)


def test_p2_reduction_is_stiffness(backend, mesh6):
    u = random_interior(mesh6, np.random.default_rng(3))
    got = assemble_plaplacian(mesh6, ExponentField.constant(2.0), u)
    np.testing.assert_allclose(got, assemble_stiffness(mesh6) @ u, atol=1e-12, rtol=0)


def test_zero_state(backend, mesh6):
    z = np.zeros(mesh6.n_vertices)
    p, q = ExponentField.constant(2.5), ExponentField.constant(6.0)
    assert not assemble_plaplacian(mesh6, p, z).any()
    assert not assemble_logsource(mesh6, q, z).any()
    # p == 2 at zero gradient still gives K u = 0
    assert not assemble_plaplacian(mesh6, ExponentField.constant(2.0), z).any()


def _gateaux(func, u, h=1e-6):
    out = np.empty_like(u)
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = h
        out[i] = (func(u + e) - func(u - e)) / (2 * h)
    return out


@pytest.mark.parametrize("pq", ["floor", "linear"])
def test_plaplacian_is_energy_derivative(backend, mesh6, pq):
    if pq == "floor":
        p, q = ExponentField.floor_form(0.2, 2.5), ExponentField.floor_form(0.1, 6.0)
    else:
        p, q = ExponentField.linear_x(2.6, 0.3), ExponentField.linear_x(6.0, 0.5)
    u = mesh6.interpolate(lambda x, y: 0.7 * np.cos(x + 0.3) * (1 - y * y)) + 0.2
    fd = _gateaux(lambda v: energy(mesh6, p, q, v).gradient_term, u)
    vec = assemble_plaplacian(mesh6, p, u)
    assert np.abs(vec - fd).max() <= 1e-5 * np.abs(vec).max()


@pytest.mark.parametrize("q", [ExponentField.floor_form(0.1, 6.0), ExponentField.constant(3.0)],
                         ids=["floor-q", "q=3"])
def test_logsource_is_potential_derivative(backend, mesh6, q):
    p = ExponentField.constant(2.5)
    u = mesh6.interpolate(lambda x, y: 1.3 * np.exp(-x * x - 2 * y * y) - 0.4)

    def potential(v):
        e = energy(mesh6, p, q, v)
        return e.log_term - e.q2_term

    fd = _gateaux(potential, u)
    vec = assemble_logsource(mesh6, q, u)
    assert np.abs(vec - fd).max() <= 1e-5 * np.abs(vec).max()


def test_logsource_oracle_quadrature(mesh16):
    q = ExponentField.floor_form(0.1, 6.0)
    u = mesh16.interpolate(lambda x, y: 0.9 * np.exp(-x * x - y * y))
    ref = assemble_logsource(mesh16, q, u, collapsed_gauss(6))
    got = assemble_logsource(mesh16, q, u)
    assert np.abs(got - ref).max() <= 1e-4 * np.abs(ref).max()


def test_log_kernel_values():
    np.testing.assert_allclose(log_kernel([0.0, 1.0, np.e, -np.e], 3.0),
                               [0.0, 0.0, np.e ** 2, -np.e ** 2], atol=1e-14)


def test_backends_agree(mesh16):
    from varexp import _kernels
    p, q = ExponentField.floor_form(0.2, 2.5), ExponentField.linear_x(6, 0.2)
    u = random_interior(mesh16, np.random.default_rng(11), 0.3)
    outs = []
    for name in _kernels.available_backends():
        prev = _kernels.set_backend(name)
        outs.append((assemble_plaplacian(mesh16, p, u), assemble_logsource(mesh16, q, u)))
        _kernels.set_backend(prev)
    for a, b in outs[1:]:
        np.testing.assert_allclose(a, outs[0][0], rtol=1e-13, atol=1e-17)
        np.testing.assert_allclose(b, outs[0][1], rtol=1e-13, atol=1e-17)


def test_threads_do_not_change_results(monkeypatch, square):
    m = build_mesh(square, 70, 70)  # > one 4096-element block
    p = ExponentField.floor_form(0.2, 2.5)
    u = random_interior(m, np.random.default_rng(0))
    monkeypatch.setenv("VAREXP_THREADS", "1")
    a = assemble_plaplacian(m, p, u)
    monkeypatch.setenv("VAREXP_THREADS", "4")
    b = assemble_plaplacian(m, p, u)
    assert np.array_equal(a, b)


def test_dirichlet_and_cg(backend, mesh16):
    M, K = assemble_mass(mesh16), assemble_stiffness(mesh16)
    rhs = M @ np.ones(mesh16.n_vertices)
    A, b = apply_dirichlet(M + K, rhs, mesh16)
    assert abs(A - A.T).max() == 0
    x = cg_solve(A, b, tol=1e-12)
    assert not x[mesh16.boundary_mask].any()
    inner = mesh16.interior_nodes
    dense = np.linalg.solve((M + K).toarray()[np.ix_(inner, inner)], rhs[inner])
    np.testing.assert_allclose(x[inner], dense, rtol=1e-9)


def test_cg_failure_raises(mesh16):
    A, b = apply_dirichlet(assemble_stiffness(mesh16), np.ones(mesh16.n_vertices), mesh16)
    with pytest.raises(SolverError) as err:
        cg_solve(A, b, tol=1e-14, maxiter=2)
    assert err.value.iterations == 2


def test_cg_zero_rhs(mesh6):
    A, b = apply_dirichlet(assemble_mass(mesh6), np.zeros(mesh6.n_vertices), mesh6)
    assert not cg_solve(A, b).any()


def test_dirichlet_dimension_check(mesh6):
    with pytest.raises(ValueError):
        apply_dirichlet(sp.eye(3).tocsr(), np.zeros(3), mesh6)


def test_two_triangle_mesh():
    m = mesh_from_arrays([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]])
    Md, Kd = dense_p1(m)
    np.testing.assert_allclose(assemble_stiffness(m).toarray(), Kd, atol=1e-15)
    assert zero_boundary(m, np.ones(4)).sum() == 4  # default mask: all interior


def test_reference_element_matrices():
    m = mesh_from_arrays([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    Mref = assemble_mass(m).toarray()
    np.testing.assert_allclose(np.diag(Mref), 0.5 / 6)
    np.testing.assert_allclose(Mref[0, 1:], 0.5 / 12)
    np.testing.assert_allclose(assemble_stiffness(m).toarray(),
                               0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]]), atol=1e-15)


def test_mass_against_oracle_rule(square):
    from varexp.quadrature import oracle_rule
    m = build_mesh(square, 2, 2)
    np.testing.assert_allclose(assemble_mass_quadrature(m, oracle_rule()).toarray(),
                               assemble_mass(m).toarray(), atol=1e-15)


def test_plaplacian_constant_state(backend, mesh6):
    u = np.full(mesh6.n_vertices, 0.7)
    assert not assemble_plaplacian(mesh6, ExponentField.floor_form(0.2, 2.5), u).any()


def test_plaplacian_single_triangle_hat(backend):
    m = mesh_from_arrays([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    got = assemble_plaplacian(m, ExponentField.constant(3.0), np.array([1.0, 0.0, 0.0]))
    # |grad u| = sqrt 2, area 1/2, grad u . grad phi_i = (2, -1, -1)
    np.testing.assert_allclose(got, np.sqrt(2) * 0.5 * np.array([2.0, -1.0, -1.0]), rtol=1e-14)


def test_log_kernel_q6():
    assert log_kernel(np.e, 6.0) == pytest.approx(np.e ** 5, rel=1e-14)
    assert log_kernel(1.0, 6.0) == 0.0 and log_kernel(0.0, 6.0) == 0.0


def test_dirichlet_all_boundary():
    m = build_mesh(Rect(0, 1, 0, 1), 1, 1)
    A, b = apply_dirichlet(assemble_mass(m) + assemble_stiffness(m), np.ones(4), m)
    np.testing.assert_array_equal(A.toarray(), np.eye(4))
    assert not b.any()


def test_constrained_system_spd(mesh16):
    from scipy.sparse.linalg import eigsh
    A, _ = apply_dirichlet(assemble_mass(mesh16) + assemble_stiffness(mesh16),
                           np.zeros(mesh16.n_vertices), mesh16)
    inner = mesh16.interior_nodes
    lo = eigsh(A[inner][:, inner], k=1, which="SA", return_eigenvectors=False)[0]
    assert lo > 0


def test_cg_consistency_and_dense_oracle(backend, square):
    m = build_mesh(square, 10, 10)
    A, _ = apply_dirichlet(assemble_mass(m) + assemble_stiffness(m), np.zeros(m.n_vertices), m)
    x0 = random_interior(m, np.random.default_rng(4))
    np.testing.assert_allclose(cg_solve(A, A @ x0, tol=1e-12), x0, rtol=1e-9, atol=1e-10)
    b = zero_boundary(m, np.random.default_rng(5).standard_normal(m.n_vertices))
    np.testing.assert_allclose(cg_solve(A, b, tol=1e-12), np.linalg.solve(A.toarray(), b), atol=1e-8)
