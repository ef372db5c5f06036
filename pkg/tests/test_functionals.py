import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_interior
from varexp.assembly import assemble_mass, assemble_stiffness, quad_weights
from varexp.exponents import ExponentField
from varexp.functionals import (ConstantsBundle, compute_constants, energy, h01_norm, lambda1,
                                lambda1_analytic, luxemburg_gradient, luxemburg_norm, modular)
from varexp.mesh import Rect, build_mesh
from varexp.quadrature import default_rule

FLOOR_P = ExponentField.floor_form(0.2, 2.5)


def classical_lp(mesh, w, p):
    vals = w[mesh.triangles] @ default_rule().points.T
    return float(np.sum(quad_weights(mesh) * np.abs(vals) ** p)) ** (1 / p)


@pytest.mark.parametrize("p", [2.0, 2.5, 3.7, 6.1])
def test_constant_exponent_is_classical(backend, mesh16, p):
    w = random_interior(mesh16, np.random.default_rng(int(10 * p)))
    got = luxemburg_norm(mesh16, ExponentField.constant(p), w)
    assert got == pytest.approx(classical_lp(mesh16, w, p), rel=1e-8)


def test_gradient_norm_constant_exponent(mesh16):
    w = random_interior(mesh16, np.random.default_rng(1))
    g = np.einsum("tkd,tk->td", mesh16.grads, w[mesh16.triangles])
    ref = float(np.sum(mesh16.areas * np.hypot(g[:, 0], g[:, 1]) ** 3)) ** (1 / 3)
    assert luxemburg_norm(mesh16, ExponentField.constant(3.0), w, True) == pytest.approx(ref, rel=1e-8)


def test_l2_norm_matches_mass(mesh16):
    w = random_interior(mesh16, np.random.default_rng(2))
    M = assemble_mass(mesh16)
    assert luxemburg_norm(mesh16, ExponentField.constant(2.0), w) == pytest.approx(
        math.sqrt(w @ M @ w), rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(1e-3, 1e3), st.booleans())
def test_homogeneity_and_unit_ball(mesh6, seed, c, grad):
    rng = np.random.default_rng(seed)
    w = random_interior(mesh6, rng, 10 ** rng.uniform(-2, 2))
    r = ExponentField.linear_x(3.0, 0.8)
    n = luxemburg_norm(mesh6, r, w, grad)
    assert luxemburg_norm(mesh6, r, c * w, grad) == pytest.approx(c * n, rel=1e-8)
    assert luxemburg_norm(mesh6, r, -w, grad) == pytest.approx(n, rel=1e-12)
    assert modular(mesh6, r, w / n, grad) == pytest.approx(1.0, abs=1e-8)
    # unit ball: norm <= 1 exactly when the modular is <= 1
    assert (modular(mesh6, r, w, grad) <= 1.0) == (n <= 1.0 + 1e-9)


def test_zero_field(mesh6):
    assert luxemburg_norm(mesh6, FLOOR_P, np.zeros(mesh6.n_vertices)) == 0.0


def test_luxemburg_gradient_finite_difference(mesh6):
    w = random_interior(mesh6, np.random.default_rng(5), 0.5)
    for grad in (False, True):
        lam = luxemburg_norm(mesh6, FLOOR_P, w, grad, tol=1e-14)
        g = luxemburg_gradient(mesh6, FLOOR_P, w, lam, grad)
        h = 1e-6
        for i in mesh6.interior_nodes[:8]:
            e = np.zeros_like(w)
            e[i] = h
            fd = (luxemburg_norm(mesh6, FLOOR_P, w + e, grad, tol=1e-14)
                  - luxemburg_norm(mesh6, FLOOR_P, w - e, grad, tol=1e-14)) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_h01_norm_of_linear(square):
    m = build_mesh(square, 4, 4)
    M, K = assemble_mass(m), assemble_stiffness(m)
    u = m.interpolate(lambda x, y: x + 0 * y)
    assert h01_norm(m, M, K, u) == pytest.approx(math.sqrt(4 / 3 + 4), rel=1e-12)


def test_lambda1_from_above(square):
    exact = lambda1_analytic(square)
    assert exact == pytest.approx(math.pi ** 2 / 2)
    vals = []
    for n in (8, 16, 32):
        m = build_mesh(square, n, n)
        vals.append(lambda1(m, assemble_mass(m), assemble_stiffness(m)))
    assert all(v > exact for v in vals)
    assert vals[0] > vals[1] > vals[2]


def test_energy_of_zero_and_scaling(mesh6):
    q = ExponentField.constant(6.0)
    e = energy(mesh6, FLOOR_P, q, np.zeros(mesh6.n_vertices))
    assert e.E == 0.0
    # |u| = 1 everywhere in the interior: ln-term vanishes there
    u = np.ones(mesh6.n_vertices)
    e1 = energy(mesh6, ExponentField.constant(2.0), q, u)
    assert e1.gradient_term == pytest.approx(0.0, abs=1e-14)
    assert e1.log_term == pytest.approx(0.0, abs=1e-14)
    assert e1.q2_term == pytest.approx(4.0 / 36, rel=1e-12)


def sample_bundle(**kw):
    args = dict(p_bounds=(2.5, 2.7), q_bounds=(6.0, 6.1), sigma=0.1, area=4.0,
                lambda1=math.pi ** 2 / 2, B_sigma=0.6, C1=6.7, C2=6.8)
    args.update(kw)
    return compute_constants(args.pop("p_bounds"), args.pop("q_bounds"), args.pop("sigma"), **args)


def test_constant_A_reference():
    c = sample_bundle()
    lam = math.pi ** 2 / 2
    assert c.A == pytest.approx(4 ** (-0.25) * (lam / (2 * (lam + 1))) ** 1.25, rel=1e-14)
    assert c.A == pytest.approx(0.23606, abs=1e-5)


def test_bundle_derived_quantities():
    c = sample_bundle(B_sigma=0.5)
    assert c.B1 == 1.0
    assert c.E1 == pytest.approx((1 / 2.7 - 1 / 6.1) * c.alpha1)
    m1 = (c.A / (2 * c.B)) ** (1 / (6.0 - 2.5 + 0.1))
    m2 = (c.A / (2 * c.C)) ** (1 / (6.1 - 2.5 + 0.1))
    assert c.M == min(m1, m2)
    assert sample_bundle(B_sigma=2.0).B1 == 2.0


def test_bundle_rejects_bad_gap():
    with pytest.raises(ValueError):
        sample_bundle(p_bounds=(2.5, 7.0))


def test_modular_of_linear(square):
    m = build_mesh(square, 4, 4)
    w = m.interpolate(lambda x, y: x + 0 * y)
    two = ExponentField.constant(2.0)
    assert modular(m, two, np.zeros(m.n_vertices)) == 0.0
    assert modular(m, two, w) == pytest.approx(4 / 3, rel=1e-13)
    assert modular(m, two, w, use_gradient=True) == pytest.approx(4.0, rel=1e-13)


def test_luxemburg_unit_modular_reference(square):
    m = build_mesh(square, 50, 50)
    w = m.interpolate(lambda x, y: 0.25 * np.exp(-x * x - y * y))
    tol = 1e-10
    for grad in (False, True):
        lam = luxemburg_norm(m, FLOOR_P, w, grad, tol=tol)
        assert abs(modular(m, FLOOR_P, w / lam, grad) - 1) <= 10 * tol * FLOOR_P.bounds(m)[1]


def test_h01_reference_datum(square):
    m = build_mesh(square, 50, 50)
    M, K = assemble_mass(m), assemble_stiffness(m)
    assert h01_norm(m, M, K, np.zeros(m.n_vertices)) == 0.0
    w = m.interpolate(lambda x, y: 0.25 * np.exp(-x * x - y * y))
    assert h01_norm(m, M, K, w) == pytest.approx(0.477344, rel=5e-3)


def test_log_term_sign(mesh16):
    w = random_interior(mesh16, np.random.default_rng(9))
    w /= np.abs(w).max()
    assert energy(mesh16, FLOOR_P, ExponentField.floor_form(0.1, 6.0), w).log_term <= 0.0


def test_energy_against_oracle_rule(square):
    from varexp.quadrature import oracle_rule
    m = build_mesh(square, 50, 50)
    q = ExponentField.floor_form(0.1, 6.0)
    w = m.interpolate(lambda x, y: 0.25 * np.exp(-x * x - y * y))
    w[m.boundary_mask] = 0.0
    a, b = energy(m, FLOOR_P, q, w), energy(m, FLOOR_P, q, w, oracle_rule())
    assert a.E == pytest.approx(b.E, rel=1e-4)
    assert a.log_term == pytest.approx(b.log_term, rel=1e-4)


def test_g_and_h_shapes():
    from varexp.functionals import g_eval, h_eval
    c = sample_bundle(B_sigma=0.5)
    assert g_eval(0.0, c) == 0.0 and h_eval(0.0, c) == 0.0
    xi = np.linspace(0, min(1.0, c.B1 ** (-c.p2)), 50)
    np.testing.assert_allclose(g_eval(xi, c), h_eval(xi, c), rtol=1e-13, atol=1e-300)
    assert g_eval(1e3, c) < 0
    left = np.linspace(1e-6, c.alpha1, 200)
    right = np.linspace(c.alpha1, 20 * c.alpha1, 200)
    assert np.all(np.diff(h_eval(left, c)) > 0)
    assert np.all(np.diff(h_eval(right, c)) < 0)


def test_bundle_E1_ratio_and_A_reference():
    c = sample_bundle(B_sigma=0.9)
    assert c.B1 == 1.0
    assert c.E1 / c.alpha1 == pytest.approx(1 / c.p2 - 1 / (c.q1 + c.sigma), rel=1e-15)
    assert c.A == pytest.approx(0.23608, abs=5e-5)


def test_lambda1_unit_square_and_ordering(square):
    unit = Rect(0, 1, 0, 1)
    assert lambda1_analytic(unit) == pytest.approx(2 * math.pi ** 2)
    m = build_mesh(unit, 32, 32)
    assert lambda1(m, assemble_mass(m), assemble_stiffness(m)) == pytest.approx(2 * math.pi ** 2, rel=5e-3)
    vals = []
    for n in (10, 50):
        mm = build_mesh(square, n, n)
        vals.append(lambda1(mm, assemble_mass(mm), assemble_stiffness(mm)))
    assert vals[0] >= vals[1] >= math.pi ** 2 / 2
