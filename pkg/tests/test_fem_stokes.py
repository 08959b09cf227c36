import math

import numpy as np
import pytest
import sympy as sym

from drifthom.closed_form import (
    J,
    AnnulusSpec,
    annulus_stokes_energy,
    brinkman_matrix,
    smooth_stokes_M,
    stokes_radius,
)
from drifthom.fem_core import QuadPoints
from drifthom.fem_stokes import (
    DriftSpec,
    TaylorHood,
    assemble_stokes,
    cell_V,
    cell_Wsharp,
    evaluate_velocity,
    gradient_energy,
    pressure_error,
    solve_brinkman,
    solve_cell_w_smooth,
    solve_perturbed,
    velocity_errors,
)
from drifthom.mesh import GradingSpec, periodic_cell, perforated_lattice, structured_square
from drifthom.scenarios import mms_stokes_f, mms_stokes_grad, mms_stokes_p, mms_stokes_u, smooth_stokes_drift

X, Y = sym.symbols("x y")


def symbolic_stokes(psi, p):
    """(u, grad u, p, f) callables for u = curl psi and -lap u + grad p = f."""
    u = [sym.diff(psi, Y), -sym.diff(psi, X)]
    f = [-(sym.diff(c, X, 2) + sym.diff(c, Y, 2)) + sym.diff(p, v) for c, v in zip(u, (X, Y))]
    grad = [[sym.diff(c, v) for v in (X, Y)] for c in u]
    lam = lambda e: sym.lambdify((X, Y), e, "numpy")
    uf, gf, pf, ff = lam(u), lam(grad), lam(p), lam(f)

    def bcast(vals, shape):
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), shape) for v in vals], axis=-1)

    def u_ex(x, y):
        return bcast(uf(x, y), np.shape(x))

    def g_ex(x, y):
        g = gf(x, y)
        return np.stack([bcast(row, np.shape(x)) for row in g], axis=-2)

    def p_ex(x, y):
        return np.broadcast_to(np.asarray(pf(x, y), dtype=float), np.shape(x))

    def f_cb(q: QuadPoints):
        return bcast(ff(q.x[:, 0], q.x[:, 1]), (len(q.x),))

    return u_ex, g_ex, p_ex, f_cb


def orders(errs):
    return [math.log2(a / b) for a, b in zip(errs, errs[1:])]


@pytest.fixture(scope="module")
def stokes_lattice():
    an = AnnulusSpec(1.0, stokes_radius(50, 0.5))
    return perforated_lattice(pitch=1.0, annulus=an, grading=GradingSpec(target_h=0.1), half_width=1.0), an


def test_taylor_hood_manufactured_orders():
    psi = X**2 * (1 - X) ** 2 * Y**2 * (1 - Y) ** 2
    u_ex, g_ex, p_ex, f = symbolic_stokes(psi, X - sym.Rational(1, 2))
    e_u, e_g, e_p = [], [], []
    for n in (8, 16, 32, 64):
        sol = solve_perturbed(structured_square(n), None, f, tol=1e-12)
        l2, h1 = velocity_errors(sol, u_ex, g_ex)
        e_u.append(l2)
        e_g.append(h1)
        e_p.append(pressure_error(sol, p_ex))
        assert sol.div_residual <= 1e-8
        assert abs(sol.pressure_mean) <= 1e-10
    assert min(orders(e_u)) >= 2.7
    assert min(orders(e_g)) >= 1.9
    assert min(orders(e_p)) >= 1.9


def test_trigonometric_source_matches_symbolic_derivation():
    s = sym.sin(sym.pi * X) ** 2 * sym.sin(sym.pi * Y) ** 2
    u_ex, g_ex, p_ex, f = symbolic_stokes(s, sym.cos(sym.pi * X) * sym.cos(sym.pi * Y))
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, (50, 2))
    q = QuadPoints(pts, pts, np.zeros(50, dtype=np.int8), np.zeros(50, dtype=np.int64))
    np.testing.assert_allclose(mms_stokes_f(q), f(q), atol=1e-10)
    np.testing.assert_allclose(mms_stokes_u(*pts.T), u_ex(*pts.T), atol=1e-12)
    np.testing.assert_allclose(mms_stokes_grad(*pts.T), g_ex(*pts.T), atol=1e-12)
    np.testing.assert_allclose(mms_stokes_p(*pts.T), p_ex(*pts.T), atol=1e-12)


def test_smooth_drift_cancels_in_energy():
    m = structured_square(12)
    system = assemble_stokes(m, drift=DriftSpec.smooth(smooth_stokes_drift(0.25, 1.5)))
    D = (system.T - system.T.T).tocsr()
    assert abs(D).max() > 1e-2
    rng = np.random.default_rng(1)
    for _ in range(3):
        u = rng.standard_normal(D.shape[0])
        assert abs(u @ (D @ u)) <= 1e-12 * (u @ u)


def test_concentrated_drift_cancels_in_energy(stokes_lattice):
    m, _ = stokes_lattice
    system = assemble_stokes(m, drift=DriftSpec.concentrated())
    D = (system.T - system.T.T).tocsr()
    u = np.random.default_rng(2).standard_normal(D.shape[0])
    assert abs(u @ (D @ u)) <= 1e-12 * (u @ u)


def test_concentrated_drift_weight_has_cell_mass(stokes_lattice):
    # each disk carries weight 1/|core| in template units, i.e. pitch^2 / 4 physical mass
    m, _ = stokes_lattice
    from drifthom.fem_stokes import concentrated_weight

    mass = float(np.sum(concentrated_weight(m) * m.areas))
    assert mass == pytest.approx(len(m.lattice.centers) * m.lattice.scale**2, rel=1e-12)


def test_concentrated_solve_energy_identity(stokes_lattice):
    m, _ = stokes_lattice
    # a constant force is a pressure gradient and drives no flow at all
    still = solve_perturbed(m, DriftSpec.concentrated(), (1.0, 0.0))
    assert np.abs(still.velocity).max() <= 1e-12
    sol = solve_perturbed(m, DriftSpec.concentrated(), lambda p: np.column_stack([np.sin(np.pi * p.x[:, 1]), 0 * p.x[:, 0]]))
    assert sol.system.energy_residual(sol) <= 1e-8
    assert sol.div_residual <= 1e-8
    assert abs(sol.pressure_mean) <= 1e-10


def test_smooth_solve_energy_identity():
    sol = solve_perturbed(structured_square(16), DriftSpec.smooth(smooth_stokes_drift(0.25)), lambda p: np.column_stack([np.sin(np.pi * p.x[:, 1]), p.x[:, 0]]))
    assert sol.system.energy_residual(sol) <= 1e-8


def test_brinkman_energy_and_plain_stokes_consistency():
    m = structured_square(12)
    f = lambda p: np.column_stack([np.sin(np.pi * p.x[:, 1]), np.cos(np.pi * p.x[:, 0])])
    sol = solve_brinkman(m, 0.25, brinkman_matrix(50.0), f)
    u = sol.stacked
    Sg = 0.5 * (brinkman_matrix(50.0) + brinkman_matrix(50.0).T)
    th = sol.system.th
    M = th.mass()
    n = th.n
    sym_mass = sum(Sg[i, j] * (u[i * n : (i + 1) * n] @ (M @ u[j * n : (j + 1) * n])) for i in range(2) for j in range(2))
    fu = float(sol.system.F @ u)
    assert abs(gradient_energy(sol) + sym_mass - fu) <= 1e-9 * abs(fu)
    a = solve_brinkman(m, 0.0, np.zeros((2, 2)), f, tol=1e-12)
    b = solve_perturbed(m, None, f, tol=1e-12)
    np.testing.assert_allclose(a.velocity, b.velocity, atol=1e-11)
    with pytest.raises(ValueError):
        solve_brinkman(m, 0.0, -np.eye(2), f)


def test_concentrated_rotation_equivariance(stokes_lattice):
    # the lattice is symmetric under a quarter turn about the centre and J commutes with rotations
    m, _ = stokes_lattice
    c = np.array([0.5, 0.5])

    def f(p):
        x = p.x - c
        return np.column_stack([np.cos(3 * x[:, 1]) + x[:, 0], x[:, 0] * x[:, 1]])

    def f_rot(p):
        back = (p.x - c) @ J  # J^T applied to each point
        q = QuadPoints(back + c, p.local, p.tag, p.triangle)
        return f(q) @ J.T

    a = solve_perturbed(m, DriftSpec.concentrated(), f)
    b = solve_perturbed(m, DriftSpec.concentrated(), f_rot)
    pts = np.random.default_rng(4).uniform(0.1, 0.9, (40, 2))
    ua = evaluate_velocity(a, (pts - c) @ J + c)
    ub = evaluate_velocity(b, pts)
    scale = np.abs(ua).max()
    np.testing.assert_allclose(ub, ua @ J.T, atol=2e-3 * scale)


def test_cell_V_symmetry_and_annulus_energy():
    r = 0.2
    mesh = periodic_cell(AnnulusSpec(1.0, r), 1.0, GradingSpec(target_h=0.05))
    v1 = cell_V(mesh, r, 1)
    v2 = cell_V(mesh, r, 2)
    assert v1.gamma_cell == pytest.approx(v2.gamma_cell, rel=1e-8)
    assert v1.gamma_cell == pytest.approx(annulus_stokes_energy(r), rel=2e-3)
    assert v1.field.div_residual <= 1e-8


def test_cell_V_l2_within_inverse_log_bound():
    # ||V||^2 <= C / |ln r|; the profile ln(1/rho) / ln(1/r) actually gives ~ 1 / ln(r)^2
    scaled = []
    for r in (0.2, 0.1, 0.05, 0.01):
        l2 = cell_V(periodic_cell(AnnulusSpec(1.0, r), 1.0, GradingSpec(target_h=0.05)), r, 1).l2_squared
        scaled.append(l2 * abs(math.log(r)))
    assert all(b < a for a, b in zip(scaled, scaled[1:]))


def test_cell_V_rejects_bad_direction():
    mesh = periodic_cell(AnnulusSpec(1.0, 0.3), 1.0, GradingSpec(target_h=0.1))
    with pytest.raises(ValueError):
        cell_V(mesh, 0.3, 3)


@pytest.mark.parametrize("lam", [(1.0, 0.0), (0.3, -2.0)])
def test_wsharp_energy_equals_forcing_pairing(lam):
    eps = 0.5
    r = stokes_radius(50, eps)
    mesh = periodic_cell(AnnulusSpec(1.0, r), 1.0, GradingSpec(target_h=0.08))
    res = cell_Wsharp(mesh, eps, r, lam)
    assert abs(res.energy - res.forcing_pairing) <= 1e-8 * abs(res.forcing_pairing)
    assert res.M_quadratic == pytest.approx(0.25 * float((J @ res.Wbar) @ np.asarray(lam)), rel=1e-14)
    th = res.field.system.th
    mean = th.velocity_integrals @ res.field.velocity
    assert np.abs(mean).max() <= 1e-10


def test_w_smooth_recovers_fourier_matrix():
    a = 1.3
    mesh = structured_square(16, (-1.0, -1.0), (1.0, 1.0), periodic=True)

    def v(p):
        out = np.zeros_like(p.x)
        out[:, 0] = a * np.cos(np.pi * p.x[:, 1])
        return out

    _, M2 = solve_cell_w_smooth(mesh, v, (0.0, 1.0))
    _, M1 = solve_cell_w_smooth(mesh, v, (1.0, 0.0))
    _, M2x2 = solve_cell_w_smooth(mesh, v, (0.0, 2.0))
    expected = smooth_stokes_M(a)
    np.testing.assert_allclose(M2, expected[:, 1], atol=2e-3 * a * a)
    np.testing.assert_allclose(M1, expected[:, 0], atol=1e-10)
    np.testing.assert_allclose(M2x2, 2 * M2, rtol=1e-9, atol=1e-12)


def test_w_smooth_converges_under_refinement():
    a = 1.0
    errs = []
    for n in (8, 16, 32):
        mesh = structured_square(n, (-1.0, -1.0), (1.0, 1.0), periodic=True)
        _, M = solve_cell_w_smooth(mesh, lambda p: np.column_stack([a * np.cos(np.pi * p.x[:, 1]), 0 * p.x[:, 0]]), (0.0, 1.0))
        errs.append(abs(M[1] - 0.5))
    assert errs[2] < errs[1] < errs[0]


def test_taylor_hood_periodic_mesh_pairs():
    mesh = periodic_cell(AnnulusSpec(1.0, 0.3), 1.0, GradingSpec(target_h=0.1))
    th = TaylorHood(mesh)
    assert th.n == mesh.n_vertices + len(mesh.edges)
