import numpy as np
import pytest
import scipy.sparse as sp

from polyfrac.assembly import Material, assemble_system
from polyfrac.contact import (OPEN, SLIP, STICK, LinearSolveError, SolverOptions, check_kkt,
                              contact_residual, face_frames, face_status, kkt_report, linear_solve,
                              residual, semismooth_newton)
from polyfrac.dofs import build_dof_map
from polyfrac.generators import generate_cartesian
from polyfrac.reconstruction import CellOperatorCache
from polyfrac.solutions import Manufactured3D

from conftest import CUBE, X0, X1_SLAB


def _slab_system(prescribed, g=0.0, n=(2, 1, 1), tags=("xmin", "xmax")):
    m = generate_cartesian(n, box=[(0, 2), (0, 1), (0, 1)], fractures=X1_SLAB)
    dofs = build_dof_map(m, tags if tags == "all" else list(tags))
    dofs.set_prescribed(prescribed)
    cache = CellOperatorCache(m, dofs)
    return assemble_system(cache, Material.constant(1.0, 1.0, m.n_cells), g)


def _manufactured_system(n=4):
    sol = Manufactured3D(mu=1.0, lam=1.0, g=1.0)
    m = generate_cartesian(n, box=CUBE, fractures=X0)
    dofs = build_dof_map(m, "all")
    dofs.set_prescribed(sol.u)
    cache = CellOperatorCache(m, dofs)
    mat = Material.constant(sol.mu, sol.lam_lame, m.n_cells)
    return assemble_system(cache, mat, sol.g, f=lambda x, cells: sol.f(x, x))


# ---------------------------------------------------------------- linear_solve

def test_linear_solve_identity():
    rhs = np.arange(5.0)
    np.testing.assert_array_equal(linear_solve(sp.identity(5), rhs), rhs)
    np.testing.assert_allclose(linear_solve(sp.identity(5), rhs, symmetric=True), rhs)


def test_linear_solve_saddle_block():
    x = linear_solve(sp.csc_matrix([[2.0, 1.0], [1.0, 0.0]]), np.array([1.0, 1.0]))
    np.testing.assert_allclose(x, [1.0, -1.0], atol=1e-14)


@pytest.mark.parametrize("symmetric", [False, True])
def test_linear_solve_dense_oracle(rng, symmetric):
    n, m = 40, 8
    G = rng.normal(size=(n, n))
    A = G @ G.T + n * np.eye(n)
    if symmetric:
        M = A
    else:
        Bm = rng.normal(size=(m, n))
        M = np.block([[A, Bm.T], [Bm, -1e-3 * np.eye(m)]])
    rhs = rng.normal(size=len(M))
    x = linear_solve(sp.csc_matrix(M), rhs, symmetric=symmetric)
    np.testing.assert_allclose(x, np.linalg.solve(M, rhs), rtol=1e-10, atol=1e-12)


def test_linear_solve_breakdown():
    with pytest.raises(LinearSolveError):
        linear_solve(sp.csc_matrix(np.zeros((3, 3))), np.ones(3))


# ---------------------------------------------------------------- projections and status

def _random_faces(rng, nF=20, d=3):
    normals = rng.normal(size=(nF, d))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return normals, rng.normal(size=(nF, d)), rng.normal(size=(nF, d)), rng.uniform(0.1, 1.0, nF)


def test_face_frames_orthonormal(rng):
    normals, *_ = _random_faces(rng)
    R = face_frames(normals)
    np.testing.assert_allclose(np.einsum("kij,klj->kil", R, R), np.broadcast_to(np.eye(3), R.shape), atol=1e-14)
    np.testing.assert_allclose(R[:, 0], normals)


def test_contact_residual_matches_brute_force(rng):
    normals, lam, jump, g = _random_faces(rng)
    bn, bt = rng.uniform(0.5, 2.0, len(g)), rng.uniform(0.5, 2.0, len(g))
    r = contact_residual(lam, jump, normals, g, bn, bt)
    for k in range(len(g)):
        n = normals[k]
        x = lam[k] + np.array([bn[k], bt[k]]) @ np.vstack([np.outer(n, n) @ jump[k],
                                                           jump[k] - np.outer(n, n) @ jump[k]])
        xn = x @ n
        xt = x - xn * n
        pt = xt if np.linalg.norm(xt) <= g[k] else g[k] * xt / np.linalg.norm(xt)
        np.testing.assert_allclose(r[k], lam[k] - (max(xn, 0.0) * n + pt), atol=1e-14)


def test_stick_state_residual_vanishes():
    normals = np.array([[1.0, 0, 0]])
    lam = np.array([[2.0, 0.3, -0.2]])  # inside the cone for g = 1
    r = contact_residual(lam, np.zeros((1, 3)), normals, np.array([1.0]), np.ones(1), np.ones(1))
    np.testing.assert_array_equal(r, 0.0)


def test_open_state_residual_forces_zero_multiplier():
    normals = np.array([[1.0, 0, 0]])
    jump = np.array([[-0.5, 0.1, 0.0]])  # opening
    r = contact_residual(np.zeros((1, 3)), jump, normals, np.array([0.0]), np.ones(1), np.ones(1))
    np.testing.assert_array_equal(r, 0.0)


def test_status_partition(rng):
    normals, lam, jump, g = _random_faces(rng, nF=200)
    b = np.ones(len(g))
    s = face_status(lam, jump, normals, g, b, b)
    assert set(np.unique(s)) <= {OPEN, STICK, SLIP}
    xn = np.einsum("ij,ij->i", lam + jump, normals)
    assert np.all((s == OPEN) == (xn <= 0))


# ---------------------------------------------------------------- check_kkt

def test_kkt_open_crack_complementarity_zero():
    out = check_kkt(np.array([[-0.3, 0.2, 0.0]]), np.zeros((1, 3)), np.array([[1.0, 0, 0]]), 0.0)
    assert out["normal_complementarity"] == 0.0
    assert out["tangential_complementarity"] == 0.0


def test_kkt_infeasible_normal_multiplier():
    out = check_kkt(np.zeros((1, 3)), np.array([[-1.0, 0, 0]]), np.array([[1.0, 0, 0]]), 0.0)
    assert out["normal_sign"] == pytest.approx(1.0)


def test_kkt_friction_bound():
    out = check_kkt(np.zeros((1, 3)), np.array([[1.0, 2.0, 0.0]]), np.array([[1.0, 0, 0]]), 1.0,
                    lam_scale=1.0)
    assert out["friction_bound"] == pytest.approx(1.0)


# ---------------------------------------------------------------- Newton

def test_residual_zero_at_open_solution():
    system = _slab_system(lambda x, h: np.column_stack([0.1 * (x[:, 0] > 1.5), 0 * x[:, 0], 0 * x[:, 0]]))
    u, lam, rep = semismooth_newton(system)
    assert rep.converged
    r_u, r_l = residual(system, u, lam)
    assert np.abs(r_l).max() < 1e-12
    assert np.linalg.norm(r_u) < 1e-10 * max(np.linalg.norm(system.A @ u), 1.0)


@pytest.mark.parametrize("method", ["condensed", "saddle"])
def test_pulling_without_friction_opens_everything(method):
    system = _slab_system(lambda x, h: np.column_stack([0.1 * (x[:, 0] > 1.5), 0 * x[:, 0], 0 * x[:, 0]]),
                          n=(2, 2, 2))
    u, lam, rep = semismooth_newton(system, SolverOptions(method=method))
    assert rep.converged
    assert np.abs(lam).max() < 1e-12
    assert rep.status_counts["open"] == system.n_faces


@pytest.mark.parametrize("method", ["condensed", "saddle"])
def test_compressive_patch_reproduces_linear_field(method):
    # uniaxial compression along the fracture normal, no shear on the fracture plane
    A = np.array([[-0.01, 0.002, 0.0], [-0.002, 0.004, 0.0], [0.0, 0.0, 0.003]])
    system = _slab_system(lambda x, h: x @ A.T, g=0.0, n=(2, 2, 2), tags="all")
    u, lam, rep = semismooth_newton(system, SolverOptions(method=method))
    assert rep.converged
    full = system.full(u)
    exact = np.zeros_like(full)
    d, nc = system.dim, system.dofs.n_classes
    exact[: d * nc] = (system.dofs.class_points() @ A.T).ravel()
    assert np.abs(full - exact).max() < 1e-10
    sym = 0.5 * (A + A.T)
    sigma = 2 * sym + np.trace(sym) * np.eye(3)
    np.testing.assert_allclose(lam, np.broadcast_to(-sigma @ [1.0, 0, 0], lam.shape), atol=1e-10)
    assert rep.status_counts["open"] == 0
    assert rep.iterations <= 3


def test_methods_agree_on_manufactured():
    system = _manufactured_system(4)
    u1, l1, r1 = semismooth_newton(system, SolverOptions(method="condensed"))
    u2, l2, r2 = semismooth_newton(system, SolverOptions(method="saddle"))
    assert r1.converged and r2.converged
    assert np.abs(u1 - u2).max() < 1e-8
    assert np.abs(l1 - l2).max() < 1e-8
    assert kkt_report(system, u1, l1)["max"] <= 1e-9


def test_beta_invariance_small():
    system = _manufactured_system(4)
    u1, l1, r1 = semismooth_newton(system, SolverOptions(beta_n=1.0, beta_t=1.0))
    default = SolverOptions().betas(system)[0]
    u2, l2, r2 = semismooth_newton(system, SolverOptions(beta_n=100 * default, beta_t=100 * default))
    assert r1.converged and r2.converged
    assert np.abs(u1 - u2).max() < 1e-8


def test_max_iter_reports_non_convergence():
    system = _manufactured_system(4)
    _, _, rep = semismooth_newton(system, SolverOptions(max_iter=1))
    assert not rep.converged
    assert rep.iterations == 1 and len(rep.history) == 1


def test_warm_start_keeps_solution():
    system = _manufactured_system(4)
    u1, l1, r1 = semismooth_newton(system)
    u2, l2, r2 = semismooth_newton(system, lam0=l1)
    assert r2.iterations <= r1.iterations
    assert np.abs(u1 - u2).max() < 1e-8


def test_invalid_options():
    system = _manufactured_system(2)
    with pytest.raises(ValueError):
        semismooth_newton(system, SolverOptions(method="cg"))
    with pytest.raises(ValueError):
        semismooth_newton(system, SolverOptions(beta_n=-1.0))
