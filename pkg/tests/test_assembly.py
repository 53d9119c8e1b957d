import numpy as np
import pytest
import scipy.sparse as sp

from polyfrac.assembly import (Material, SingularStiffnessError, assemble_coupling, assemble_load,
                               assemble_stiffness, assemble_system, body_load, dump_coo, read_coo,
                               stiffness_full)
from polyfrac.dofs import build_dof_map
from polyfrac.generators import generate_cartesian
from polyfrac.quadrature import CellQuadrature
from polyfrac.reconstruction import CellOperatorCache
from polyfrac.solutions import Manufactured3D
from polyfrac.verification import interpolate_displacement

from conftest import CUBE, X0, linear_interpolant


def _setup(m, tags=None):
    D = build_dof_map(m, tags)
    return D, CellOperatorCache(m, D), Material.constant(1.0, 1.0, m.n_cells)


def test_stiffness_symmetric_and_translation_kernel(cube4):
    D, C, mat = _setup(cube4)
    A = stiffness_full(C, mat)
    assert abs(A - A.T).max() <= 1e-12 * abs(A).max()
    v = linear_interpolant(D, np.zeros((3, 3)), [1.0, -2.0, 0.5])
    assert np.abs(A @ v).max() < 1e-12


def test_unit_cube_energy(rng):
    m = generate_cartesian(1, box=[(0, 1)] * 3)
    D, C, mat = _setup(m)
    M = rng.normal(size=(3, 3))
    M = M + M.T
    v = linear_interpolant(D, M, 0.0)
    energy = v @ stiffness_full(C, mat) @ v
    assert energy == pytest.approx(2 * np.sum(M * M) + np.trace(M) ** 2)


def test_slab_positive_definite(slab):
    D, C, mat = _setup(slab, ["xmin", "xmax"])
    Aff, _ = assemble_stiffness(C, mat)
    assert np.linalg.eigvalsh(Aff.toarray()).min() > 0


def test_singular_without_dirichlet(slab):
    D, C, mat = _setup(slab)
    Aff, _ = assemble_stiffness(C, mat)
    assert np.linalg.eigvalsh(Aff.toarray()).min() < 1e-10
    assert issubclass(SingularStiffnessError, RuntimeError)


def test_coupling_bubble_block(cube4):
    D, C, _ = _setup(cube4)
    _, B = assemble_coupling(C)
    k = 3
    area = cube4.face_area[cube4.fracture_faces[k]]
    block = B[3 * k:3 * k + 3][:, D.bubble_block(k)].toarray()
    np.testing.assert_allclose(block, area * np.eye(3))


def test_coupling_continuous_zero_and_random(slab, rng):
    D, C, _ = _setup(slab)
    _, B = assemble_coupling(C)
    v = linear_interpolant(D, rng.normal(size=(3, 3)), rng.normal(size=3))
    np.testing.assert_allclose(B @ v, 0, atol=1e-13)
    v = rng.normal(size=D.n_total)
    f, K, L = slab.fracture_faces[0], slab.fracture_plus[0], slab.fracture_minus[0]
    hand = C.face_mean(v, K, f) - C.face_mean(v, L, f) + v[D.bubble_block(0)]
    np.testing.assert_allclose(B @ v, slab.face_area[f] * hand, atol=1e-13)


def test_body_load_constant(cube4, rng):
    D, C, _ = _setup(cube4)
    c = np.array([1.0, -2.0, 3.0])
    v = rng.normal(size=D.n_total)
    expected = np.sum(cube4.cell_volume[:, None] * c * C.cell_mean(v))
    assert body_load(C, c) @ v == pytest.approx(expected)
    assert body_load(C, lambda x, cells: np.broadcast_to(c, x.shape)) @ v == pytest.approx(expected)


def test_traction_balance():
    m = generate_cartesian(1, box=[(0, 1)] * 3)
    D, C, _ = _setup(m)
    f = assemble_load(C, tractions={"xmin": (5.0, 0, 0), "xmax": (-5.0, 0, 0)})
    np.testing.assert_allclose(f.reshape(-1, 3).sum(0), 0, atol=1e-12)
    # a constant traction on one side pairs with translations as force times area
    f = assemble_load(C, tractions={"xmax": lambda p, n: np.tile([0.0, 2.0, 0.0], (len(p), 1))})
    np.testing.assert_allclose(f.reshape(-1, 3).sum(0), [0, 2.0, 0], atol=1e-12)


def test_manufactured_load_quadrature():
    m = generate_cartesian(8, box=CUBE, fractures=X0)
    D, C, _ = _setup(m)
    sol = Manufactured3D()
    f = lambda x, cells: sol.f(x, x)
    coarse = CellQuadrature(m, 2).integrate(f(CellQuadrature(m, 2).points, None))
    fine_q = CellQuadrature(m, 5)
    fine = fine_q.integrate(f(fine_q.points, None))
    assert np.linalg.norm(coarse - fine) / np.linalg.norm(fine) <= 1e-3


def test_system_jump_offset(cube4):
    sol = Manufactured3D()
    D = build_dof_map(cube4, "all")
    D.set_prescribed(sol.u)
    C = CellOperatorCache(cube4, D)
    S = assemble_system(C, Material.constant(1, 1, cube4.n_cells), 1.0, f=lambda x, c: sol.f(x, x))
    v = interpolate_displacement(C, sol.u)
    np.testing.assert_allclose(S.jump(v[D.free]), C.face_jump(v), atol=1e-13)
    with pytest.raises(ValueError):
        assemble_system(C, Material.constant(1, 1, cube4.n_cells), -1.0)


def test_from_young_plane_strain():
    m = Material.from_young(25000.0, 0.25, 2)
    assert m.mu[0] == pytest.approx(10000.0)
    assert m.lam[0] == pytest.approx(10000.0)
    ps = Material.from_young(25000.0, 0.25, 2, plane_strain=False)
    assert ps.lam[0] == pytest.approx(2 * 10000 * 10000 / 30000)


def test_coo_roundtrip(tmp_path, slab):
    D, C, mat = _setup(slab)
    A = stiffness_full(C, mat)
    p = tmp_path / "A.txt"
    dump_coo(A, p)
    back = read_coo(p)
    assert back.shape == A.shape
    assert abs(back - A).max() == 0.0
    dump_coo(sp.csr_matrix((2, 3)), p)
    assert read_coo(p).shape == (2, 3)
