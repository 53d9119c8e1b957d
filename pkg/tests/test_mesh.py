import numpy as np
import pytest

from polyfrac.generators import generate_cartesian, generate_perturbed_hexa, generate_tet
from polyfrac.mesh import (DegenerateGeometryError, NonConformingFractureError, NonManifoldFaceError,
                           build_connectivity, from_json, side_class_labels, tag_fracture, to_json,
                           vertex_side_classes)

from conftest import CUBE, X0

UNIT_CUBE_V = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=float)
UNIT_CUBE_F = [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [2, 3, 7, 6], [1, 2, 6, 5], [0, 4, 7, 3]]


def closed_surface_residual(mesh, K):
    s = np.zeros(mesh.dim)
    for f, sg in zip(mesh.cell_faces[K], mesh.cell_face_signs[K]):
        s += sg * mesh.face_area[f] * mesh.face_normal[f]
    return np.abs(s).max()


def test_unit_cube_geometry():
    m = build_connectivity([UNIT_CUBE_F], UNIT_CUBE_V)
    assert m.n_cells == 1 and m.n_faces == 6
    assert m.cell_volume[0] == pytest.approx(1.0)
    assert m.cell_diameter[0] == pytest.approx(np.sqrt(3))
    np.testing.assert_allclose(m.cell_centroid[0], [0.5, 0.5, 0.5])
    assert closed_surface_residual(m, 0) < 1e-12


def test_unit_square_2d():
    v = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    m = build_connectivity([[[0, 1], [1, 2], [2, 3], [3, 0]]], v)
    assert m.cell_volume[0] == pytest.approx(1.0)
    np.testing.assert_allclose(m.face_area, 1.0)
    assert closed_surface_residual(m, 0) < 1e-12


def test_two_by_one_grid():
    m = generate_cartesian((2, 1, 1), box=[(0, 2), (0, 1), (0, 1)])
    assert len(m.interior_faces) == 1
    np.testing.assert_allclose(m.cell_volume, 1.0)


def test_non_manifold_face_rejected():
    shifted = [[[v for v in f] for f in UNIT_CUBE_F]] * 3
    with pytest.raises(NonManifoldFaceError):
        build_connectivity(shifted, UNIT_CUBE_V)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_degenerate_cell_rejected():
    flat = UNIT_CUBE_V.copy()
    flat[:, 2] = 0.0
    with pytest.raises(DegenerateGeometryError):
        build_connectivity([UNIT_CUBE_F], flat)


def test_edge_normals_close(family_mesh):
    m = family_mesh
    for f in range(0, m.n_faces, 7):
        if not m.face_planar[f]:
            continue
        _, lengths, normals = m.face_edge_geometry(f)
        assert np.abs((lengths[:, None] * normals).sum(0)).max() < 1e-12 * max(m.face_diameter[f], 1.0)


def test_generated_meshes_closed_and_positive(family_mesh):
    m = family_mesh
    assert np.all(m.cell_volume > 0) and np.all(m.face_area > 0)
    planar_cells = [K for K in range(m.n_cells) if all(m.face_planar[f] for f in m.cell_faces[K])]
    assert max((closed_surface_residual(m, K) for K in planar_cells), default=0.0) < 1e-12
    # fracture faces stay planar and are interior
    assert np.all(m.face_planar[m.fracture_faces])
    assert np.all(m.face_cells[m.fracture_faces, 1] >= 0)


def test_fracture_plus_side_normal(family_mesh):
    m = family_mesh
    for k, f in enumerate(m.fracture_faces):
        K = m.fracture_plus[k]
        i = list(m.cell_faces[K]).index(f)
        n_K = m.cell_face_signs[K][i] * m.face_normal[f]
        assert n_K @ m.fracture_normal[k] == pytest.approx(1.0)


def test_slab_fracture(slab):
    assert len(slab.fracture_faces) == 1
    K = slab.fracture_plus[0]
    np.testing.assert_allclose(slab.fracture_normal[0], [1, 0, 0])
    assert slab.cell_centroid[K, 0] < 1.0  # outward +x from the left cell


def test_cube4_fracture_count(cube4):
    assert len(cube4.fracture_faces) == 16
    assert cube4.n_components == 1


def test_cross_network_two_components():
    planes = X0 + [{"polygon": [[-1, 0, -1], [1, 0, -1], [1, 0, 1], [-1, 0, 1]]}]
    m = generate_cartesian(4, box=CUBE, fractures=planes)
    assert m.n_components == 2
    assert len(m.fracture_faces) == 32


def test_non_conforming_fracture():
    m = generate_cartesian(3, box=CUBE)
    with pytest.raises(NonConformingFractureError):
        tag_fracture(m, X0)


def test_vertex_side_classes(cube4):
    m = cube4
    centre = int(np.argmin(np.linalg.norm(m.vertices, axis=1)))
    classes = vertex_side_classes(m, centre)
    assert sorted(c.side for c in classes) == ["minus", "plus"]
    away = int(np.argmin(np.linalg.norm(m.vertices - [0.5, 0.5, 0.5], axis=1)))
    classes = vertex_side_classes(m, away)
    assert len(classes) == 1 and classes[0].side == "none"
    assert len(classes[0].cells) == 8


def test_immersed_tip_single_class():
    # 2D: fracture ends at an interior vertex, which keeps a single class
    m = generate_cartesian((4, 4), box=[(0, 4), (0, 4)], fractures=[{"polygon": [[0, 2], [2, 2]]}])
    tip = int(np.argmin(np.linalg.norm(m.vertices - [2, 2], axis=1)))
    inner = int(np.argmin(np.linalg.norm(m.vertices - [1, 2], axis=1)))
    assert len(vertex_side_classes(m, tip)) == 1
    assert len(vertex_side_classes(m, inner)) == 2


def _flood_fill_classes(m):
    """Brute force: count classes by walking every star."""
    return sum(len(vertex_side_classes(m, s)) for s in range(m.n_vertices))


def test_duplicated_vertices_cube4(cube4):
    m = cube4
    _, labels = side_class_labels(m)
    n_classes = labels.max() + 1
    assert n_classes == _flood_fill_classes(m)
    on_plane = np.isclose(m.vertices[:, 0], 0.0).sum()  # all of Γ̄, the fracture is not immersed
    assert n_classes - m.n_vertices == on_plane


def test_side_classes_orientation_independent(cube4):
    flipped = tag_fracture(cube4, [dict(X0[0], normal=[-1, 0, 0])])
    a = side_class_labels(cube4)[1]
    b = side_class_labels(flipped)[1]
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(flipped.fracture_plus, cube4.fracture_minus)


def test_cartesian_count():
    assert generate_cartesian(8, box=CUBE).n_cells == 512


def test_perturbed_cut_faces():
    m = generate_perturbed_hexa(4, box=CUBE, repair="cut", seed=1, fractures=X0)
    sizes = {len(f) for f in m.faces}
    assert sizes <= {3, 4}
    assert np.all(m.face_planar)
    # fracture nodes move only within the plane x = 0
    for f in m.fracture_faces:
        np.testing.assert_allclose(m.vertices[m.faces[f], 0], 0.0, atol=1e-14)
    assert m.face_area[m.fracture_faces].sum() == pytest.approx(4.0)
    np.testing.assert_allclose(np.abs(m.fracture_normal[:, 0]), 1.0)


def test_perturbed_bary_nonplanar():
    m = generate_perturbed_hexa(4, box=CUBE, repair="bary", seed=1, fractures=X0)
    assert not np.all(m.face_planar)
    assert np.all(m.face_planar[m.fracture_faces])
    for f in np.flatnonzero(~m.face_planar)[:5]:
        np.testing.assert_allclose(m.face_center[f], m.vertices[m.faces[f]].mean(0))


def test_zero_amplitude_matches_cartesian():
    a = generate_perturbed_hexa(3, box=CUBE, amplitude=0.0, repair="bary")
    b = generate_cartesian(3, box=CUBE)
    np.testing.assert_allclose(np.sort(a.cell_volume), np.sort(b.cell_volume))
    np.testing.assert_allclose(a.vertices, b.vertices)


def test_tet_conforming():
    m = generate_tet(2, box=CUBE, fractures=X0)
    assert m.n_cells == 48
    assert {len(f) for f in m.faces} == {3}
    assert len(m.fracture_faces) == 8


def test_json_roundtrip(tmp_path, cube4):
    p = tmp_path / "m.json"
    to_json(cube4, p)
    m = from_json(p)
    np.testing.assert_allclose(m.vertices, cube4.vertices)
    np.testing.assert_array_equal(m.fracture_faces, cube4.fracture_faces)
    np.testing.assert_allclose(m.cell_volume, cube4.cell_volume)
    np.testing.assert_array_equal(m.face_tags, cube4.face_tags)


def test_regularity_metrics(cube4):
    r = cube4.regularity()
    assert all(np.isfinite(v) for v in r.values())
