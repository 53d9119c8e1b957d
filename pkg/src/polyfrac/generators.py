"""Mesh families used by the studies."""

from __future__ import annotations

import itertools

import numpy as np

from .mesh import DegenerateGeometryError, PolytopalMesh, build_connectivity, tag_fracture

_AXES = "xyz"


def _box_tagger(box):
    box = np.asarray(box, dtype=float)
    scale = np.abs(box).max()

    def tag(centroid, normal):
        for a in range(len(box)):
            if abs(centroid[a] - box[a, 0]) < 1e-10 * scale and abs(normal[a]) > 0.5:
                return _AXES[a] + "min"
            if abs(centroid[a] - box[a, 1]) < 1e-10 * scale and abs(normal[a]) > 0.5:
                return _AXES[a] + "max"
        return "boundary"

    return tag


def _grid_points(n, box):
    axes = [np.linspace(lo, hi, k + 1) for (lo, hi), k in zip(box, n)]
    grids = np.meshgrid(*axes, indexing="ij")
    # vertex id = i + (nx+1) * (j + (ny+1) * k)
    return np.column_stack([g.ravel(order="F") for g in grids])


def _normalise(n, box, dim):
    if box is None:
        box = [(0.0, 1.0)] * dim
    if np.isscalar(n):
        n = (int(n),) * len(box)
    return tuple(int(k) for k in n), [tuple(map(float, b)) for b in box]


def _hex_faces(ids):
    """Six quadrilateral faces of a hexahedron given its 8 corner ids [a][b][c]."""
    v = lambda a, b, c: ids[a][b][c]  # noqa: E731
    return [
        [v(0, 0, 0), v(0, 1, 0), v(0, 1, 1), v(0, 0, 1)],
        [v(1, 0, 0), v(1, 0, 1), v(1, 1, 1), v(1, 1, 0)],
        [v(0, 0, 0), v(0, 0, 1), v(1, 0, 1), v(1, 0, 0)],
        [v(0, 1, 0), v(1, 1, 0), v(1, 1, 1), v(0, 1, 1)],
        [v(0, 0, 0), v(1, 0, 0), v(1, 1, 0), v(0, 1, 0)],
        [v(0, 0, 1), v(0, 1, 1), v(1, 1, 1), v(1, 0, 1)],
    ]


def _corner_ids(n, i, j, k=None):
    nx, ny = n[0] + 1, n[1] + 1
    if k is None:
        return [[i + a + nx * (j + b) for b in (0, 1)] for a in (0, 1)]
    return [[[i + a + nx * (j + b + ny * (k + c)) for c in (0, 1)] for b in (0, 1)] for a in (0, 1)]


def _cartesian_raw(n, box):
    if len(n) == 2:
        cells = []
        for j in range(n[1]):
            for i in range(n[0]):
                c = _corner_ids(n, i, j)
                loop = [c[0][0], c[1][0], c[1][1], c[0][1]]
                cells.append([[loop[m], loop[(m + 1) % 4]] for m in range(4)])
        return cells
    cells = []
    for k in range(n[2]):
        for j in range(n[1]):
            for i in range(n[0]):
                cells.append(_hex_faces(_corner_ids(n, i, j, k)))
    return cells


def generate_cartesian(n, box=None, fractures=None) -> PolytopalMesh:
    """Uniform Cartesian grid of squares (2D) or hexahedra (3D)."""
    dim = len(box) if box is not None else (2 if not np.isscalar(n) and len(n) == 2 else 3)
    n, box = _normalise(n, box, dim)
    pts = _grid_points(n, box)
    mesh = build_connectivity(_cartesian_raw(n, box), pts, face_tag=_box_tagger(box))
    return tag_fracture(mesh, fractures) if fractures else mesh


def generate_tet(n, box=None, fractures=None) -> PolytopalMesh:
    """Kuhn subdivision of each Cartesian cube into 6 tetrahedra.

    All cubes share the same main diagonal direction, so shared square faces
    are cut along the same diagonal from both sides.
    """
    n, box = _normalise(n, box, 3)
    pts = _grid_points(n, box)
    cells = []
    for k in range(n[2]):
        for j in range(n[1]):
            for i in range(n[0]):
                c = _corner_ids(n, i, j, k)
                for perm in itertools.permutations(range(3)):
                    step = [0, 0, 0]
                    path = [c[0][0][0]]
                    for axis in perm:
                        step[axis] = 1
                        path.append(c[step[0]][step[1]][step[2]])
                    cells.append([list(t) for t in itertools.combinations(path, 3)])
    mesh = build_connectivity(cells, pts, face_tag=_box_tagger(box))
    return tag_fracture(mesh, fractures) if fractures else mesh


def _pinned_axes(x, box, planes, tol):
    """Per-coordinate mask of components that must not move."""
    pinned = np.zeros(x.shape, dtype=bool)
    for a, (lo, hi) in enumerate(box):
        pinned[:, a] |= (np.abs(x[:, a] - lo) < tol) | (np.abs(x[:, a] - hi) < tol)
    for axis, value in planes:
        pinned[:, axis] |= np.abs(x[:, axis] - value) < tol
    return pinned


def generate_perturbed_hexa(n, box=None, amplitude=0.2, repair="cut", seed=0,
                            fracture_axes=None, fractures=None) -> PolytopalMesh:
    """Randomly perturbed Cartesian hexahedra.

    Each node moves by ``amplitude * cell width`` times a uniform sample in
    [-1, 1] per coordinate, except along the normals of the box faces and of the
    axis-aligned planes in ``fracture_axes`` (pairs ``(axis, value)``), so that
    boundary and fracture faces stay planar. Non-planar quadrilaterals are
    either cut into two triangles (``repair="cut"``) or kept and handled by the
    barycentric gradient (``repair="bary"``).
    """
    n, box = _normalise(n, box, 3)
    if repair not in ("cut", "bary"):
        raise ValueError(f"unknown repair mode {repair!r}")
    width = np.array([(hi - lo) / k for (lo, hi), k in zip(box, n)])
    if not 0 <= amplitude < 0.5:
        raise ValueError("amplitude must lie in [0, 0.5)")
    if fracture_axes is None:
        fracture_axes = []
        for p in fractures or []:
            poly = np.asarray(p["polygon"], dtype=float)
            for a in range(3):
                if np.ptp(poly[:, a]) == 0:
                    fracture_axes.append((a, float(poly[0, a])))
    pts = _grid_points(n, box)
    rng = np.random.default_rng(seed)
    delta = rng.uniform(-1.0, 1.0, size=pts.shape) * amplitude * width
    delta[_pinned_axes(pts, box, fracture_axes, 1e-12 * np.abs(box).max())] = 0.0
    pts = pts + delta

    raw = _cartesian_raw(n, box)
    if repair == "cut" and amplitude > 0:
        cut_raw = []
        for cell in raw:
            faces = []
            for fv in cell:
                x = pts[fv]
                normal = np.cross(x[2] - x[0], x[3] - x[1])
                normal /= np.linalg.norm(normal)
                if np.abs((x - x.mean(axis=0)) @ normal).max() <= 1e-9 * width.max():
                    faces.append(fv)
                    continue
                # diagonal through the smallest vertex id, same from both cells
                r = int(np.argmin(fv))
                loop = fv[r:] + fv[:r]
                faces.append([loop[0], loop[1], loop[2]])
                faces.append([loop[0], loop[2], loop[3]])
            cut_raw.append(faces)
        raw = cut_raw
    try:
        mesh = build_connectivity(raw, pts, face_tag=_box_tagger(box))
    except DegenerateGeometryError as exc:
        raise DegenerateGeometryError(f"perturbation inverted a cell: {exc}") from exc
    return tag_fracture(mesh, fractures) if fractures else mesh


# ---------------------------------------------------------------- 2D triangles

def _triangles_to_mesh(points, tris, box, fractures):
    raw = [[[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]] for t in tris]
    mesh = build_connectivity(raw, points, face_tag=_box_tagger(box))
    return tag_fracture(mesh, fractures) if fractures else mesh


def generate_inclined_fracture_mesh(n_fracture_faces=100, half_length=1.0, angle=np.pi / 9,
                                    width=320.0, min_angle=33.0, near_size=None):
    """Conforming triangulation of a square with a centred inclined fracture.

    The fracture segment is split into ``n_fracture_faces`` equal faces and
    enforced as a constraint of a quality Delaunay triangulation, so element
    sizes grade from the fracture to the outer boundary. The midpoints of the
    four sides are mesh vertices (used for rigid-mode point constraints).
    Returns ``(mesh, markers)`` where ``markers`` maps ``"top_mid"`` etc. to
    vertex ids.
    """
    import triangle

    L = width / 2.0
    t = np.array([np.cos(angle), np.sin(angle)])
    a, b = -half_length * t, half_length * t
    s = np.linspace(0.0, 1.0, n_fracture_faces + 1)
    frac_pts = a + s[:, None] * (b - a)
    corners = np.array([[-L, -L], [0, -L], [L, -L], [L, 0], [L, L], [0, L], [-L, L], [-L, 0]])
    pts = np.vstack([corners, frac_pts])
    segs = [[i, (i + 1) % 8] for i in range(8)]
    segs += [[8 + i, 9 + i] for i in range(n_fracture_faces)]
    h = 2 * half_length / n_fracture_faces
    near = near_size if near_size is not None else 2.0 * half_length
    # refinement box around the fracture keeps the near field resolved
    box = np.array([[-near, -near], [near, -near], [near, near], [-near, near]])
    base = len(pts)
    pts = np.vstack([pts, box])
    segs += [[base + i, base + (i + 1) % 4] for i in range(4)]
    regions = [[0.0, 0.9 * near, 1, 4.0 * h * h], [0.9 * L, 0.9 * L, 2, 0.0]]
    out = triangle.triangulate(
        {"vertices": pts, "segments": np.array(segs), "regions": np.array(regions)},
        f"pq{min_angle:g}aA",
    )
    verts = out["vertices"]
    mesh = _triangles_to_mesh(verts, out["triangles"], [(-L, L), (-L, L)],
                              [{"polygon": [a, b], "normal": [-t[1], t[0]]}])
    markers = {}
    for name, p in {"bottom_mid": (0, -L), "right_mid": (L, 0), "top_mid": (0, L),
                    "left_mid": (-L, 0)}.items():
        markers[name] = int(np.argmin(np.linalg.norm(verts - np.asarray(p), axis=1)))
    return mesh, markers


def refine_triangles(mesh: PolytopalMesh, box) -> PolytopalMesh:
    """Uniform red refinement (each triangle into four) of a 2D triangle mesh."""
    if mesh.dim != 2:
        raise ValueError("refine_triangles expects a 2D mesh")
    verts = list(map(tuple, mesh.vertices))
    mid = {}

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in mid:
            mid[key] = len(verts)
            verts.append(tuple(0.5 * (mesh.vertices[i] + mesh.vertices[j])))
        return mid[key]

    tris = []
    for K in range(mesh.n_cells):
        loop = _cell_loop(mesh, K)
        if len(loop) != 3:
            raise ValueError("refine_triangles only handles triangles")
        p, q, r = loop
        pq, qr, rp = midpoint(p, q), midpoint(q, r), midpoint(r, p)
        tris += [[p, pq, rp], [pq, q, qr], [rp, qr, r], [pq, qr, rp]]
    planes = mesh.fracture_planes or None
    return _triangles_to_mesh(np.array(verts), np.array(tris), box, planes)


def _cell_loop(mesh, K):
    """Counter-clockwise vertex loop of a 2D cell."""
    succ = {}
    for f, s in zip(mesh.cell_faces[K], mesh.cell_face_signs[K]):
        a, b = mesh.faces[f]
        if s < 0:
            a, b = b, a
        succ[a] = b
    start = next(iter(succ))
    loop = [start]
    while succ[loop[-1]] != start:
        loop.append(succ[loop[-1]])
    return loop


def cell_loop(mesh: PolytopalMesh, K: int) -> list:
    return _cell_loop(mesh, K)
