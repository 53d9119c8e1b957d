"""Polytopal meshes conforming to a planar fracture network."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

MESH_FORMAT_VERSION = 1


class MeshError(ValueError):
    """Raised for invalid or inconsistent mesh input."""


class NonManifoldFaceError(MeshError):
    pass


class DegenerateGeometryError(MeshError):
    pass


class NonConformingFractureError(MeshError):
    pass


@dataclass(eq=False)
class PolytopalMesh:
    """Immutable polytopal mesh with optional fracture tagging.

    Face normals are stored outward of ``face_cells[f, 0]``; a cell sees the
    normal of face ``cell_faces[K][i]`` multiplied by ``cell_face_signs[K][i]``.
    For fracture faces the separate ``fracture_normal`` holds n+, the outward
    normal of the plus cell.
    """

    dim: int
    vertices: np.ndarray
    faces: list
    cell_faces: list
    cell_face_signs: list
    face_cells: np.ndarray
    face_tags: np.ndarray
    cell_vertices: list
    face_area: np.ndarray
    face_centroid: np.ndarray
    face_center: np.ndarray
    face_normal: np.ndarray
    face_diameter: np.ndarray
    face_planar: np.ndarray
    cell_volume: np.ndarray
    cell_centroid: np.ndarray
    cell_diameter: np.ndarray
    edges: np.ndarray
    fracture_faces: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    fracture_plus: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    fracture_minus: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    fracture_normal: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    fracture_component: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    fracture_planes: list = field(default_factory=list)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_cells(self) -> int:
        return len(self.cell_faces)

    @property
    def h(self) -> float:
        return float(self.cell_diameter.max())

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] < 0)

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] >= 0)

    @property
    def is_fracture_face(self) -> np.ndarray:
        flag = np.zeros(self.n_faces, dtype=bool)
        flag[self.fracture_faces] = True
        return flag

    @property
    def n_components(self) -> int:
        if len(self.fracture_component) == 0:
            return 0
        return int(self.fracture_component.max()) + 1

    def fracture_index(self) -> np.ndarray:
        """Map face id -> position in ``fracture_faces`` (-1 elsewhere)."""
        idx = np.full(self.n_faces, -1, dtype=int)
        idx[self.fracture_faces] = np.arange(len(self.fracture_faces))
        return idx

    def boundary_vertices(self, tags=None) -> np.ndarray:
        faces = self.boundary_faces
        if tags is not None:
            faces = faces[np.isin(self.face_tags[faces], list(tags))]
        if len(faces) == 0:
            return np.zeros(0, dtype=int)
        return np.unique(np.concatenate([self.faces[f] for f in faces]))

    def vertex_cells(self) -> sp.csr_matrix:
        """Boolean vertex-to-cell incidence (rows: vertices)."""
        rows = np.concatenate(self.cell_vertices)
        cols = np.repeat(np.arange(self.n_cells), [len(v) for v in self.cell_vertices])
        m = sp.csr_matrix((np.ones(len(rows), dtype=bool), (rows, cols)),
                          shape=(self.n_vertices, self.n_cells))
        m.sort_indices()
        return m

    def face_edge_geometry(self, f: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Edges of face ``f``: vertex pairs, measures |e| and in-plane normals n_{sigma e}.

        In 2D the "edges" of a segment are its end points, with measure 1 and
        normals -t (first end) and +t (second end).
        """
        verts = self.faces[f]
        x = self.vertices[verts]
        if self.dim == 2:
            t = (x[1] - x[0]) / np.linalg.norm(x[1] - x[0])
            pairs = np.array([[verts[0], verts[0]], [verts[1], verts[1]]])
            return pairs, np.ones(2), np.array([-t, t])
        nxt = np.roll(np.arange(len(verts)), -1)
        pairs = np.column_stack([verts, verts[nxt]])
        vec = x[nxt] - x
        lengths = np.linalg.norm(vec, axis=1)
        normals = np.cross(vec / lengths[:, None], self.face_normal[f])
        return pairs, lengths, normals

    def cell_normals(self, K: int) -> np.ndarray:
        return self.face_normal[self.cell_faces[K]] * self.cell_face_signs[K][:, None]

    def regularity(self) -> dict:
        """Shape-regularity metrics; nothing is enforced."""
        ratios = np.empty(self.n_cells)
        face_ratio = np.empty(self.n_cells)
        for K in range(self.n_cells):
            fs = self.cell_faces[K]
            dist = np.abs(np.einsum("ij,ij->i", self.face_centroid[fs] - self.cell_centroid[K],
                                    self.face_normal[fs]))
            ratios[K] = self.cell_diameter[K] / dist.min()
            face_ratio[K] = self.cell_diameter[K] / self.face_diameter[fs].min()
        return {
            "h": self.h,
            "max_diameter_over_inradius": float(ratios.max()),
            "max_cell_over_face_diameter": float(face_ratio.max()),
            "n_nonplanar_faces": int((~self.face_planar).sum()),
        }


def _polygon_geometry(x: np.ndarray):
    """Fan geometry of a (possibly non-planar) 3D polygon about its vertex mean."""
    c = x.mean(axis=0)
    nxt = np.roll(np.arange(len(x)), -1)
    avec = 0.5 * np.cross(x - c, x[nxt] - c)
    a = np.linalg.norm(avec, axis=1)
    area = a.sum()
    vec_area = avec.sum(axis=0)
    normal = vec_area / np.linalg.norm(vec_area)
    centroid = (a[:, None] * (c + x + x[nxt]) / 3.0).sum(axis=0) / area
    return area, centroid, c, normal


def _diameter(x: np.ndarray) -> float:
    diff = x[:, None, :] - x[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=-1).max()))


def build_connectivity(raw_cells, coords, face_tag=None, planar_tol: float = 1e-9) -> PolytopalMesh:
    """Build a mesh from per-cell face-vertex lists.

    Parameters
    ----------
    raw_cells : sequence
        ``raw_cells[K]`` is a list of faces, each a vertex-index list (cyclic in
        3D, a pair in 2D). Orientation of the input lists is irrelevant.
    coords : array_like, shape (n_vertices, d)
    face_tag : callable, optional
        ``face_tag(centroid, normal) -> str`` for boundary faces; defaults to
        ``"boundary"``.
    """
    vertices = np.asarray(coords, dtype=float)
    dim = vertices.shape[1]
    if dim not in (2, 3):
        raise MeshError(f"unsupported dimension {dim}")

    key_to_face: dict = {}
    faces: list = []
    face_cells: list = []
    cell_faces, cell_face_signs = [], []
    for K, cell in enumerate(raw_cells):
        fl, sl = [], []
        for fverts in cell:
            fverts = np.asarray(fverts, dtype=int)
            key = tuple(sorted(fverts.tolist()))
            f = key_to_face.get(key)
            if f is None:
                f = len(faces)
                key_to_face[key] = f
                faces.append(fverts)
                face_cells.append([K, -1])
            else:
                if face_cells[f][1] >= 0:
                    raise NonManifoldFaceError(f"face {key} shared by more than two cells")
                face_cells[f][1] = K
            fl.append(f)
        cell_faces.append(np.array(fl, dtype=int))
        cell_face_signs.append(np.zeros(len(fl)))
    face_cells = np.array(face_cells, dtype=int)
    nF, nK = len(faces), len(cell_faces)
    cell_vertices = [np.unique(np.concatenate([faces[f] for f in fl])) for fl in cell_faces]
    vmean = np.array([vertices[cv].mean(axis=0) for cv in cell_vertices])

    face_area = np.empty(nF)
    face_centroid = np.empty((nF, dim))
    face_center = np.empty((nF, dim))
    face_normal = np.empty((nF, dim))
    face_diameter = np.empty(nF)
    face_planar = np.ones(nF, dtype=bool)
    sizes = np.array([len(fv) for fv in faces])
    if dim == 2 and (sizes != 2).any():
        raise MeshError("2D faces must have exactly two vertices")
    groups = {int(k): np.flatnonzero(sizes == k) for k in np.unique(sizes)}
    for nv, ids in groups.items():
        fv = np.array([faces[f] for f in ids])
        X = vertices[fv]
        if dim == 2:
            t = X[:, 1] - X[:, 0]
            area = np.linalg.norm(t, axis=1)
            centroid = center = X.mean(axis=1)
            normal = np.column_stack([t[:, 1], -t[:, 0]]) / np.maximum(area, 1e-300)[:, None]
            diam = area
        else:
            center = X.mean(axis=1)
            rel = X - center[:, None]
            avec = 0.5 * np.cross(rel, np.roll(rel, -1, axis=1))
            a = np.linalg.norm(avec, axis=2)
            area = a.sum(axis=1)
            vec_area = avec.sum(axis=1)
            normal = vec_area / np.linalg.norm(vec_area, axis=1)[:, None]
            centroid = (a[..., None] * (center[:, None] + X + np.roll(X, -1, axis=1))).sum(axis=1) \
                / (3.0 * area[:, None])
            diff = X[:, :, None] - X[:, None, :]
            diam = np.sqrt((diff ** 2).sum(axis=-1).max(axis=(1, 2)))
            dev = np.abs(np.einsum("fvi,fi->fv", rel, normal)).max(axis=1)
            face_planar[ids] = dev <= planar_tol * diam
        if not (area > 0).all():
            raise DegenerateGeometryError("face with non-positive measure")
        # orient outward of the first cell
        flip = np.einsum("fi,fi->f", centroid - vmean[face_cells[ids, 0]], normal) < 0
        for k in np.flatnonzero(flip):
            faces[ids[k]] = faces[ids[k]][::-1].copy()
        normal = np.where(flip[:, None], -normal, normal)
        face_area[ids], face_centroid[ids], face_center[ids] = area, centroid, center
        face_normal[ids], face_diameter[ids] = normal, diam
    for K in range(nK):
        cell_face_signs[K] = np.where(face_cells[cell_faces[K], 0] == K, 1.0, -1.0)

    cell_volume, cell_centroid = _cell_fan_geometry(vertices, faces, cell_faces, cell_face_signs,
                                                    face_center, vmean, groups, dim)
    cell_diameter = np.empty(nK)
    nvs = np.array([len(cv) for cv in cell_vertices])
    for nv in np.unique(nvs):
        ids = np.flatnonzero(nvs == nv)
        X = vertices[np.array([cell_vertices[K] for K in ids])]
        diff = X[:, :, None] - X[:, None, :]
        cell_diameter[ids] = np.sqrt((diff ** 2).sum(axis=-1).max(axis=(1, 2)))

    tags = np.full(nF, "", dtype=object)
    for f in np.flatnonzero(face_cells[:, 1] < 0):
        tags[f] = face_tag(face_centroid[f], face_normal[f]) if face_tag else "boundary"

    if dim == 3:
        pairs = np.concatenate([np.column_stack([fv, np.roll(fv, -1)]) for fv in faces])
        edges = np.unique(np.sort(pairs, axis=1), axis=0)
    else:
        edges = np.array([np.sort(fv) for fv in faces])

    return PolytopalMesh(
        dim=dim, vertices=vertices, faces=faces, cell_faces=cell_faces,
        cell_face_signs=cell_face_signs, face_cells=face_cells, face_tags=tags,
        cell_vertices=cell_vertices, face_area=face_area, face_centroid=face_centroid,
        face_center=face_center, face_normal=face_normal, face_diameter=face_diameter,
        face_planar=face_planar, cell_volume=cell_volume, cell_centroid=cell_centroid,
        cell_diameter=cell_diameter, edges=edges,
        fracture_normal=np.zeros((0, dim)),
    )


def _cell_fan_geometry(vertices, faces, cell_faces, signs, face_center, apex, groups, dim):
    """Volumes and centroids from the fan of sub-simplices (apex, face fan triangle)."""
    nK = len(cell_faces)
    inc_cell = np.repeat(np.arange(nK), [len(fl) for fl in cell_faces])
    inc_face = np.concatenate(cell_faces)
    inc_sign = np.concatenate(signs)
    size_of = np.empty(len(faces), dtype=int)
    for nv, ids in groups.items():
        size_of[ids] = nv
    vol = np.zeros(nK)
    mom = np.zeros((nK, dim))
    for nv in groups:
        sel = size_of[inc_face] == nv
        if not sel.any():
            continue
        K, f, s = inc_cell[sel], inc_face[sel], inc_sign[sel]
        fv = np.array([faces[g] for g in f])
        X = vertices[fv]
        ap = apex[K]
        if dim == 2:
            a = np.where(s[:, None] > 0, X[:, 0], X[:, 1])
            b = np.where(s[:, None] > 0, X[:, 1], X[:, 0])
            v = 0.5 * ((a[:, 0] - ap[:, 0]) * (b[:, 1] - ap[:, 1])
                       - (a[:, 1] - ap[:, 1]) * (b[:, 0] - ap[:, 0]))
            v = v[:, None]
            cent = ((ap + a + b) / 3.0)[:, None]
        else:
            c = face_center[f][:, None]
            P, Q = X, np.roll(X, -1, axis=1)
            v = s[:, None] * np.einsum("tvi,ti->tv", np.cross(P - c, Q - c), face_center[f] - ap) / 6.0
            cent = (ap[:, None] + c + P + Q) / 4.0
        if (v <= 0).any():
            bad = K[np.flatnonzero((v <= 0).any(axis=1))[0]]
            raise DegenerateGeometryError(f"cell {bad} is degenerate or inverted")
        np.add.at(vol, K, v.sum(axis=1))
        np.add.at(mom, K, (v[..., None] * cent).sum(axis=1))
    return vol, mom / vol[:, None]


def cell_simplices(mesh: PolytopalMesh, K: int) -> np.ndarray:
    """Simplices (d+1 points each) of a conforming fan decomposition of cell K.

    Simplex cells are returned as themselves; otherwise the fan apex is the
    cell centroid and non-triangular faces are fanned about their vertex mean.
    """
    verts = mesh.cell_vertices[K]
    d = mesh.dim
    if len(verts) == d + 1:
        return mesh.vertices[verts][None]
    apex = mesh.cell_centroid[K]
    out = []
    for f in mesh.cell_faces[K]:
        fv = mesh.faces[f]
        x = mesh.vertices[fv]
        if d == 2:
            out.append([apex, x[0], x[1]])
        elif len(fv) == 3:
            out.append([apex, x[0], x[1], x[2]])
        else:
            c = mesh.face_center[f]
            for i in range(len(fv)):
                out.append([apex, c, x[i], x[(i + 1) % len(fv)]])
    return np.asarray(out)


def face_simplices(mesh: PolytopalMesh, f: int) -> np.ndarray:
    """Segments (2D) or triangles (3D) tiling face ``f``."""
    x = mesh.vertices[mesh.faces[f]]
    if mesh.dim == 2 or len(x) == 3:
        return x[None]
    c = mesh.face_center[f]
    return np.array([[c, x[i], x[(i + 1) % len(x)]] for i in range(len(x))])


# --------------------------------------------------------------------- fracture

def _reference_normal(n: np.ndarray) -> np.ndarray:
    """Deterministic orientation: first non-negligible component positive."""
    for comp in n:
        if abs(comp) > 1e-12:
            return n if comp > 0 else -n
    return n


def _on_plane(mesh, plane):
    """Boolean mask of faces lying inside a fracture plane description."""
    pts = np.asarray(plane["polygon"], dtype=float)
    d = mesh.dim
    tol = 1e-9 * max(1.0, np.abs(pts).max())
    flat = np.concatenate(mesh.faces)
    owner = np.repeat(np.arange(mesh.n_faces), [len(fv) for fv in mesh.faces])
    x = mesh.vertices[flat]
    if d == 2:
        a, b = pts
        length = np.linalg.norm(b - a)
        t = (b - a) / length
        n = np.array([t[1], -t[0]])
        measure = length
    else:
        measure, _, _, n = _polygon_geometry(pts)
    dist = np.abs((x - pts[0]) @ n)
    off = np.zeros(mesh.n_faces, dtype=bool)
    np.logical_or.at(off, owner, dist > tol)
    cand = ~off
    mask = np.zeros(mesh.n_faces, dtype=bool)
    if d == 2:
        s = (x - a) @ t
        inside = (s >= -tol) & (s <= length + tol)
    else:
        e1 = pts[1] - pts[0]
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        P = np.column_stack([(pts - pts[0]) @ e1, (pts - pts[0]) @ e2])
        sel = cand[owner]
        Q = np.column_stack([(x[sel] - pts[0]) @ e1, (x[sel] - pts[0]) @ e2])
        from matplotlib.path import Path as MplPath

        path = MplPath(P)
        inside = np.zeros(len(x), dtype=bool)
        inside[sel] = path.contains_points(Q, radius=tol) | path.contains_points(Q, radius=-tol)
    outside = np.zeros(mesh.n_faces, dtype=bool)
    np.logical_or.at(outside, owner, ~inside)
    mask = cand & ~outside
    return mask, n, measure


def tag_fracture(mesh: PolytopalMesh, fracture_planes) -> PolytopalMesh:
    """Return a copy of ``mesh`` with fracture faces, sides and components.

    Each plane is a dict with a ``polygon`` (2D: two end points; 3D: planar
    polygon vertices) and an optional ``normal`` fixing the n+ orientation.
    """
    is_frac = np.zeros(mesh.n_faces, dtype=bool)
    plane_of = np.full(mesh.n_faces, -1)
    plane_normals = []
    for i, plane in enumerate(fracture_planes):
        mask, n, measure = _on_plane(mesh, plane)
        mask &= mesh.face_cells[:, 1] >= 0
        covered = mesh.face_area[mask].sum()
        if abs(covered - measure) > 1e-8 * measure:
            raise NonConformingFractureError(
                f"fracture {i} is not a union of interior mesh faces "
                f"(covered {covered:.6g} of {measure:.6g})")
        if "normal" in plane and plane["normal"] is not None:
            n = np.asarray(plane["normal"], dtype=float)
            n /= np.linalg.norm(n)
        plane_normals.append(n)
        new = mask & ~is_frac
        plane_of[new] = i
        is_frac |= mask
    frac = np.flatnonzero(is_frac)
    nG = len(frac)

    # components: coplanar faces sharing an edge (3D) / vertex (2D)
    if nG:
        rows, cols = [], []
        owner = {}
        for k, f in enumerate(frac):
            fv = mesh.faces[f]
            if mesh.dim == 2:
                keys = [(int(v),) for v in fv]
            else:
                keys = [tuple(sorted((int(fv[i]), int(fv[(i + 1) % len(fv)])))) for i in range(len(fv))]
            for key in keys:
                for other in owner.get(key, []):
                    g = frac[other]
                    if abs(abs(np.dot(mesh.face_normal[f], mesh.face_normal[g])) - 1) < 1e-9 and \
                            abs(np.dot(mesh.face_centroid[g] - mesh.face_centroid[f], mesh.face_normal[f])) \
                            < 1e-9 * mesh.face_diameter[f]:
                        rows.append(k)
                        cols.append(other)
                owner.setdefault(key, []).append(k)
        graph = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(nG, nG))
        _, comp = connected_components(graph, directed=False)
        # renumber components in order of first face
        _, first = np.unique(comp, return_index=True)
        order = np.argsort(first)
        relabel = np.empty_like(order)
        relabel[order] = np.arange(len(order))
        comp = relabel[comp]
    else:
        comp = np.zeros(0, dtype=int)

    plus = np.empty(nG, dtype=int)
    minus = np.empty(nG, dtype=int)
    nplus = np.empty((nG, mesh.dim))
    comp_normal = {}
    for k, f in enumerate(frac):
        c = comp[k]
        if c not in comp_normal:
            pl = plane_of[f]
            ref = plane_normals[pl]
            if "normal" not in fracture_planes[pl] or fracture_planes[pl]["normal"] is None:
                ref = _reference_normal(ref)
            comp_normal[c] = ref
        ref = comp_normal[c]
        n = mesh.face_normal[f]
        if np.dot(n, ref) > 0:
            plus[k], minus[k] = mesh.face_cells[f]
        else:
            minus[k], plus[k] = mesh.face_cells[f]
        nplus[k] = n if np.dot(n, ref) > 0 else -n
    return dataclasses.replace(
        mesh, fracture_faces=frac, fracture_plus=plus, fracture_minus=minus,
        fracture_normal=nplus, fracture_component=comp,
        fracture_planes=[dict(p) for p in fracture_planes],
    )


# ------------------------------------------------------------------ side classes

@dataclass(frozen=True)
class SideClass:
    vertex: int
    representative: int
    cells: tuple
    side: str  # "plus", "minus", "none" or "mixed"


def side_class_labels(mesh: PolytopalMesh):
    """Partition every vertex star M_s into side classes.

    Returns ``(pairs, labels)`` where ``pairs`` is an (m, 2) array of
    (vertex, cell) incidences sorted by vertex then cell, and ``labels[i]``
    the class id of ``pairs[i]``. Classes are numbered by vertex id, then by
    smallest member cell.
    """
    verts = np.concatenate(mesh.cell_vertices)
    cells = np.repeat(np.arange(mesh.n_cells), [len(v) for v in mesh.cell_vertices])
    order = np.lexsort((cells, verts))
    pairs = np.column_stack([verts[order], cells[order]])
    keys = pairs[:, 0] * mesh.n_cells + pairs[:, 1]

    is_frac = mesh.is_fracture_face
    rows, cols = [], []
    for f in mesh.interior_faces:
        if is_frac[f]:
            continue
        K, L = mesh.face_cells[f]
        fv = mesh.faces[f]
        rows.append(fv * mesh.n_cells + K)
        cols.append(fv * mesh.n_cells + L)
    if rows:
        r = np.searchsorted(keys, np.concatenate(rows))
        c = np.searchsorted(keys, np.concatenate(cols))
    else:
        r = c = np.zeros(0, dtype=int)
    m = len(pairs)
    graph = sp.coo_matrix((np.ones(len(r)), (r, c)), shape=(m, m))
    _, comp = connected_components(graph, directed=False)
    # first occurrence in (vertex, cell) order gives the canonical numbering
    _, first = np.unique(comp, return_index=True)
    order = np.argsort(first)
    relabel = np.empty_like(order)
    relabel[order] = np.arange(len(order))
    return pairs, relabel[comp]


def vertex_side_classes(mesh: PolytopalMesh, vertex: int) -> list:
    """Side classes K_s of one vertex (connected components of its star)."""
    star = np.flatnonzero([vertex in cv for cv in mesh.cell_vertices]) \
        if mesh.n_cells < 64 else mesh.vertex_cells()[vertex].indices
    star = np.sort(star)
    idx = {K: i for i, K in enumerate(star)}
    is_frac = mesh.is_fracture_face
    parent = list(range(len(star)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for K in star:
        for f in mesh.cell_faces[K]:
            L = mesh.face_cells[f, 1] if mesh.face_cells[f, 0] == K else mesh.face_cells[f, 0]
            if L < 0 or L not in idx or is_frac[f] or vertex not in mesh.faces[f]:
                continue
            parent[find(idx[K])] = find(idx[L])
    groups: dict = {}
    for K in star:
        groups.setdefault(find(idx[K]), []).append(int(K))
    frac_faces_at_s = [k for k, f in enumerate(mesh.fracture_faces) if vertex in mesh.faces[f]]
    plus_s = {int(mesh.fracture_plus[k]) for k in frac_faces_at_s}
    minus_s = {int(mesh.fracture_minus[k]) for k in frac_faces_at_s}
    out = []
    for members in sorted(groups.values(), key=min):
        p = bool(plus_s.intersection(members))
        m = bool(minus_s.intersection(members))
        side = "mixed" if p and m else "plus" if p else "minus" if m else "none"
        out.append(SideClass(vertex=int(vertex), representative=min(members),
                             cells=tuple(sorted(members)), side=side))
    return out


# ------------------------------------------------------------------------- I/O

def to_json(mesh: PolytopalMesh, path) -> None:
    """Write the versioned JSON mesh document."""
    cells = [[mesh.faces[f].tolist() for f in fl] for fl in mesh.cell_faces]
    btags = [{"face": mesh.faces[f].tolist(), "tag": str(mesh.face_tags[f])}
             for f in mesh.boundary_faces]
    planes = []
    for p in mesh.fracture_planes:
        q = {"polygon": np.asarray(p["polygon"]).tolist()}
        if p.get("normal") is not None:
            q["normal"] = np.asarray(p["normal"]).tolist()
        planes.append(q)
    doc = {
        "version": MESH_FORMAT_VERSION,
        "dim": mesh.dim,
        "vertices": mesh.vertices.tolist(),
        "cells": cells,
        "fracture_planes": planes,
        "boundary_tags": btags,
    }
    Path(path).write_text(json.dumps(doc))


def from_json(path) -> PolytopalMesh:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != MESH_FORMAT_VERSION:
        raise MeshError(f"unsupported mesh format version {doc.get('version')!r}")
    vertices = np.asarray(doc["vertices"], dtype=float)
    if vertices.shape[1] != doc["dim"]:
        raise MeshError("vertex dimension does not match 'dim'")
    tag_of = {tuple(sorted(t["face"])): t["tag"] for t in doc.get("boundary_tags", [])}
    mesh = build_connectivity(doc["cells"], vertices)
    for f in mesh.boundary_faces:
        mesh.face_tags[f] = tag_of.get(tuple(sorted(mesh.faces[f].tolist())), "boundary")
    if doc.get("fracture_planes"):
        mesh = tag_fracture(mesh, doc["fracture_planes"])
    return mesh
