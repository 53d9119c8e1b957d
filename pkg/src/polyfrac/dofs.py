"""Displacement DOF map (side classes plus one-sided bubbles) and multiplier helpers.

Scalar "entities" are numbered side classes first, then one bubble per fracture
face. The vector DOF of component ``a`` on entity ``e`` has index ``d*e + a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import PolytopalMesh, side_class_labels


class DofMap:
    """Side-dependent nodal DOFs, bubble DOFs and Dirichlet elimination.

    Parameters
    ----------
    mesh:
        Fracture-tagged mesh.
    dirichlet_tags:
        Boundary tags whose vertices are fully prescribed. ``"all"`` selects
        every boundary face, ``None`` or an empty list none.
    point_constraints:
        Iterable of ``(vertex, component)`` pairs fixed individually (used to
        remove rigid modes in pure traction problems).
    """

    def __init__(self, mesh: PolytopalMesh, dirichlet_tags=None, point_constraints=()):
        self.mesh = mesh
        d = self.dim = mesh.dim
        pairs, labels = side_class_labels(mesh)
        self._pair_keys = pairs[:, 0] * mesh.n_cells + pairs[:, 1]
        self._pair_labels = labels
        self.n_classes = int(labels.max()) + 1 if len(labels) else 0
        first = np.unique(labels, return_index=True)[1]
        self.class_vertex = pairs[first, 0]
        self.class_representative = pairs[first, 1]
        self._pair_cells = pairs[:, 1]
        self.n_bubbles = len(mesh.fracture_faces)
        self.n_entities = self.n_classes + self.n_bubbles
        self.n_total = d * self.n_entities
        # side label per class relative to the fracture
        side = np.full(self.n_classes, "none", dtype=object)
        if self.n_bubbles:
            on_plus = np.zeros(mesh.n_cells, dtype=bool)
            on_minus = np.zeros(mesh.n_cells, dtype=bool)
            on_plus[mesh.fracture_plus] = True
            on_minus[mesh.fracture_minus] = True
            counts = np.bincount(self.class_vertex, minlength=mesh.n_vertices)
            multi = counts[self.class_vertex] > 1
            rep = self.class_representative
            side[multi & on_plus[rep]] = "plus"
            side[multi & on_minus[rep] & ~on_plus[rep]] = "minus"
        self.class_side = side

        fixed = np.zeros(self.n_total, dtype=bool)
        if isinstance(dirichlet_tags, str):
            dirichlet_tags = None if dirichlet_tags == "all" else [dirichlet_tags]
            bv = mesh.boundary_vertices(dirichlet_tags)
        elif dirichlet_tags:
            bv = mesh.boundary_vertices(list(dirichlet_tags))
        else:
            bv = np.zeros(0, dtype=int)
        if len(bv):
            cls = np.flatnonzero(np.isin(self.class_vertex, bv))
            for a in range(d):
                fixed[d * cls + a] = True
        self.dirichlet_vertices = np.unique(self.class_vertex[fixed[::d][: self.n_classes]]) \
            if self.n_classes else np.zeros(0, dtype=int)
        for vertex, comp in point_constraints:
            cls = np.flatnonzero(self.class_vertex == vertex)
            fixed[d * cls + comp] = True
        self.fixed = fixed
        self.free = np.flatnonzero(~fixed)
        self.n_free = len(self.free)
        self.prescribed = np.zeros(self.n_total)

    # ------------------------------------------------------------ lookups
    def entity(self, cells, vertices) -> np.ndarray:
        """Class ids of (cell, vertex) pairs; vectorised."""
        keys = np.asarray(vertices) * self.mesh.n_cells + np.asarray(cells)
        pos = np.searchsorted(self._pair_keys, keys)
        if np.any(pos >= len(self._pair_keys)) or np.any(self._pair_keys[np.minimum(pos, len(self._pair_keys) - 1)] != keys):
            raise KeyError("vertex does not belong to cell")
        return self._pair_labels[pos]

    def class_cells(self, c: int) -> np.ndarray:
        """Member cells of side class ``c``."""
        return self._pair_cells[self._pair_labels == c]

    def nodal_block(self, K: int, s: int) -> np.ndarray:
        e = int(self.entity([K], [s])[0])
        return self.dim * e + np.arange(self.dim)

    def bubble_entity(self, k) -> np.ndarray:
        """Entity id of the bubble of fracture face number ``k``."""
        return self.n_classes + np.asarray(k)

    def bubble_block(self, k: int) -> np.ndarray:
        return self.dim * (self.n_classes + k) + np.arange(self.dim)

    def class_points(self) -> np.ndarray:
        return self.mesh.vertices[self.class_vertex]

    def class_hints(self) -> np.ndarray:
        """A point strictly inside one member cell of each class (side selection)."""
        return self.mesh.cell_centroid[self.class_representative]

    # ------------------------------------------------------------ Dirichlet data
    def set_prescribed(self, u) -> None:
        """Evaluate ``u(points, hints)`` on the fixed nodal DOFs.

        ``hints`` are points inside a member cell, so that a displacement that
        jumps across the fracture is evaluated by its one-sided limit.
        """
        d = self.dim
        cls = np.flatnonzero(self.fixed[: d * self.n_classes].reshape(-1, d).any(axis=1))
        if len(cls) == 0:
            return
        vals = np.asarray(u(self.class_points()[cls], self.class_hints()[cls]))
        block = self.prescribed[: d * self.n_classes].reshape(-1, d)
        mask = self.fixed[: d * self.n_classes].reshape(-1, d)[cls]
        block[cls] = np.where(mask, vals, block[cls])

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        """Full coefficient vector from free values plus prescribed data."""
        full = self.prescribed.copy()
        full[self.free] = x_free
        return full


def build_dof_map(mesh: PolytopalMesh, dirichlet_tags=None, point_constraints=()) -> DofMap:
    return DofMap(mesh, dirichlet_tags, point_constraints)


@dataclass
class DisplacementVector:
    """Full coefficient array of a discrete displacement."""

    dofs: DofMap
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.dofs.n_total,):
            raise ValueError("length does not match the DOF map")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("displacement contains non-finite values")

    @classmethod
    def from_free(cls, dofs: DofMap, x_free) -> "DisplacementVector":
        return cls(dofs, dofs.expand(x_free))

    @property
    def free(self) -> np.ndarray:
        return self.values[self.dofs.free]

    def nodal(self, K: int, s: int) -> np.ndarray:
        return self.values[self.dofs.nodal_block(K, s)]

    def bubbles(self) -> np.ndarray:
        d = self.dofs.dim
        return self.values[d * self.dofs.n_classes:].reshape(-1, d)


@dataclass
class MultiplierVector:
    """One d-vector per fracture face together with the face normals n+."""

    values: np.ndarray
    normals: np.ndarray

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.normals = np.atleast_2d(np.asarray(self.normals, dtype=float))

    @property
    def normal(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.values, self.normals)

    @property
    def tangential(self) -> np.ndarray:
        return self.values - self.normal[:, None] * self.normals

    @classmethod
    def from_parts(cls, normal, tangential, normals) -> "MultiplierVector":
        normals = np.atleast_2d(normals)
        return cls(np.asarray(normal)[:, None] * normals + np.asarray(tangential), normals)


def split(values: np.ndarray, normals: np.ndarray):
    """Normal scalar and tangential vector parts of face vectors."""
    vn = np.einsum("ij,ij->i", values, normals)
    return vn, values - vn[:, None] * normals


def project_ball(x: np.ndarray, g) -> np.ndarray:
    """Row-wise projection of vectors onto balls of radius ``g``."""
    g = np.broadcast_to(np.asarray(g, dtype=float), x.shape[:1])
    nrm = np.linalg.norm(x, axis=1)
    scale = np.ones_like(nrm)
    out = nrm > g
    scale[out] = g[out] / nrm[out]
    return x * scale[:, None]


def project_cone(lam, g, normals=None):
    """Face-wise projection onto C_D: lambda_n >= 0 and |lambda_tau| <= g.

    Accepts a :class:`MultiplierVector` (normals taken from it) or a raw
    (nF, d) array together with ``normals``.
    """
    if isinstance(lam, MultiplierVector):
        values, normals = lam.values, lam.normals
    else:
        values = np.atleast_2d(np.asarray(lam, dtype=float))
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
    ln, lt = split(values, normals)
    out = np.maximum(ln, 0.0)[:, None] * normals + project_ball(lt, g)
    if isinstance(lam, MultiplierVector):
        return MultiplierVector(out, normals)
    return out
