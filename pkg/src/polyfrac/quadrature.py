"""Simplex quadrature and fan decompositions of cells and faces."""

from __future__ import annotations

import itertools
from functools import lru_cache
from math import factorial

import numpy as np


def _compositions(total, parts):
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, out = -1, []
        for c in cut:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 2 - prev)
        yield out


@lru_cache(maxsize=None)
def grundmann_moeller(dim: int, s: int):
    """Grundmann-Moeller rule of degree 2s+1 on a dim-simplex.

    Returns barycentric points (nq, dim+1) and weights summing to one.
    """
    pts, wts = [], []
    n = dim
    for i in range(s + 1):
        denom = n + 2 * s + 1 - 2 * i
        w = (-1) ** i * 2.0 ** (-2 * s) * denom ** (2 * s + 1) / (factorial(i) * factorial(n + 2 * s + 1 - i))
        for beta in _compositions(s - i, n + 1):
            pts.append([(2 * b + 1) / denom for b in beta])
            wts.append(w)
    wts = np.array(wts)
    return np.array(pts), wts / wts.sum()


@lru_cache(maxsize=None)
def simplex_rule(dim: int, degree: int):
    """Barycentric points and unit-sum weights exact to ``degree`` on a simplex."""
    if dim == 1:
        g, w = np.polynomial.legendre.leggauss(max(1, (degree + 2) // 2))
        t = 0.5 * (g + 1.0)
        return np.column_stack([1 - t, t]), 0.5 * w
    if degree <= 1:
        return np.full((1, dim + 1), 1.0 / (dim + 1)), np.ones(1)
    if degree == 2 and dim == 2:
        a, b = 2.0 / 3.0, 1.0 / 6.0
        return np.array([[a, b, b], [b, a, b], [b, b, a]]), np.full(3, 1.0 / 3.0)
    if degree == 2 and dim == 3:
        a, b = 0.5854101966249685, 0.1381966011250105
        pts = np.full((4, 4), b)
        np.fill_diagonal(pts, a)
        return pts, np.full(4, 0.25)
    return grundmann_moeller(dim, (degree - 1 + 1) // 2)


def simplex_measure(S: np.ndarray) -> np.ndarray:
    """Measures of simplices S (m, k+1, D) of intrinsic dimension k."""
    E = S[:, 1:] - S[:, :1]
    k = E.shape[1]
    if k == E.shape[2]:
        return np.abs(np.linalg.det(E)) / factorial(k)
    gram = np.einsum("mij,mkj->mik", E, E)
    return np.sqrt(np.maximum(np.linalg.det(gram), 0.0)) / factorial(k)


def map_rule(S: np.ndarray, degree: int):
    """Physical points (m*nq, D) and weights for simplices ``S``."""
    k = S.shape[1] - 1
    bary, w = simplex_rule(k, degree)
    pts = np.einsum("qj,mjd->mqd", bary, S)
    wts = simplex_measure(S)[:, None] * w[None, :]
    return pts.reshape(-1, S.shape[2]), wts.ravel()


def cell_simplices_all(mesh):
    """Fan decomposition of every cell: simplices (m, d+1, d) and owning cell.

    Simplex cells are kept whole; other cells are fanned from the centroid over
    their faces, non-triangular 3D faces being fanned about their vertex mean.
    """
    d = mesh.dim
    nverts = np.array([len(v) for v in mesh.cell_vertices])
    simp_cells = np.flatnonzero(nverts == d + 1)
    out_S, out_K = [], []
    if len(simp_cells):
        out_S.append(mesh.vertices[np.array([mesh.cell_vertices[K] for K in simp_cells])])
        out_K.append(simp_cells)
    other = np.flatnonzero(nverts != d + 1)
    if len(other) == 0:
        return np.concatenate(out_S), np.concatenate(out_K)
    inc_cell = np.concatenate([np.full(len(mesh.cell_faces[K]), K) for K in other])
    inc_face = np.concatenate([mesh.cell_faces[K] for K in other])
    sizes = np.array([len(mesh.faces[f]) for f in inc_face])
    for nv in np.unique(sizes):
        sel = sizes == nv
        K, f = inc_cell[sel], inc_face[sel]
        X = mesh.vertices[np.array([mesh.faces[g] for g in f])]
        apex = mesh.cell_centroid[K]
        if d == 2 or nv == 3:
            S = np.concatenate([apex[:, None], X], axis=1)
            out_S.append(S)
            out_K.append(K)
        else:
            c = mesh.face_center[f]
            P, Q = X, np.roll(X, -1, axis=1)
            S = np.stack([np.repeat(apex[:, None], nv, axis=1), np.repeat(c[:, None], nv, axis=1), P, Q],
                         axis=2)
            out_S.append(S.reshape(-1, 4, 3))
            out_K.append(np.repeat(K, nv))
    return np.concatenate(out_S), np.concatenate(out_K)


def face_simplices_all(mesh, faces):
    """Segments/triangles tiling the given faces, with the owning face."""
    faces = np.asarray(faces, dtype=int)
    if len(faces) == 0:
        return np.zeros((0, mesh.dim, mesh.dim)), np.zeros(0, dtype=int)
    sizes = np.array([len(mesh.faces[f]) for f in faces])
    out_S, out_F = [], []
    for nv in np.unique(sizes):
        f = faces[sizes == nv]
        X = mesh.vertices[np.array([mesh.faces[g] for g in f])]
        if mesh.dim == 2 or nv == 3:
            out_S.append(X)
            out_F.append(f)
        else:
            c = mesh.face_center[f]
            S = np.stack([np.repeat(c[:, None], nv, axis=1), X, np.roll(X, -1, axis=1)], axis=2)
            out_S.append(S.reshape(-1, 3, 3))
            out_F.append(np.repeat(f, nv))
    return np.concatenate(out_S), np.concatenate(out_F)


class CellQuadrature:
    """Quadrature points of all cells, grouped by owner."""

    def __init__(self, mesh, degree: int = 2):
        S, owner = cell_simplices_all(mesh)
        nq = len(simplex_rule(mesh.dim, degree)[1])
        self.points, self.weights = map_rule(S, degree)
        self.cell = np.repeat(owner, nq)
        self.n_cells = mesh.n_cells

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Per-cell integrals of pointwise ``values`` (n_points, ...)."""
        v = values * self.weights.reshape((-1,) + (1,) * (values.ndim - 1))
        out = np.zeros((self.n_cells,) + values.shape[1:])
        np.add.at(out, self.cell, v)
        return out


class FaceQuadrature:
    """Quadrature on a subset of faces; ``face`` holds positions in that subset."""

    def __init__(self, mesh, faces, degree: int = 2):
        faces = np.asarray(faces, dtype=int)
        S, owner = face_simplices_all(mesh, faces)
        pos = np.full(mesh.n_faces, -1)
        pos[faces] = np.arange(len(faces))
        nq = len(simplex_rule(mesh.dim - 1, degree)[1])
        self.points, self.weights = map_rule(S, degree)
        self.face = np.repeat(pos[owner], nq)
        self.face_id = np.repeat(owner, nq)
        self.n_faces = len(faces)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        v = values * self.weights.reshape((-1,) + (1,) * (values.ndim - 1))
        out = np.zeros((self.n_faces,) + values.shape[1:])
        np.add.at(out, self.face, v)
        return out
