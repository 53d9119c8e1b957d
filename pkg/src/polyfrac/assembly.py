"""Sparse assembly of the mixed contact system."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dofs import DofMap
from .quadrature import CellQuadrature, FaceQuadrature
from .reconstruction import CellOperatorCache


@dataclass
class Material:
    """Cellwise Lamé coefficients."""

    mu: np.ndarray
    lam: np.ndarray

    @classmethod
    def constant(cls, mu: float, lam: float, n_cells: int) -> "Material":
        return cls(np.full(n_cells, float(mu)), np.full(n_cells, float(lam)))

    @classmethod
    def from_young(cls, E: float, nu: float, n_cells: int, plane_strain: bool = True) -> "Material":
        """Lamé pair from Young's modulus and Poisson's ratio.

        In 2D the plane-strain relations coincide with the 3D ones, which is
        what ``plane_strain`` selects; plane stress rescales lambda.
        """
        mu = E / (2.0 * (1.0 + nu))
        lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        if not plane_strain:
            lam = 2.0 * mu * lam / (lam + 2.0 * mu)
        return cls.constant(mu, lam, n_cells)

    @property
    def stab_scale(self) -> np.ndarray:
        return 2.0 * self.mu + self.lam


class SingularStiffnessError(RuntimeError):
    """The stiffness restricted to free DOFs is singular (floating component)."""


@dataclass
class SaddleSystem:
    """Algebraic data of the contact problem on free displacement DOFs.

    ``B @ u_free + jump0`` equals ``|σ| [[u]]_σ`` stacked face by face (d
    entries per fracture face), so ``λᵀ B v`` is the fracture pairing.
    """

    A: sp.csr_matrix
    B: sp.csr_matrix
    f_vec: np.ndarray
    jump0: np.ndarray
    area: np.ndarray
    g: np.ndarray
    normals: np.ndarray
    h_face: np.ndarray
    dofs: DofMap
    cache: CellOperatorCache
    material: Material
    beta_scale: np.ndarray = field(default=None)

    @property
    def dim(self) -> int:
        return self.dofs.dim

    @property
    def n_faces(self) -> int:
        return len(self.area)

    def jump(self, u_free: np.ndarray) -> np.ndarray:
        """[[u]]_σ per fracture face, shape (nF, d)."""
        return ((self.B @ u_free + self.jump0).reshape(-1, self.dim)) / self.area[:, None]

    def full(self, u_free: np.ndarray) -> np.ndarray:
        return self.dofs.expand(u_free)


def stiffness_full(cache: CellOperatorCache, material: Material) -> sp.csr_matrix:
    """Σ_K |K| σ_K(u):ε_K(v) + (2μ_K+λ_K) S_K(u, v) over all DOFs."""
    d = cache.dim
    Cmu = np.zeros((d * d, d * d))
    Clam = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            Cmu[a * d + b, a * d + b] += 1.0
            Cmu[a * d + b, b * d + a] += 1.0
            Clam[a * d + a, b * d + b] = 1.0
    vol = cache.mesh.cell_volume
    W = sp.kron(sp.diags(vol * material.mu), sp.csr_matrix(Cmu)) + \
        sp.kron(sp.diags(vol * material.lam), sp.csr_matrix(Clam))
    G = cache.Grad
    A = G.T @ W.tocsr() @ G + cache.stabilisation_matrix(material.stab_scale)
    A = A.tocsr()
    A.sum_duplicates()
    return A


def assemble_stiffness(cache: CellOperatorCache, material: Material, dofs: DofMap | None = None):
    """Stiffness restricted to free DOFs and its coupling to prescribed ones."""
    dofs = dofs or cache.dofs
    A = stiffness_full(cache, material)
    free, fixed = dofs.free, np.flatnonzero(dofs.fixed)
    Aff = A[free][:, free].tocsr()
    Afd = A[free][:, fixed].tocsr()
    return Aff, Afd


def coupling_full(cache: CellOperatorCache) -> sp.csr_matrix:
    """Rows ``d*k + a``: |σ_k| times component a of the jump map."""
    area = cache.mesh.face_area[cache.mesh.fracture_faces]
    return cache.vector(sp.diags(area) @ cache.J)


def assemble_coupling(cache: CellOperatorCache, dofs: DofMap | None = None):
    dofs = dofs or cache.dofs
    B = coupling_full(cache)
    return B[:, dofs.free].tocsr(), B


def body_load(cache: CellOperatorCache, f, degree: int = 2, quad: CellQuadrature | None = None) -> np.ndarray:
    """Full load vector of ∫_Ω f · Π̃^D v (cell means as test functions).

    ``f`` is a constant vector or a callable ``f(points, cells)``.
    """
    mesh, d = cache.mesh, cache.dim
    if callable(f):
        q = quad or CellQuadrature(mesh, degree)
        FK = q.integrate(np.asarray(f(q.points, q.cell)))
    else:
        FK = mesh.cell_volume[:, None] * np.asarray(f, dtype=float)[None, :]
    return (cache.Mean.T @ FK).ravel()


def traction_load(cache: CellOperatorCache, tractions: dict, degree: int = 2) -> np.ndarray:
    """Full load vector of Σ ∫_σ t · Π^{Kσ} v over tagged boundary faces.

    ``tractions`` maps a boundary tag to a constant vector or to a callable
    ``t(points, normals)``.
    """
    mesh, dofs, d = cache.mesh, cache.dofs, cache.dim
    out = np.zeros((dofs.n_entities, d))
    for tag, t in tractions.items():
        faces = mesh.boundary_faces[mesh.face_tags[mesh.boundary_faces] == tag]
        if len(faces) == 0:
            continue
        cells = mesh.face_cells[faces, 0]
        Fm = cache.face_mean_matrix(faces, cells)
        if not callable(t):
            T0 = mesh.face_area[faces, None] * np.asarray(t, dtype=float)[None, :]
            out += Fm.T @ T0
            continue
        q = FaceQuadrature(mesh, faces, degree)
        vals = np.asarray(t(q.points, mesh.face_normal[q.face_id]))
        T0 = q.integrate(vals)
        rel = q.points - mesh.face_centroid[q.face_id]
        T1 = q.integrate(np.einsum("qa,qb->qab", vals, rel))
        out += Fm.T @ T0
        for i, (f, K) in enumerate(zip(faces, cells)):
            Gf = cache.face_gradient_matrix(K, f)  # rows: direction b
            out += Gf.T @ T1[i].T
    return out.ravel()


def assemble_load(cache: CellOperatorCache, f=None, tractions=None, degree: int = 2) -> np.ndarray:
    """Full right-hand side vector (body force plus boundary tractions)."""
    rhs = np.zeros(cache.dofs.n_total)
    if f is not None:
        rhs += body_load(cache, f, degree)
    if tractions:
        rhs += traction_load(cache, tractions, degree)
    return rhs


def assemble_system(cache: CellOperatorCache, material: Material, g, f=None, tractions=None,
                    degree: int = 2) -> SaddleSystem:
    """Assemble A, B and the load, eliminating prescribed DOFs."""
    dofs, mesh = cache.dofs, cache.mesh
    A_full = stiffness_full(cache, material)
    free, fixed = dofs.free, np.flatnonzero(dofs.fixed)
    A = A_full[free][:, free].tocsr()
    rhs = assemble_load(cache, f, tractions, degree)
    rhs_free = rhs[free] - A_full[free][:, fixed] @ dofs.prescribed[fixed]
    B_full = coupling_full(cache)
    fr = mesh.fracture_faces
    nF = len(fr)
    g = np.broadcast_to(np.asarray(g, dtype=float), (nF,)).copy()
    if np.any(g < 0):
        raise ValueError("Tresca threshold must be nonnegative")
    Kp = mesh.fracture_plus
    return SaddleSystem(
        A=A, B=B_full[:, free].tocsr(), f_vec=rhs_free,
        jump0=B_full[:, fixed] @ dofs.prescribed[fixed],
        area=mesh.face_area[fr].copy(), g=g, normals=mesh.fracture_normal.copy(),
        h_face=mesh.face_diameter[fr].copy(), dofs=dofs, cache=cache, material=material,
        beta_scale=(material.stab_scale[Kp] if nF else np.zeros(0)),
    )


def dump_coo(matrix: sp.spmatrix, path) -> None:
    """Write a sparse matrix as ``row col value`` lines (0-based)."""
    M = sp.coo_matrix(matrix)
    order = np.lexsort((M.col, M.row))
    with open(path, "w") as fh:
        fh.write(f"% {M.shape[0]} {M.shape[1]} {M.nnz}\n")
        for r, c, v in zip(M.row[order], M.col[order], M.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")


def read_coo(path) -> sp.csr_matrix:
    with open(path) as fh:
        header = fh.readline().split()
        shape = (int(header[1]), int(header[2]))
        nnz = int(header[3]) if len(header) > 3 else None
    if nnz == 0:
        return sp.csr_matrix(shape)
    data = np.loadtxt(path, comments="%", ndmin=2)
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=shape)
