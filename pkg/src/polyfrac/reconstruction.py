"""Face and cell reconstruction operators, stabilisation and discrete norms.

Every local operator is assembled once into a global sparse matrix acting on
the full scalar entity vector (one value per side class and per bubble). The
vector operators follow from the entity-major layout ``d*e + a``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .dofs import DofMap
from .mesh import PolytopalMesh

WEIGHT_RULES = ("least_norm", "fan")


class WeightError(RuntimeError):
    """No nonnegative barycentric weights could be found."""


# ---------------------------------------------------------------- weights

def tangent_frame(normal: np.ndarray) -> np.ndarray:
    """Two unit vectors spanning the plane orthogonal to ``normal`` (rows).

    Accepts a single normal (3,) or a stack (m, 3); returns (2, 3) or (m, 2, 3).
    """
    nrm = np.atleast_2d(normal)
    helper = np.eye(3)[np.argmin(np.abs(nrm), axis=1)]
    t1 = np.cross(nrm, helper)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    frames = np.stack([t1, np.cross(nrm, t1)], axis=1)
    return frames[0] if np.ndim(normal) == 1 else frames


def _least_norm_batch(Y: np.ndarray) -> np.ndarray:
    """Minimal-norm weights with sum 1 and zero first moment about the origin.

    ``Y`` has shape (m, n, k): n points in k local coordinates centred at the
    target point. Returns (m, n) weights, possibly with negative entries.
    """
    m, n, _ = Y.shape
    A = np.concatenate([np.ones((m, 1, n)), np.transpose(Y, (0, 2, 1))], axis=1)
    b = np.zeros(A.shape[1])
    b[0] = 1.0
    return np.einsum("mij,j->mi", np.linalg.pinv(A), b)


def _active_set(Y: np.ndarray) -> np.ndarray | None:
    """Nonnegative least-norm weights by dropping negative entries one at a time."""
    n = len(Y)
    active = np.ones(n, dtype=bool)
    scale = max(np.abs(Y).max(), 1e-300)
    while active.sum() >= Y.shape[1] + 1:
        w = np.zeros(n)
        w[active] = _least_norm_batch(Y[None, active])[0]
        resid = np.abs(w @ Y).max() / scale + abs(w.sum() - 1.0)
        if resid > 1e-10:
            return None
        if w.min() >= -1e-14:
            return np.maximum(w, 0.0) / np.maximum(w, 0.0).sum()
        active[np.argmin(np.where(active, w, np.inf))] = False
    return None


def _finish(Y: np.ndarray, w: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    bad = np.flatnonzero(w.min(axis=1) < -1e-14)
    for i in bad:
        alt = _active_set(Y[i])
        w[i] = alt if alt is not None else fallback[i]
    return w


def _face_fan(mesh: PolytopalMesh, faces: np.ndarray):
    """Fan area vectors and fan weights of faces with equal vertex count."""
    X = mesh.vertices[np.array([mesh.faces[f] for f in faces])]
    n = X.shape[1]
    if mesh.dim == 2:
        vec = mesh.face_area[faces, None] * mesh.face_normal[faces]
        G = 0.5 * np.repeat(vec[:, None, :], 2, axis=1)
        return G, np.full((len(faces), 2), 0.5)
    c = X.mean(axis=1, keepdims=True)
    A = 0.5 * np.cross(X - c, np.roll(X, -1, axis=1) - c)
    # orient consistently with the stored face normal
    sgn = np.sign(np.einsum("mj,mj->m", A.sum(axis=1), mesh.face_normal[faces]))
    A *= sgn[:, None, None]
    total = A.sum(axis=1, keepdims=True)
    G = (A + np.roll(A, 1, axis=1)) / 3.0 + total / (3.0 * n)
    areas = np.linalg.norm(A, axis=2)
    w = (areas + np.roll(areas, 1, axis=1)) / (3.0 * areas.sum(axis=1, keepdims=True)) + 1.0 / (3 * n)
    return G, w


def face_weights(mesh: PolytopalMesh, faces=None, rule: str = "least_norm"):
    """Nonnegative barycentric weights of face centroids.

    Returns a list of weight arrays aligned with ``mesh.faces[f]``. The
    ``least_norm`` rule minimises the Euclidean norm of the weights under the
    exactness constraints (active-set fallback if a weight turns negative);
    ``fan`` uses the weights induced by the fan triangulation about the vertex
    mean. Non-planar faces always use the fan rule.
    """
    if rule not in WEIGHT_RULES:
        raise ValueError(f"unknown weight rule {rule!r}")
    faces = np.arange(mesh.n_faces) if faces is None else np.asarray(faces, dtype=int)
    out = [None] * len(faces)
    sizes = np.array([len(mesh.faces[f]) for f in faces])
    for nv in np.unique(sizes):
        pos = np.flatnonzero(sizes == nv)
        fs = faces[pos]
        _, wfan = _face_fan(mesh, fs)
        if rule == "fan" or mesh.dim == 2:
            w = wfan
        else:
            X = mesh.vertices[np.array([mesh.faces[f] for f in fs])] - mesh.face_centroid[fs][:, None, :]
            frames = tangent_frame(mesh.face_normal[fs])
            Y = np.einsum("mnj,mkj->mnk", X, frames)
            w = _finish(Y, _least_norm_batch(Y), wfan)
            nonplanar = ~mesh.face_planar[fs]
            w[nonplanar] = wfan[nonplanar]
        for i, p in enumerate(pos):
            out[p] = w[i]
    return out


def compute_face_weights(mesh: PolytopalMesh, f: int, rule: str = "least_norm") -> np.ndarray:
    return face_weights(mesh, [f], rule)[0]


def _cell_fan_weights(mesh: PolytopalMesh, K: int) -> np.ndarray:
    """Weights induced by the fan from the centroid; always nonnegative."""
    verts = mesh.cell_vertices[K]
    d = mesh.dim
    if len(verts) == d + 1:
        return np.full(d + 1, 1.0 / (d + 1))
    pos = {int(s): i for i, s in enumerate(verts)}
    w = np.zeros(len(verts))
    xK = mesh.cell_centroid[K]
    for f in mesh.cell_faces[K]:
        fv = mesh.faces[f]
        X = mesh.vertices[fv]
        if d == 2:
            vol = abs(np.cross(X[0] - xK, X[1] - xK)) / 2.0
            for s in fv:
                w[pos[s]] += vol / 2.0
            continue
        c = X.mean(axis=0)
        n = len(fv)
        for i in range(n):
            j = (i + 1) % n
            vol = abs(np.dot(c - xK, np.cross(X[i] - xK, X[j] - xK))) / 6.0
            w[pos[fv[i]]] += vol / 3.0
            w[pos[fv[j]]] += vol / 3.0
            for s in fv:
                w[pos[s]] += vol / (3.0 * n)
    return w / w.sum()


def cell_weights(mesh: PolytopalMesh, rule: str = "least_norm"):
    """Nonnegative barycentric weights of cell centroids (list per cell)."""
    if rule not in WEIGHT_RULES:
        raise ValueError(f"unknown weight rule {rule!r}")
    out = [None] * mesh.n_cells
    sizes = np.array([len(v) for v in mesh.cell_vertices])
    for nv in np.unique(sizes):
        cells = np.flatnonzero(sizes == nv)
        if nv == mesh.dim + 1:
            for K in cells:
                out[K] = np.full(nv, 1.0 / nv)
            continue
        if rule == "fan":
            for K in cells:
                out[K] = _cell_fan_weights(mesh, K)
            continue
        Y = mesh.vertices[np.array([mesh.cell_vertices[K] for K in cells])] - mesh.cell_centroid[cells][:, None, :]
        w = _least_norm_batch(Y)
        bad = np.flatnonzero(w.min(axis=1) < -1e-14)
        for i in bad:
            alt = _active_set(Y[i])
            w[i] = alt if alt is not None else _cell_fan_weights(mesh, cells[i])
        for i, K in enumerate(cells):
            out[K] = w[i]
    return out


def compute_cell_weights(mesh: PolytopalMesh, K: int, rule: str = "least_norm") -> np.ndarray:
    if rule == "fan":
        return _cell_fan_weights(mesh, K)
    return _single_cell_weights(mesh, K)


def _single_cell_weights(mesh, K):
    verts = mesh.cell_vertices[K]
    if len(verts) == mesh.dim + 1:
        return np.full(len(verts), 1.0 / len(verts))
    Y = (mesh.vertices[verts] - mesh.cell_centroid[K])[None]
    w = _least_norm_batch(Y)[0]
    if w.min() < -1e-14:
        alt = _active_set(Y[0])
        w = alt if alt is not None else _cell_fan_weights(mesh, K)
    return w


# ---------------------------------------------------------------- operator cache

def _flatten(lists):
    sizes = np.array([len(x) for x in lists], dtype=int)
    return np.concatenate(lists) if len(lists) else np.zeros(0), sizes


class CellOperatorCache:
    """Global sparse versions of the local reconstruction operators.

    Attributes (scalar operators, columns indexed by entity):

    ``Gs``      cell gradients, rows ``K*d + b``
    ``Mean``    cell means v̄_K, rows ``K``
    ``Fplus``, ``Fminus``  face means v̄_{Kσ} from the plus / minus cell of
                each fracture face
    ``J``       fracture jump map
    ``R``       nodal residuals v_{Ks} - Π^K v(x_s), one row per (s, K) pair

    Parameters
    ----------
    gradient:
        ``"auto"`` applies the barycentric fan formula on non-planar faces
        only; ``"bary"`` applies it on every face (it coincides with the face
        mean formula when the face weights are the fan weights).
    """

    def __init__(self, mesh: PolytopalMesh, dofs: DofMap, weight_rule: str = "least_norm",
                 gradient: str = "auto"):
        if gradient not in ("auto", "bary"):
            raise ValueError(f"unknown gradient variant {gradient!r}")
        self.mesh, self.dofs = mesh, dofs
        self.weight_rule, self.gradient = weight_rule, gradient
        d = self.dim = mesh.dim
        nC, ne = mesh.n_cells, dofs.n_entities
        self.face_w = face_weights(mesh, rule=weight_rule)
        self.cell_w = cell_weights(mesh, rule=weight_rule)

        # per face-vertex "area vectors" a_s with sum_s a_s v_s = |σ| v̄_σ n_σ
        fvert, fsize = _flatten(mesh.faces)
        fvert = fvert.astype(int)
        fptr = np.concatenate([[0], np.cumsum(fsize)])
        avec = np.concatenate(self.face_w)[:, None] * \
            np.repeat(mesh.face_area[:, None] * mesh.face_normal, fsize, axis=0)
        use_fan = ~mesh.face_planar if gradient == "auto" else np.ones(mesh.n_faces, dtype=bool)
        if mesh.dim == 2:
            use_fan[:] = False
        for nv in np.unique(fsize[use_fan]) if use_fan.any() else []:
            fs = np.flatnonzero(use_fan & (fsize == nv))
            G, _ = _face_fan(mesh, fs)
            idx = fptr[fs][:, None] + np.arange(nv)
            avec[idx.ravel()] = G.reshape(-1, d)

        # cell gradient
        inc_cell = np.repeat(np.arange(nC), [len(f) for f in mesh.cell_faces])
        inc_face = np.concatenate(mesh.cell_faces).astype(int)
        inc_sign = np.concatenate(mesh.cell_face_signs).astype(float)
        cnt = fsize[inc_face]
        j = np.repeat(fptr[inc_face], cnt) + (np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt))
        K = np.repeat(inc_cell, cnt)
        ent = dofs.entity(K, fvert[j])
        coef = avec[j] * (np.repeat(inc_sign, cnt) / mesh.cell_volume[K])[:, None]
        rows = [(K[:, None] * d + np.arange(d)).ravel()]
        cols = [np.repeat(ent, d)]
        vals = [coef.ravel()]
        fr = mesh.fracture_faces
        nF = len(fr)
        if nF:
            Kp = mesh.fracture_plus
            bcoef = (mesh.face_area[fr] / mesh.cell_volume[Kp])[:, None] * mesh.fracture_normal
            rows.append((Kp[:, None] * d + np.arange(d)).ravel())
            cols.append(np.repeat(dofs.bubble_entity(np.arange(nF)), d))
            vals.append(bcoef.ravel())
        self.Gs = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                shape=(nC * d, ne))

        # cell means
        cvert, csize = _flatten(mesh.cell_vertices)
        cvert = cvert.astype(int)
        ccell = np.repeat(np.arange(nC), csize)
        cent = dofs.entity(ccell, cvert)
        self.Mean = sp.csr_matrix((np.concatenate(self.cell_w), (ccell, cent)), shape=(nC, ne))

        # nodal residual v_Ks - Π^K v(x_s)
        npair = len(cvert)
        prow = np.arange(npair)
        Sel = sp.csr_matrix((np.ones(npair), (prow, cent)), shape=(npair, ne))
        xrel = mesh.vertices[cvert] - mesh.cell_centroid[ccell]
        Xrel = sp.csr_matrix((xrel.ravel(), (np.repeat(prow, d), (ccell[:, None] * d + np.arange(d)).ravel())),
                             shape=(npair, nC * d))
        Rep = sp.csr_matrix((np.ones(npair), (prow, ccell)), shape=(npair, nC))
        self.R = (Sel - Xrel @ self.Gs - Rep @ self.Mean).tocsr()
        self.pair_cell = ccell
        self.pair_vertex = cvert

        # fracture face means and jumps
        self.Fplus = self._face_mean_matrix(fr, mesh.fracture_plus)
        self.Fminus = self._face_mean_matrix(fr, mesh.fracture_minus)
        bub = sp.csr_matrix((np.ones(nF), (np.arange(nF), dofs.bubble_entity(np.arange(nF)))), shape=(nF, ne))
        self.J = (self.Fplus - self.Fminus + bub).tocsr()

        self.h_weight = mesh.cell_diameter ** (d - 2)
        self._grad_vec = None

    # ------------------------------------------------------------ helpers
    def _face_mean_matrix(self, faces, cells) -> sp.csr_matrix:
        mesh, dofs = self.mesh, self.dofs
        rows, cols, vals = [], [], []
        for k, (f, K) in enumerate(zip(faces, cells)):
            fv = mesh.faces[f]
            rows.append(np.full(len(fv), k))
            cols.append(dofs.entity(np.full(len(fv), K), fv))
            vals.append(self.face_w[f])
        if not rows:
            return sp.csr_matrix((0, dofs.n_entities))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(len(faces), dofs.n_entities))

    def face_mean_matrix(self, faces, cells) -> sp.csr_matrix:
        """Scalar map v -> v̄_{Kσ} for the given (face, cell) incidences."""
        return self._face_mean_matrix(np.asarray(faces), np.asarray(cells))

    def face_gradient_matrix(self, K: int, f: int) -> sp.csr_matrix:
        """Scalar map v -> ∇^{Kσ} v, rows indexed by the derivative direction."""
        mesh, d = self.mesh, self.dim
        pairs, lengths, normals = mesh.face_edge_geometry(f)
        rows, cols, vals = [], [], []
        for (s1, s2), le, ne in zip(pairs, lengths, normals):
            for s in (s1, s2):
                e = int(self.dofs.entity([K], [s])[0])
                for b in range(d):
                    rows.append(b)
                    cols.append(e)
                    vals.append(0.5 * le * ne[b] / mesh.face_area[f])
        return sp.csr_matrix((vals, (rows, cols)), shape=(d, self.dofs.n_entities))

    def _as_entities(self, v: np.ndarray) -> np.ndarray:
        """(n_entities, d) view of a full vector."""
        return np.asarray(v).reshape(-1, self.dim)

    def vector(self, M: sp.spmatrix) -> sp.csr_matrix:
        """Lift a scalar operator to the vector layout ``d*e + a``."""
        return sp.kron(M, sp.identity(self.dim), format="csr")

    # ------------------------------------------------------------ operators
    @property
    def Grad(self) -> sp.csr_matrix:
        """Vector gradient operator: rows ``K*d*d + a*d + b``, columns ``d*e + a``."""
        if self._grad_vec is None:
            d = self.dim
            G = self.Gs.tocoo()
            K, b = np.divmod(G.row, d)
            rows = (K[:, None] * d * d + np.arange(d) * d + b[:, None]).ravel()
            cols = (G.col[:, None] * d + np.arange(d)).ravel()
            vals = np.repeat(G.data, d)
            self._grad_vec = sp.csr_matrix((vals, (rows, cols)),
                                           shape=(self.mesh.n_cells * d * d, self.dofs.n_total))
        return self._grad_vec

    def cell_gradient(self, v: np.ndarray) -> np.ndarray:
        """∇^K v for every cell, shape (n_cells, d, d) with [a, b] = ∂_b v_a."""
        V = self._as_entities(v)
        G = (self.Gs @ V).reshape(self.mesh.n_cells, self.dim, self.dim)
        return np.transpose(G, (0, 2, 1))

    def cell_mean(self, v: np.ndarray) -> np.ndarray:
        """v̄_K per cell (the piecewise constant reconstruction)."""
        return self.Mean @ self._as_entities(v)

    def cell_reconstruction(self, v: np.ndarray, points: np.ndarray, cells: np.ndarray) -> np.ndarray:
        """Π^K v evaluated at ``points`` lying in ``cells``."""
        G = self.cell_gradient(v)
        m = self.cell_mean(v)
        x = points - self.mesh.cell_centroid[cells]
        return np.einsum("qab,qb->qa", G[cells], x) + m[cells]

    def strain(self, v: np.ndarray) -> np.ndarray:
        G = self.cell_gradient(v)
        return 0.5 * (G + np.transpose(G, (0, 2, 1)))

    def divergence(self, v: np.ndarray) -> np.ndarray:
        return np.trace(self.strain(v), axis1=1, axis2=2)

    def stress(self, v: np.ndarray, mu, lam) -> np.ndarray:
        eps = self.strain(v)
        mu = np.broadcast_to(mu, eps.shape[:1])
        lam = np.broadcast_to(lam, eps.shape[:1])
        return 2 * mu[:, None, None] * eps + (lam * np.trace(eps, axis1=1, axis2=2))[:, None, None] * np.eye(self.dim)

    def face_mean(self, v: np.ndarray, K: int, f: int) -> np.ndarray:
        return (self.face_mean_matrix([f], [K]) @ self._as_entities(v))[0]

    def face_gradient(self, v: np.ndarray, K: int, f: int) -> np.ndarray:
        """∇^{Kσ} v as a (d, d) tensor with [a, b] = ∂_b v_a."""
        return (self.face_gradient_matrix(K, f) @ self._as_entities(v)).T

    def face_trace(self, v: np.ndarray, K: int, f: int):
        """Π^{Kσ} v as a callable on points of σ, plus the face mean v̄_{Kσ}."""
        G = self.face_gradient(v, K, f)
        m = self.face_mean(v, K, f)
        xc = self.mesh.face_centroid[f]

        def trace(x):
            return (np.atleast_2d(x) - xc) @ G.T + m

        return trace, m

    def face_jump(self, v: np.ndarray) -> np.ndarray:
        """[[v]]_σ on every fracture face, shape (nF, d)."""
        return self.J @ self._as_entities(v)

    def jump_normal(self, v: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ij->i", self.face_jump(v), self.mesh.fracture_normal)

    # ------------------------------------------------------------ stabilisation
    def stabilisation_matrix(self, cell_scale=None, vector: bool = True) -> sp.csr_matrix:
        """Matrix of Σ_K c_K S_K (``c_K = 1`` by default, i.e. the unscaled form)."""
        mesh, dofs = self.mesh, self.dofs
        c = np.ones(mesh.n_cells) if cell_scale is None else np.broadcast_to(cell_scale, (mesh.n_cells,))
        wpair = (c * self.h_weight)[self.pair_cell]
        S = self.R.T @ sp.diags(wpair) @ self.R
        nF = len(mesh.fracture_faces)
        if nF:
            bw = (c * self.h_weight)[mesh.fracture_plus]
            be = dofs.bubble_entity(np.arange(nF))
            S = S + sp.csr_matrix((bw, (be, be)), shape=S.shape)
        S = S.tocsr()
        return self.vector(S) if vector else S

    def stabilisation(self, u: np.ndarray, v: np.ndarray, cell_scale=None, per_cell: bool = False):
        """S_K(u, v) summed (or per cell when ``per_cell``)."""
        U, V = self._as_entities(u), self._as_entities(v)
        ru, rv = self.R @ U, self.R @ V
        c = np.ones(self.mesh.n_cells) if cell_scale is None else np.broadcast_to(cell_scale, (self.mesh.n_cells,))
        out = np.zeros(self.mesh.n_cells)
        np.add.at(out, self.pair_cell, np.einsum("ij,ij->i", ru, rv))
        nF = len(self.mesh.fracture_faces)
        if nF:
            be = self.dofs.bubble_entity(np.arange(nF))
            np.add.at(out, self.mesh.fracture_plus, np.einsum("ij,ij->i", U[be], V[be]))
        out *= c * self.h_weight
        return out if per_cell else float(out.sum())

    # ------------------------------------------------------------ norms
    def gradient_gram(self) -> sp.csr_matrix:
        """Matrix of Σ_K |K| ∇^K u : ∇^K v."""
        return self.vector(self.Gs.T @ sp.diags(np.repeat(self.mesh.cell_volume, self.dim)) @ self.Gs).tocsr()

    def strain_gram(self) -> sp.csr_matrix:
        """Matrix of Σ_K |K| ε^K u : ε^K v."""
        d = self.dim
        P = np.zeros((d * d, d * d))
        for a in range(d):
            for b in range(d):
                P[a * d + b, a * d + b] += 0.5
                P[a * d + b, b * d + a] += 0.5
        W = sp.kron(sp.diags(self.mesh.cell_volume), sp.csr_matrix(P))
        return (self.Grad.T @ W @ self.Grad).tocsr()

    def norm_gram(self) -> sp.csr_matrix:
        """Gram matrix N of the discrete H1 norm."""
        return (self.gradient_gram() + self.stabilisation_matrix()).tocsr()

    def norm_1D(self, v: np.ndarray) -> float:
        G = self.cell_gradient(v)
        val = float(np.einsum("k,kab,kab->", self.mesh.cell_volume, G, G)) + self.stabilisation(v, v)
        return float(np.sqrt(max(val, 0.0)))


def discrete_norms(cache: CellOperatorCache, v: np.ndarray) -> float:
    """‖v‖_{1,D}."""
    return cache.norm_1D(v)


def multiplier_norms(mesh: PolytopalMesh, mu: np.ndarray) -> tuple[float, float]:
    """(‖μ‖_{1/2,D}, ‖μ‖_{-1/2,D}) of a face-wise constant multiplier."""
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    f = mesh.fracture_faces
    l2 = mesh.face_area[f] * np.einsum("ij,ij->i", mu, mu)
    h = mesh.face_diameter[f]
    return float(np.sqrt(np.sum(l2 / h))), float(np.sqrt(np.sum(l2 * h)))
