"""Interpolators, error norms, consistency functionals and stability constants."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .contact import linear_solve
from .quadrature import CellQuadrature, FaceQuadrature
from .reconstruction import CellOperatorCache

DENSE_DOF_LIMIT = 20000


class DiagnosticSizeError(ValueError):
    """The requested dense diagnostic exceeds the desk-scale limit."""


# ---------------------------------------------------------------- self check

def finite_difference_check(solution, points, hints=None, delta=1e-4):
    """Max errors of the supplied gradient and load against centred differences.

    Returns ``(grad_error, load_error)``: the gradient is compared with
    differences of ``u`` and the load with -div of differences of the stress.
    Both should be O(delta²) relative to the field scale.
    """
    x = np.atleast_2d(points)
    hints = x if hints is None else hints
    d = x.shape[1]
    G = solution.grad(x, hints)
    div = np.zeros((len(x), d))
    gerr = 0.0
    for b in range(d):
        e = np.zeros(d)
        e[b] = delta
        du = (solution.u(x + e, hints) - solution.u(x - e, hints)) / (2 * delta)
        gerr = max(gerr, np.abs(du - G[:, :, b]).max())
        ds = (solution.stress(x + e, hints) - solution.stress(x - e, hints)) / (2 * delta)
        div += ds[:, :, b]
    ferr = np.abs(-div - solution.f(x, hints)).max()
    return float(gerr), float(ferr)


# ---------------------------------------------------------------- interpolators

def interpolate_displacement(cache: CellOperatorCache, u, degree: int = 2) -> np.ndarray:
    """I_D u as a full coefficient vector.

    ``u(points, hints)`` is evaluated at the vertices with one-sided hints;
    each bubble is the face mean of u from the plus side minus v̄_{Kσ}.
    """
    mesh, dofs, d = cache.mesh, cache.dofs, cache.dim
    V = np.zeros((dofs.n_entities, d))
    V[: dofs.n_classes] = u(dofs.class_points(), dofs.class_hints())
    fr = mesh.fracture_faces
    if len(fr):
        q = FaceQuadrature(mesh, fr, degree)
        hint = mesh.cell_centroid[mesh.fracture_plus[q.face]]
        means = q.integrate(u(q.points, hint)) / mesh.face_area[fr][:, None]
        V[dofs.n_classes:] = means - cache.Fplus @ V
    return V.ravel()


def interpolate_multiplier(mesh, lam, degree: int = 2) -> np.ndarray:
    """Face averages of ``lam(points, face_positions)`` over fracture faces."""
    fr = mesh.fracture_faces
    q = FaceQuadrature(mesh, fr, degree)
    return q.integrate(np.asarray(lam(q.points, q.face))) / mesh.face_area[fr][:, None]


# ---------------------------------------------------------------- errors
#
# ``sampling="centroid"`` evaluates the exact field at cell or face centroids
# and weights by the measure (a discrete L² norm); ``"quadrature"`` integrates
# the exact field with a rule of the given degree. Piecewise constant
# approximations can only show superconvergence in the discrete norm.

@dataclass
class _PointRule:
    points: np.ndarray
    weights: np.ndarray
    cell: np.ndarray

    def integrate(self, values):
        return self.weights[:, None] * values if values.ndim > 1 else self.weights * values


def _cell_rule(mesh, degree, sampling):
    if sampling == "centroid":
        return _PointRule(mesh.cell_centroid, mesh.cell_volume, np.arange(mesh.n_cells))
    if sampling == "quadrature":
        return CellQuadrature(mesh, degree)
    raise ValueError(f"unknown sampling {sampling!r}")

def _sqrt_ratio(num, den):
    return math.sqrt(num / den) if den > 0 else math.sqrt(num)


def gradient_error(cache, v_full, solution, degree: int = 4, quad=None, sampling="quadrature"):
    """(absolute, relative) L² error of ∇^D v against ∇u."""
    q = quad or _cell_rule(cache.mesh, degree, sampling)
    G = cache.cell_gradient(v_full)[q.cell]
    Gx = solution.grad(q.points, q.points)
    num = float(np.sum(q.weights * np.sum((Gx - G) ** 2, axis=(1, 2))))
    den = float(np.sum(q.weights * np.sum(Gx ** 2, axis=(1, 2))))
    return math.sqrt(num), _sqrt_ratio(num, den)


def displacement_error(cache, v_full, solution, degree: int = 4, quad=None, sampling="quadrature"):
    """(absolute, relative) L² error of Π^D v against u."""
    q = quad or _cell_rule(cache.mesh, degree, sampling)
    P = cache.cell_reconstruction(v_full, q.points, q.cell)
    U = solution.u(q.points, q.points)
    num = float(np.sum(q.weights * np.sum((U - P) ** 2, axis=1)))
    den = float(np.sum(q.weights * np.sum(U ** 2, axis=1)))
    return math.sqrt(num), _sqrt_ratio(num, den)


def face_error(mesh, discrete: np.ndarray, exact, faces_mask=None, degree: int = 4, weight=None,
               sampling="quadrature"):
    """(absolute, relative) L² error of face-wise constants against ``exact``.

    ``exact(points, positions)`` returns values at quadrature points;
    ``weight`` optionally multiplies each face contribution (e.g. h_σ for the
    discrete H^{-1/2} norm).
    """
    fr = mesh.fracture_faces
    if sampling == "centroid":
        q = _PointRule(mesh.face_centroid[fr], mesh.face_area[fr], np.arange(len(fr)))
        q.face = q.cell
    else:
        q = FaceQuadrature(mesh, fr, degree)
    ex = np.asarray(exact(q.points, q.face), dtype=float)
    disc = np.asarray(discrete, dtype=float)
    if ex.ndim == 1:
        ex = ex[:, None]
        disc = disc.reshape(len(fr), 1)
    if sampling == "centroid":
        num_f = q.weights * np.sum((ex - disc[q.face]) ** 2, axis=1)
        den_f = q.weights * np.sum(ex ** 2, axis=1)
    else:
        num_f = q.integrate(np.sum((ex - disc[q.face]) ** 2, axis=1))
        den_f = q.integrate(np.sum(ex ** 2, axis=1))
    w = np.ones(len(fr)) if weight is None else np.asarray(weight, dtype=float)
    mask = np.ones(len(fr), dtype=bool) if faces_mask is None else np.asarray(faces_mask)
    num = float(np.sum((w * num_f)[mask]))
    den = float(np.sum((w * den_f)[mask]))
    return math.sqrt(num), _sqrt_ratio(num, den)


def error_norms(cache, u_full, lam, solution, degree: int = 4, tip_mask=None,
                sampling: str = "centroid") -> dict:
    """Relative errors of a solve against an analytical solution.

    Keys: ``u`` (Π^D), ``grad``, ``jump``, ``lambda_n``, ``lambda`` (L²) and
    ``lambda_mhalf`` (discrete H^{-1/2} norm); each value is relative.
    ``u`` always uses quadrature since Π^D v is affine per cell; the other
    errors follow ``sampling``.
    """
    mesh = cache.mesh
    q = CellQuadrature(mesh, degree)
    out = {"u": displacement_error(cache, u_full, solution, quad=q)[1],
           "grad": gradient_error(cache, u_full, solution, degree, sampling=sampling)[1]}
    fr = mesh.fracture_faces
    if len(fr):
        plus_c = mesh.cell_centroid[mesh.fracture_plus]
        minus_c = mesh.cell_centroid[mesh.fracture_minus]
        normals = mesh.fracture_normal
        jd = cache.face_jump(u_full)

        def jump_ex(p, k):
            return solution.jump(p, plus_c[k], minus_c[k])

        def lam_ex(p, k):
            return solution.multiplier(p, normals[k], plus_c[k])

        kw = dict(degree=degree, sampling=sampling)
        out["jump"] = face_error(mesh, jd, jump_ex, **kw)[1]
        lam_n = np.einsum("ij,ij->i", lam, normals)
        out["lambda_n"] = face_error(mesh, lam_n, lambda p, k: np.einsum("qa,qa->q", lam_ex(p, k), normals[k]),
                                     faces_mask=tip_mask, **kw)[1]
        out["lambda"] = face_error(mesh, lam, lam_ex, faces_mask=tip_mask, **kw)[1]
        out["lambda_mhalf"] = face_error(mesh, lam, lam_ex, faces_mask=tip_mask,
                                         weight=mesh.face_diameter[fr], **kw)[1]
    return out


def consistency_error(cache, solution, degree: int = 4) -> float:
    """C_D(u, I_D u) = (‖∇u - ∇^D I_D u‖² + S_D(I_D u, I_D u))^{1/2}."""
    v = interpolate_displacement(cache, solution.u)
    ge = gradient_error(cache, v, solution, degree)[0]
    return math.sqrt(ge ** 2 + cache.stabilisation(v, v))


# ---------------------------------------------------------------- dual norms

def _free_gram(cache):
    N = cache.norm_gram()
    free = cache.dofs.free
    return N[free][:, free].tocsc(), free


def _check_size(n):
    if n > DENSE_DOF_LIMIT:
        raise DiagnosticSizeError(
            f"{n} free DOFs exceed the diagnostic limit of {DENSE_DOF_LIMIT}; use a coarser mesh")


def adjoint_functional(cache, stress, f=None, plus_stress=None, degree: int = 2) -> np.ndarray:
    """Full vector of w_D(σ, ·).

    ``stress(points)`` gives σ inside cells, ``f(points)`` = -div σ (zero when
    omitted) and ``plus_stress(points, positions)`` gives σ from the plus side
    on fracture quadrature points (defaults to ``stress``).
    """
    mesh, d = cache.mesh, cache.dim
    q = CellQuadrature(mesh, degree)
    SK = q.integrate(np.asarray(stress(q.points)))
    r = -(cache.Grad.T @ SK.reshape(-1))
    if f is not None:
        FK = q.integrate(np.asarray(f(q.points)))
        r += (cache.Mean.T @ FK).ravel()
    fr = mesh.fracture_faces
    if len(fr):
        fq = FaceQuadrature(mesh, fr, degree)
        sp_ = plus_stress or (lambda p, k: stress(p))
        sn = np.einsum("qab,qb->qa", sp_(fq.points, fq.face), mesh.fracture_normal[fq.face])
        T = fq.integrate(sn)  # ∫_σ γ_n⁺ σ
        r += (cache.J.T @ T).ravel()
    return r


def dual_norm(cache, r_full) -> float:
    """sqrt(rᵀ N⁻¹ r) over the free DOFs."""
    N, free = _free_gram(cache)
    rf = r_full[free]
    if len(rf) == 0:
        return 0.0
    x = linear_solve(N, rf, symmetric=True)
    return float(math.sqrt(max(rf @ x, 0.0)))


def adjoint_consistency(cache, solution, degree: int = 2) -> float:
    """W_D(σ(u)) for an analytical solution with σ normal-continuous across Γ."""
    mesh = cache.mesh
    plus_c = mesh.cell_centroid[mesh.fracture_plus] if len(mesh.fracture_faces) else None

    def plus_stress(p, k):
        return solution.stress(p, plus_c[k])

    r = adjoint_functional(cache, lambda p: solution.stress(p, p), lambda p: solution.f(p, p),
                           plus_stress, degree)
    return dual_norm(cache, r)


# ---------------------------------------------------------------- stability constants

def infsup_constant(cache: CellOperatorCache, bubbles: bool = True) -> float:
    """Smallest generalized singular value of the fracture coupling.

    min over λ of max over v of λᵀBv / (‖v‖_{1,D} ‖λ‖_{-1/2,D}), computed as
    the square root of the smallest eigenvalue of B N⁻¹ Bᵀ x = θ M x. With
    ``bubbles=False`` the bubble columns of B are removed (nodal-only jump).
    """
    mesh, dofs, d = cache.mesh, cache.dofs, cache.dim
    fr = mesh.fracture_faces
    if len(fr) == 0:
        raise ValueError("the inf-sup constant needs at least one fracture face")
    N, free = _free_gram(cache)
    _check_size(len(free))
    area = np.repeat(mesh.face_area[fr], d)
    B = (sp.diags(area) @ cache.vector(cache.J)).tocsr()[:, free]
    if not bubbles:
        keep = free < d * dofs.n_classes
        B = B[:, keep]
        N = N[keep][:, keep]
    try:
        from sksparse.cholmod import cholesky

        factor = cholesky(N.tocsc())
        X = factor(B.T.toarray())
    except ImportError:  # pragma: no cover
        X = spla.splu(N.tocsc()).solve(B.T.toarray())
    S = B @ X
    S = 0.5 * (S + S.T)
    M = np.repeat(mesh.face_diameter[fr], d) * area
    theta = sla.eigh(S, np.diag(M), eigvals_only=True, subset_by_index=[0, 0])[0]
    return float(math.sqrt(max(theta, 0.0)))


def ablation_ratio(with_bubbles, without_bubbles, rel_zero: float = 1e-8) -> np.ndarray:
    """Per-level ratio of the inf-sup constant with and without bubbles.

    Constants below ``rel_zero`` times the bubble value count as zero and
    give an infinite ratio (the nodal-only coupling is rank deficient).
    """
    a = np.asarray(with_bubbles, dtype=float)
    b = np.asarray(without_bubbles, dtype=float)
    out = np.full(a.shape, np.inf)
    nz = b > rel_zero * a
    out[nz] = a[nz] / b[nz]
    return out


def korn_constant(cache: CellOperatorCache) -> float:
    """Smallest θ with (E + S) x = θ N x over the free DOFs.

    E is the Gram matrix of ε_D, S the unscaled stabilisation and N the Gram
    matrix of ‖·‖_{1,D}. Without Dirichlet data the common kernel of the
    three forms (translations) is removed first.
    """
    free = cache.dofs.free
    _check_size(len(free))
    E = cache.strain_gram()[free][:, free]
    S = cache.stabilisation_matrix()[free][:, free]
    N = cache.norm_gram()[free][:, free]
    L = (E + S).tocsc()
    if np.any(cache.dofs.fixed):
        if len(free) <= 3000:
            return float(sla.eigh(L.toarray(), N.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0])
        vals = spla.eigsh(L, k=1, M=N.tocsc(), sigma=0.0, which="LM", return_eigenvectors=False)
        return float(vals.min())
    if len(free) > 3000:
        raise DiagnosticSizeError("unconstrained Korn check is dense; use at most 3000 free DOFs")
    Nd = N.toarray()
    w, V = np.linalg.eigh(Nd)
    keep = w > 1e-10 * w.max()
    P = V[:, keep]
    return float(sla.eigh(P.T @ L.toarray() @ P, P.T @ Nd @ P, eigvals_only=True, subset_by_index=[0, 0])[0])


# ---------------------------------------------------------------- reports

def eoc(errors, h) -> list:
    """Orders log(e_i/e_{i+1}) / log(h_i/h_{i+1}) between consecutive levels."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(h, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))


def fitted_slope(values, h) -> float:
    """Least-squares slope of log(values) against log(h)."""
    return float(np.polyfit(np.log(h), np.log(values), 1)[0])


@dataclass
class ConvergenceReport:
    """Error table over mesh levels."""

    study: str
    family: str
    levels: list = field(default_factory=list)
    h: list = field(default_factory=list)
    n_cells: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add(self, level, h, n_cells, errors: dict) -> None:
        self.levels.append(level)
        self.h.append(float(h))
        self.n_cells.append(int(n_cells))
        for k, v in errors.items():
            self.errors.setdefault(k, []).append(float(v))

    def eoc(self) -> dict:
        return {k: eoc(v, self.h) for k, v in self.errors.items()}

    def to_csv(self, path=None) -> str:
        """CSV with one row per level; floats are written round-trip exactly."""
        keys = sorted(self.errors)
        rates = self.eoc()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "h", "n_cells"] + keys + [f"eoc_{k}" for k in keys])
        for i, lev in enumerate(self.levels):
            row = [lev, repr(self.h[i]), self.n_cells[i]] + [repr(self.errors[k][i]) for k in keys]
            row += [repr(float(rates[k][i - 1])) if i > 0 else "" for k in keys]
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text, study="", family="") -> "ConvergenceReport":
        text = path_or_text
        if "\n" not in str(path_or_text):
            with open(path_or_text, newline="") as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        keys = [k for k in header[3:] if not k.startswith("eoc_")]
        rep = cls(study, family)
        for r in body:
            lev = r[0]
            lev = int(lev) if lev.lstrip("-").isdigit() else lev
            rep.add(lev, float(r[1]), int(r[2]), {k: float(r[3 + i]) for i, k in enumerate(keys)})
        return rep

    def to_json(self, path=None) -> str:
        data = {"study": self.study, "family": self.family, "levels": self.levels, "h": self.h,
                "n_cells": self.n_cells, "errors": self.errors,
                "eoc": {k: [None if not np.isfinite(x) else float(x) for x in v] for k, v in self.eoc().items()},
                "extra": self.extra}
        text = json.dumps(data, indent=2, default=_json_default)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"cannot serialise {type(obj)}")
