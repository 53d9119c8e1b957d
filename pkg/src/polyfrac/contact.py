"""Semi-smooth Newton solver for the Tresca contact projection equations.

Per fracture face the multiplier satisfies

    λ_n = [λ_n + β_n [[u]]_n]_+        λ_τ = proj_g(λ_τ + β_τ [[u]]_τ)

with x = λ + β [[u]] the projection argument. A face is *open* when x_n <= 0,
*slip* when |x_τ| > g and *stick* otherwise.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import SaddleSystem
from .dofs import project_ball, split
from .reconstruction import tangent_frame

log = logging.getLogger(__name__)

OPEN, STICK, SLIP = 0, 1, 2
STATUS_NAMES = {OPEN: "open", STICK: "stick", SLIP: "slip"}
KINK_TOL = 1e-8

try:  # CHOLMOD is much faster than SuperLU on the 3D SPD systems
    from sksparse.cholmod import cholesky as _cholmod
except ImportError:  # pragma: no cover - exercised only without scikit-sparse
    _cholmod = None


class LinearSolveError(RuntimeError):
    """Direct factorisation failed or the residual check was not met."""


@dataclass
class SolverOptions:
    beta_n: object = None
    beta_t: object = None
    tol: float = 1e-10
    max_iter: int = 50
    linesearch: bool = False
    method: str = "condensed"  # or "saddle"

    def betas(self, system: SaddleSystem):
        """Face-wise β_n, β_τ; default (2μ_K+λ_K)/h_σ on the plus cell."""
        default = system.beta_scale / system.h_face
        bn = default if self.beta_n is None else np.broadcast_to(np.asarray(self.beta_n, float), default.shape)
        bt = bn if self.beta_t is None else np.broadcast_to(np.asarray(self.beta_t, float), default.shape)
        return np.asarray(bn, dtype=float), np.asarray(bt, dtype=float)


@dataclass
class NewtonState:
    u: np.ndarray
    lam: np.ndarray
    status: np.ndarray
    normal_contact: np.ndarray
    res_u: float
    res_lam: float
    iteration: int


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    res_u: float
    res_lam: float
    status_counts: dict
    history: list = field(default_factory=list)
    linear_solves: int = 0
    linear_time: float = 0.0
    max_linear_residual: float = 0.0
    method: str = "condensed"


# ---------------------------------------------------------------- frames

def face_frames(normals: np.ndarray) -> np.ndarray:
    """Orthonormal frames with rows (n, t1[, t2]) per face."""
    nF, d = normals.shape
    R = np.zeros((nF, d, d))
    R[:, 0] = normals
    if d == 2:
        R[:, 1, 0] = -normals[:, 1]
        R[:, 1, 1] = normals[:, 0]
        return R
    if nF:
        R[:, 1:] = tangent_frame(normals)
    return R


def projection_argument(lam, jump, normals, beta_n, beta_t):
    ln, lt = split(lam, normals)
    jn, jt = split(jump, normals)
    return ln + beta_n * jn, lt + beta_t[:, None] * jt


def face_status(lam, jump, normals, g, beta_n, beta_t) -> np.ndarray:
    """Open / stick / slip classification from the projection arguments."""
    xn, xt = projection_argument(lam, jump, normals, beta_n, beta_t)
    status = np.where(np.linalg.norm(xt, axis=1) > g, SLIP, STICK)
    return np.where(xn <= 0, OPEN, status)


def contact_residual(lam, jump, normals, g, beta_n, beta_t) -> np.ndarray:
    """λ - P(λ + β[[u]]) per face (global components, unscaled)."""
    xn, xt = projection_argument(lam, jump, normals, beta_n, beta_t)
    proj = np.maximum(xn, 0.0)[:, None] * normals + project_ball(xt, g)
    return lam - proj


def residual(system: SaddleSystem, u: np.ndarray, lam: np.ndarray, beta_n=None, beta_t=None):
    """(r_u, r_λ) with r_λ scaled by the face measures."""
    if beta_n is None:
        beta_n, beta_t = SolverOptions().betas(system)
    elif beta_t is None:
        beta_t = beta_n
    bn = np.broadcast_to(beta_n, system.area.shape)
    bt = np.broadcast_to(beta_t, system.area.shape)
    r_u = system.A @ u + system.B.T @ lam.ravel() - system.f_vec
    r_l = contact_residual(lam, system.jump(u), system.normals, system.g, bn, bt)
    return r_u, system.area[:, None] * r_l


def _relative_residuals(system, u, lam, bn, bt):
    r_u, r_l = residual(system, u, lam, bn, bt)
    fscale = max(np.linalg.norm(system.f_vec), np.linalg.norm(system.A @ u), 1e-300)
    j = system.jump(u)
    cscale = max(np.linalg.norm(system.area[:, None] * lam),
                 np.linalg.norm(system.area[:, None] * bn[:, None] * j),
                 np.linalg.norm(system.area * system.g), 1e-300)
    return np.linalg.norm(r_u) / fscale, np.linalg.norm(r_l) / cscale


# ---------------------------------------------------------------- linear algebra

def linear_solve(M, rhs, symmetric: bool = False, check: float = 1e-10):
    """Direct sparse solve with a relative residual check.

    ``symmetric`` selects a Cholesky factorisation (CHOLMOD when available);
    otherwise SuperLU is used.
    """
    M = sp.csc_matrix(M)
    rhs = np.asarray(rhs, dtype=float)
    if M.shape[0] == 0:
        return np.zeros(0)
    try:
        if symmetric and _cholmod is not None:
            x = _cholmod(M)(rhs)
        else:
            x = spla.splu(M).solve(rhs)
    except Exception as exc:  # factorisation breakdown
        raise LinearSolveError(f"factorisation failed: {exc}") from exc
    nb = np.linalg.norm(rhs)
    res = np.linalg.norm(M @ x - rhs) / (nb if nb > 0 else 1.0)
    if not np.isfinite(res) or res > check:
        raise LinearSolveError(f"linear residual {res:.3e} above {check:.1e}")
    return x


# ---------------------------------------------------------------- Newton steps

class _Layout:
    """Positions of bubble and nodal DOFs inside the free numbering."""

    def __init__(self, system: SaddleSystem):
        dofs = system.dofs
        d, nF = dofs.dim, system.n_faces
        full = d * dofs.n_classes + np.arange(nF * d)
        self.bpos = np.searchsorted(dofs.free, full).reshape(nF, d)
        is_b = np.zeros(dofs.n_free, dtype=bool)
        is_b[self.bpos.ravel()] = True
        self.nodal = np.flatnonzero(~is_b)
        self.R = face_frames(system.normals)
        inv_area = np.repeat(1.0 / system.area, d)
        self.J = sp.diags(inv_area) @ system.B  # jump map rows d*k+a
        self.Jnod = self.J[:, self.nodal].tocsr()
        self.j0 = system.jump0 * inv_area


def _block_diag(blocks: np.ndarray) -> sp.csr_matrix:
    nF, d, _ = blocks.shape
    rows = (np.arange(nF)[:, None, None] * d + np.arange(d)[None, :, None]).repeat(d, axis=2)
    cols = (np.arange(nF)[:, None, None] * d + np.arange(d)[None, None, :]).repeat(d, axis=1)
    return sp.csr_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(nF * d, nF * d))


def _linearisation(lam, jump, normals, g, bn, bt, R):
    """Constraint mask and slip data of the generalized Jacobian.

    Returns (constrained (nF, d) in local components of the returned frames,
    T blocks (nF, d, d) global, c (nF, d) global, contact, slip, frames) such
    that the unconstrained components obey λ = T [[u]] + c after the Newton
    step.
    """
    nF, d = lam.shape
    xn, xt = projection_argument(lam, jump, normals, bn, bt)
    nxt = np.linalg.norm(xt, axis=1)
    contact = xn > 0
    slip = nxt > g
    constrained = np.zeros((nF, d), dtype=bool)
    constrained[:, 0] = contact
    constrained[:, 1:] = ~slip[:, None]
    T = np.zeros((nF, d, d))
    c = np.zeros((nF, d))
    frames = R
    sl = np.flatnonzero(slip & (g > 0))
    if len(sl):
        xhat = xt[sl] / nxt[sl, None]
        c[sl] = g[sl, None] * xhat
        if d == 3:
            excess = nxt[sl] - g[sl]
            # Near the stick/slip kink the slip block g/(|x_τ|-g) blows up. Its
            # limit freezes the tangential jump orthogonal to x_τ while slip along
            # x_τ continues, so those faces get a frame (n, x̂, n×x̂) with the
            # third component constrained instead of the stiff block.
            kink = excess <= KINK_TOL * g[sl]
            soft = sl[~kink]
            if len(soft):
                xs = xhat[~kink]
                Pt = np.eye(d)[None] - np.einsum("ki,kj->kij", normals[soft], normals[soft])
                Pperp = Pt - np.einsum("ki,kj->kij", xs, xs)
                T[soft] = (bt[soft] * g[soft] / excess[~kink])[:, None, None] * Pperp
            hard = sl[kink]
            if len(hard):
                frames = R.copy()
                frames[hard, 1] = xhat[kink]
                frames[hard, 2] = np.cross(normals[hard], xhat[kink])
                constrained[hard, 2] = True
    return constrained, T, c, contact, slip, frames


def _condensed_step(system, layout, lam, u, bn, bt, stats):
    """Exact solve of the linearised problem by eliminating constrained bubbles."""
    d, nF = system.dim, system.n_faces
    jump = system.jump(u)
    constrained, T, c, _, _, R = _linearisation(lam, jump, system.normals, system.g, bn, bt, layout.R)
    Tb = _block_diag(T)
    K = (system.A + layout.J.T @ sp.diags(np.repeat(system.area, d)) @ Tb @ layout.J).tocsr()
    rhs = system.f_vec - system.B.T @ (Tb @ layout.j0 + c.ravel())

    Pc = np.einsum("kmi,km,kmj->kij", R, constrained.astype(float), R)
    Pcb = _block_diag(Pc)
    n = system.dofs.n_free
    nn = len(layout.nodal)
    # columns: free nodal DOFs, then unconstrained local bubble directions
    uk, um = np.nonzero(~constrained)
    rows = [layout.nodal, ]
    cols = [np.arange(nn)]
    vals = [np.ones(nn)]
    cpl = (-Pcb @ layout.Jnod).tocoo()
    rows.append(layout.bpos.ravel()[cpl.row])
    cols.append(cpl.col)
    vals.append(cpl.data)
    ncol = nn + len(uk)
    brow = layout.bpos[uk]  # (m, d)
    rows.append(brow.ravel())
    cols.append(np.repeat(nn + np.arange(len(uk)), d))
    vals.append(R[uk, um].ravel())
    Q = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, ncol))
    q0 = np.zeros(n)
    q0[layout.bpos.ravel()] = -(Pcb @ layout.j0)

    Kr = (Q.T @ K @ Q).tocsc()
    rr = Q.T @ (rhs - K @ q0)
    t0 = time.perf_counter()
    z = linear_solve(Kr, rr, symmetric=True)
    stats["time"] += time.perf_counter() - t0
    stats["count"] += 1
    nb = max(np.linalg.norm(rr), 1e-300)
    stats["res"] = max(stats["res"], np.linalg.norm(Kr @ z - rr) / nb)
    u_new = Q @ z + q0

    jump_new = system.jump(u_new)
    lam_known = np.einsum("kij,kj->ki", T, jump_new) + c
    res_b = (rhs - K @ u_new)[layout.bpos] / system.area[:, None]
    lam_c = np.einsum("kij,kj->ki", Pc, res_b)
    return u_new, lam_known + lam_c


def _saddle_step(system, layout, lam, u, bn, bt, stats):
    """Newton update from the full generalized Jacobian (SuperLU)."""
    d, nF = system.dim, system.n_faces
    normals = system.normals
    jump = system.jump(u)
    xn, xt = projection_argument(lam, jump, normals, bn, bt)
    nxt = np.linalg.norm(xt, axis=1)
    NN = np.einsum("ki,kj->kij", normals, normals)
    Pt = np.eye(d)[None] - NN
    M = (xn > 0)[:, None, None] * NN
    stick = (nxt <= system.g) & (system.g > 0)
    M = M + stick[:, None, None] * Pt
    sl = np.flatnonzero((nxt > system.g) & (system.g > 0))
    if len(sl):
        xhat = xt[sl] / nxt[sl, None]
        M[sl] += (system.g[sl] / nxt[sl])[:, None, None] * (Pt[sl] - np.einsum("ki,kj->kij", xhat, xhat))
    Bbeta = bn[:, None, None] * NN + bt[:, None, None] * Pt
    Mb = _block_diag(M)
    area = np.repeat(system.area, d)
    C_u = -(Mb @ _block_diag(Bbeta) @ system.B)
    C_l = sp.diags(area) @ (sp.identity(nF * d) - Mb)
    Jac = sp.bmat([[system.A, system.B.T], [C_u, C_l]], format="csc")
    r_u, r_l = residual(system, u, lam, bn, bt)
    rhs = -np.concatenate([r_u, r_l.ravel()])
    t0 = time.perf_counter()
    delta = linear_solve(Jac, rhs, symmetric=False)
    stats["time"] += time.perf_counter() - t0
    stats["count"] += 1
    n = system.dofs.n_free
    return u + delta[:n], lam + delta[n:].reshape(nF, d)


def semismooth_newton(system: SaddleSystem, options: SolverOptions | None = None,
                      u0=None, lam0=None):
    """Solve the discrete contact problem; returns (u_free, λ, SolveReport)."""
    opts = options or SolverOptions()
    if opts.method not in ("condensed", "saddle"):
        raise ValueError(f"unknown method {opts.method!r}")
    bn, bt = opts.betas(system)
    if np.any(bn <= 0) or np.any(bt <= 0):
        raise ValueError("β must be positive")
    d, nF = system.dim, system.n_faces
    u = np.zeros(system.dofs.n_free) if u0 is None else np.array(u0, dtype=float)
    lam = np.zeros((nF, d)) if lam0 is None else np.array(lam0, dtype=float).reshape(nF, d)
    layout = _Layout(system)
    stats = {"time": 0.0, "count": 0, "res": 0.0}
    step = _condensed_step if opts.method == "condensed" else _saddle_step
    history = []
    ru, rl = _relative_residuals(system, u, lam, bn, bt)
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        u_new, lam_new = step(system, layout, lam, u, bn, bt, stats)
        if opts.linesearch:
            merit = max(ru, rl)
            alpha = 1.0
            while alpha > 1e-4:
                ut = u + alpha * (u_new - u)
                lt = lam + alpha * (lam_new - lam)
                a, b = _relative_residuals(system, ut, lt, bn, bt)
                if max(a, b) < (1 - 1e-4 * alpha) * merit or merit == 0:
                    break
                alpha *= 0.5
            u_new, lam_new = ut, lt
        u, lam = u_new, lam_new
        ru, rl = _relative_residuals(system, u, lam, bn, bt)
        status = face_status(lam, system.jump(u), system.normals, system.g, bn, bt)
        history.append({"iteration": it, "res_u": ru, "res_lam": rl,
                        "n_open": int((status == OPEN).sum()), "n_stick": int((status == STICK).sum()),
                        "n_slip": int((status == SLIP).sum())})
        log.info("newton %d: res_u=%.3e res_lam=%.3e", it, ru, rl)
        if max(ru, rl) <= opts.tol:
            converged = True
            break
    status = face_status(lam, system.jump(u), system.normals, system.g, bn, bt)
    report = SolveReport(
        converged=converged, iterations=it, res_u=ru, res_lam=rl,
        status_counts={STATUS_NAMES[s]: int((status == s).sum()) for s in STATUS_NAMES},
        history=history, linear_solves=stats["count"], linear_time=stats["time"],
        max_linear_residual=stats["res"], method=opts.method,
    )
    return u, lam, report


def newton_state(system: SaddleSystem, u, lam, options: SolverOptions | None = None, iteration: int = 0):
    bn, bt = (options or SolverOptions()).betas(system)
    jump = system.jump(u)
    xn, _ = projection_argument(lam, jump, system.normals, bn, bt)
    ru, rl = _relative_residuals(system, u, lam, bn, bt)
    return NewtonState(u=u, lam=lam, status=face_status(lam, jump, system.normals, system.g, bn, bt),
                       normal_contact=xn > 0, res_u=ru, res_lam=rl, iteration=iteration)


# ---------------------------------------------------------------- KKT check

def check_kkt(jump: np.ndarray, lam: np.ndarray, normals: np.ndarray, g, lam_scale=None,
              jump_scale=None) -> dict:
    """Face-wise violations of the discrete Tresca conditions.

    Returned entries are relative: multiplier terms are divided by
    ``lam_scale`` (default: max of g and |λ|), jump terms by ``jump_scale``
    (default: max |[[u]]|, or 1 when all jumps vanish), products by both.
    The tangential complementarity uses λ = -T, i.e. λ_τ·[[u]]_τ = g|[[u]]_τ|.
    """
    lam = np.atleast_2d(lam)
    jump = np.atleast_2d(jump)
    g = np.broadcast_to(np.asarray(g, dtype=float), lam.shape[:1])
    ln, lt = split(lam, normals)
    jn, jt = split(jump, normals)
    if lam_scale is None:
        lam_scale = max(np.abs(lam).max(initial=0.0), g.max(initial=0.0), 1e-300)
    if jump_scale is None:
        jm = np.abs(jump).max(initial=0.0)
        jump_scale = jm if jm > 0 else 1.0
    njt = np.linalg.norm(jt, axis=1)
    per_face = np.column_stack([
        np.maximum(-ln, 0.0) / lam_scale,
        np.maximum(jn, 0.0) / jump_scale,
        np.abs(ln * jn) / (lam_scale * jump_scale),
        np.maximum(np.linalg.norm(lt, axis=1) - g, 0.0) / lam_scale,
        np.abs(np.einsum("ij,ij->i", lt, jt) - g * njt) / (lam_scale * jump_scale),
    ])
    names = ["normal_sign", "nonpenetration", "normal_complementarity", "friction_bound",
             "tangential_complementarity"]
    out = {name: float(per_face[:, i].max(initial=0.0)) for i, name in enumerate(names)}
    out["max"] = max(out.values())
    out["per_face"] = per_face
    return out


def kkt_report(system: SaddleSystem, u_free: np.ndarray, lam: np.ndarray,
               options: SolverOptions | None = None) -> dict:
    """check_kkt on a solved system with jumps measured in stress units.

    The jump scale is lam_scale / β (median face value), so that a jump of
    size j is compared with the multiplier change β j it would produce.
    """
    options = options or SolverOptions()
    lam2 = np.asarray(lam, dtype=float).reshape(-1, system.dim)
    bn, _ = options.betas(system)
    lam_scale = max(np.abs(lam2).max(initial=0.0), system.g.max(initial=0.0), 1e-300)
    beta = float(np.median(bn)) if len(bn) else 1.0
    return check_kkt(system.jump(u_free), lam2, system.normals, system.g,
                     lam_scale=lam_scale, jump_scale=lam_scale / beta)
