"""Convergence studies: the inclined crack in 2D and the manufactured 3D solution."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .assembly import Material, assemble_system
from .contact import SolverOptions, kkt_report, semismooth_newton
from .dofs import build_dof_map
from .generators import (generate_cartesian, generate_inclined_fracture_mesh, generate_perturbed_hexa,
                         generate_tet)
from .reconstruction import CellOperatorCache
from .solutions import Compression2D, Manufactured3D
from .verification import ConvergenceReport, error_norms, face_error
from .vtu import export_vtu

log = logging.getLogger(__name__)

FAMILIES = {
    "compression2d": ("triangular2d",),
    "manufactured3d": ("cartesian", "tet", "hexa_cut", "hexa_bary"),
}
DEFAULT_LEVELS = {
    "compression2d": [100, 200],
    "manufactured3d": [8, 16],
}
# desk-scale guard on the number of cells of a single level
MAX_CELLS = 200_000

CUBE = [(-1.0, 1.0)] * 3
FRACTURE_X0 = [{"polygon": [[0, -1, -1], [0, 1, -1], [0, 1, 1], [0, -1, 1]]}]


@dataclass
class StudyConfig:
    study: str
    family: str | None = None
    levels: list = field(default_factory=list)
    solver: SolverOptions = field(default_factory=SolverOptions)
    out_dir: Path | None = None
    seed: int = 0
    sampling: str = "centroid"
    vtu: bool = False
    max_cells: int = MAX_CELLS
    slip_profile: str = "printed"  # or "elliptic"; only used by compression2d

    def __post_init__(self):
        if self.study not in FAMILIES:
            raise ValueError(f"unknown study {self.study!r}; choose from {sorted(FAMILIES)}")
        if self.family is None:
            self.family = FAMILIES[self.study][0]
        if self.family not in FAMILIES[self.study]:
            raise ValueError(f"family {self.family!r} is not valid for {self.study}: {FAMILIES[self.study]}")
        if not self.levels:
            self.levels = list(DEFAULT_LEVELS[self.study])
        self.levels = [int(x) for x in self.levels]
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("levels must be strictly increasing")
        if self.out_dir is not None:
            self.out_dir = Path(self.out_dir)
        if self.slip_profile not in ("printed", "elliptic"):
            raise ValueError(f"unknown slip profile {self.slip_profile!r}")


def _expected_cells(config: StudyConfig, level: int) -> int:
    if config.study == "manufactured3d":
        return level ** 3 * (6 if config.family == "tet" else 1)
    return 0  # the 2D triangulator decides; checked after meshing


def _guard(config, n_cells, level):
    if n_cells > config.max_cells:
        raise ValueError(f"level {level} has {n_cells} cells, above the desk limit {config.max_cells}; "
                         "raise max_cells explicitly to run it")


# ---------------------------------------------------------------- 2D crack

def compression_mesh(n_faces: int):
    """Mesh and rigid-mode point constraints of the inclined crack problem.

    u_x is fixed at the midpoints of the top and bottom sides and u_y at the
    midpoints of the left and right sides, which removes both translations
    and the rotation without loading the symmetric solution.
    """
    mesh, markers = generate_inclined_fracture_mesh(n_faces)
    constraints = [(markers["top_mid"], 0), (markers["bottom_mid"], 0),
                   (markers["left_mid"], 1), (markers["right_mid"], 1)]
    return mesh, constraints


def run_compression2d(config: StudyConfig, reference: Compression2D | None = None) -> ConvergenceReport:
    """Inclined crack under remote uniaxial compression.

    Errors: relative L² error of the slip |[[u]]_τ| against the reference
    profile selected by ``config.slip_profile``, and of λ_n against its constant value on faces at least 5% of
    the crack length away from both tips.
    """
    ref = reference or Compression2D(profile=config.slip_profile)
    report = ConvergenceReport("compression2d", config.family)
    report.extra = {"lambda_n_mid_max_dev": [], "peak_slip": [], "iterations": [], "kkt": [],
                    "status": [], "seconds": []}
    tangent = np.array([np.cos(ref.psi), np.sin(ref.psi)])
    tractions = {"xmin": (ref.sigma, 0.0), "xmax": (-ref.sigma, 0.0)}
    for level in config.levels:
        t0 = time.perf_counter()
        mesh, constraints = compression_mesh(level)
        _guard(config, mesh.n_cells, level)
        dofs = build_dof_map(mesh, None, constraints)
        cache = CellOperatorCache(mesh, dofs)
        material = Material.from_young(ref.E, ref.nu, mesh.n_cells, plane_strain=True)
        system = assemble_system(cache, material, ref.g, tractions=tractions)
        u, lam, rep = semismooth_newton(system, config.solver)
        lam2 = lam.reshape(-1, 2)
        normals = system.normals
        jump = system.jump(u)
        jn = np.einsum("ij,ij->i", jump, normals)
        slip = np.linalg.norm(jump - jn[:, None] * normals, axis=1)
        lam_n = np.einsum("ij,ij->i", lam2, normals)

        fc = mesh.face_centroid[mesh.fracture_faces]
        s = fc @ tangent
        away = np.abs(s) <= ref.ell - 0.05 * 2 * ref.ell
        middle = np.abs(s) <= 0.6 * ref.ell

        def exact_slip(p, k):
            return ref.slip(p @ tangent + ref.ell)

        def exact_ln(p, k):
            return np.full(len(p), ref.lambda_n)

        kw = dict(sampling=config.sampling)
        errors = {
            "slip": face_error(mesh, slip, exact_slip, **kw)[1],
            "lambda_n": face_error(mesh, lam_n, exact_ln, faces_mask=away, **kw)[1],
            "lambda_n_mhalf": face_error(mesh, lam_n, exact_ln, faces_mask=away,
                                         weight=mesh.face_diameter[mesh.fracture_faces], **kw)[1],
        }
        h = float(mesh.face_diameter[mesh.fracture_faces].max())
        report.add(level, h, mesh.n_cells, errors)
        kkt = kkt_report(system, u, lam, config.solver)
        report.extra["lambda_n_mid_max_dev"].append(float(np.abs(lam_n[middle] / ref.lambda_n - 1).max()))
        report.extra["peak_slip"].append(float(slip.max()))
        report.extra["iterations"].append(rep.iterations)
        report.extra["kkt"].append(kkt["max"])
        report.extra["status"].append(rep.status_counts)
        report.extra["seconds"].append(time.perf_counter() - t0)
        log.info("compression2d level %s: %d cells, %s, %.1fs", level, mesh.n_cells, errors,
                 report.extra["seconds"][-1])
        if not rep.converged:
            log.warning("Newton did not converge on level %s", level)
        if config.out_dir is not None and config.vtu:
            _dump(config, f"compression2d_{level}", mesh, cache, system, u, lam2)
    _save(config, report)
    return report


# ---------------------------------------------------------------- 3D manufactured

def manufactured_mesh(family: str, n: int, seed: int = 0):
    if family == "cartesian":
        return generate_cartesian(n, box=CUBE, fractures=FRACTURE_X0)
    if family == "tet":
        return generate_tet(n, box=CUBE, fractures=FRACTURE_X0)
    if family in ("hexa_cut", "hexa_bary"):
        return generate_perturbed_hexa(n, box=CUBE, repair=family.split("_")[1], seed=seed,
                                       fractures=FRACTURE_X0)
    raise ValueError(f"unknown 3D family {family!r}")


def run_manufactured3d(config: StudyConfig, solution: Manufactured3D | None = None) -> ConvergenceReport:
    """Tresca manufactured solution on the unit cube pair with Dirichlet data."""
    sol = solution or Manufactured3D(mu=1.0, lam=1.0, g=1.0)
    report = ConvergenceReport("manufactured3d", config.family)
    report.extra = {"normal_jump_max": [], "iterations": [], "kkt": [], "status": [], "seconds": []}
    previous = None
    for level in config.levels:
        _guard(config, _expected_cells(config, level), level)
        t0 = time.perf_counter()
        mesh = manufactured_mesh(config.family, level, config.seed)
        dofs = build_dof_map(mesh, "all")
        dofs.set_prescribed(sol.u)
        cache = CellOperatorCache(mesh, dofs)
        material = Material.constant(sol.mu, sol.lam_lame, mesh.n_cells)
        system = assemble_system(cache, material, sol.g, f=lambda x, cells: sol.f(x, x))
        centroids = mesh.face_centroid[mesh.fracture_faces]
        u, lam, rep = semismooth_newton(system, config.solver, lam0=_warm_start(previous, centroids))
        full = dofs.expand(u)
        lam2 = lam.reshape(-1, 3)
        previous = (centroids, lam2)
        errs = error_norms(cache, full, lam2, sol, sampling=config.sampling)
        errors = {k: errs[k] for k in ("u", "jump", "grad", "lambda_n")}
        report.add(level, mesh.n_cells ** (-1.0 / 3.0), mesh.n_cells, errors)
        kkt = kkt_report(system, u, lam, config.solver)
        report.extra["normal_jump_max"].append(float(np.abs(cache.jump_normal(full)).max()))
        report.extra["iterations"].append(rep.iterations)
        report.extra["kkt"].append(kkt["max"])
        report.extra["status"].append(rep.status_counts)
        report.extra["seconds"].append(time.perf_counter() - t0)
        log.info("manufactured3d %s level %s: %d cells, %s, %.1fs", config.family, level, mesh.n_cells,
                 errors, report.extra["seconds"][-1])
        if config.out_dir is not None and config.vtu:
            _dump(config, f"manufactured3d_{config.family}_{level}", mesh, cache, system, u, lam2)
    _save(config, report)
    return report


def _warm_start(previous, centroids):
    """Initial multiplier taken from the nearest fracture face of the previous level.

    The converged solution does not depend on the initial guess; a good
    active set only cuts the number of Newton iterations on fine levels.
    """
    if previous is None:
        return None
    _, idx = cKDTree(previous[0]).query(centroids)
    return previous[1][idx]


def run_study(config: StudyConfig) -> ConvergenceReport:
    if config.study == "compression2d":
        return run_compression2d(config)
    return run_manufactured3d(config)


def _dump(config, stem, mesh, cache, system, u, lam2):
    config.out_dir.mkdir(parents=True, exist_ok=True)
    export_vtu(mesh, {"cache": cache, "u": system.full(u), "jump": system.jump(u), "lambda": lam2},
               config.out_dir / stem)


def _save(config, report):
    if config.out_dir is None:
        return
    config.out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{report.study}_{report.family}"
    report.to_csv(config.out_dir / f"{stem}.csv")
    report.to_json(config.out_dir / f"{stem}.json")


# ---------------------------------------------------------------- checks

@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _rates(report, key):
    return [float(x) for x in report.eoc()[key]]


def study_checks(report: ConvergenceReport, tol: float = 1e-10) -> list:
    """Pass/fail checks of a finished study against its target thresholds."""
    checks = [Check("kkt", max(report.extra["kkt"]) <= 10 * tol,
                    f"max violation {max(report.extra['kkt']):.2e} (limit {10 * tol:.0e})")]
    multi = len(report.levels) > 1
    if report.study == "compression2d":
        dev = report.extra["lambda_n_mid_max_dev"]
        checks.append(Check("lambda_n_middle", max(dev) <= 0.03,
                            "max relative deviation per level " + ", ".join(f"{x:.4f}" for x in dev)))
        if multi:
            rs, rl = _rates(report, "slip"), _rates(report, "lambda_n")
            e = report.errors["lambda_n"]
            checks.append(Check("eoc_slip", min(rs) >= 0.8, "EOC " + ", ".join(f"{x:.3f}" for x in rs)))
            checks.append(Check("eoc_lambda_n", min(rl) >= 1.0 and all(b < a for a, b in zip(e, e[1:])),
                                "EOC " + ", ".join(f"{x:.3f}" for x in rl)))
        return checks
    jn = max(report.extra["normal_jump_max"])
    checks.append(Check("normal_jump", jn <= 1e-12, f"max |[[u]]_n| {jn:.3e}"))
    if not multi:
        return checks
    if report.family == "cartesian":
        bounds = {"u": (1.8, np.inf), "jump": (1.8, np.inf), "grad": (1.7, np.inf), "lambda_n": (1.2, np.inf)}
    elif report.family == "tet":
        bounds = {"grad": (0.8, 1.4), "lambda_n": (0.8, 1.4)}
    else:
        bounds = {}
    for key, (lo, hi) in bounds.items():
        r = _rates(report, key)
        checks.append(Check(f"eoc_{key}", all(lo <= x <= hi for x in r),
                            "EOC " + ", ".join(f"{x:.3f}" for x in r) + f" (range [{lo}, {hi}])"))
    return checks
