"""Command line entry point: ``polyfrac run | mesh gen | verify``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .contact import SolverOptions
from .dofs import build_dof_map
from .mesh import from_json, to_json
from .reconstruction import CellOperatorCache
from .solutions import Manufactured3D
from .studies import FAMILIES, Check, StudyConfig, compression_mesh, manufactured_mesh, run_study, study_checks
from .verification import (ablation_ratio, adjoint_consistency, consistency_error, fitted_slope,
                           infsup_constant, korn_constant)


def _levels(text: str) -> list:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyfrac", description="Polytopal contact mechanics on fractured media.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a convergence study")
    run.add_argument("study", choices=sorted(FAMILIES))
    run.add_argument("--family", default=None)
    run.add_argument("--levels", type=_levels, default=None,
                     help="comma separated: fracture faces (2D) or cells per axis (3D)")
    run.add_argument("--out", type=Path, default=None)
    run.add_argument("--beta", type=float, default=None, help="constant β for both components")
    run.add_argument("--tol", type=float, default=1e-10)
    run.add_argument("--max-iter", type=int, default=50)
    run.add_argument("--linesearch", action="store_true", help="backtracking on the residual norm")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--method", choices=["condensed", "saddle"], default="condensed")
    run.add_argument("--vtu", action="store_true", help="also write VTU files for each level")
    run.add_argument("--sampling", choices=["centroid", "quadrature"], default="centroid")
    run.add_argument("--slip-profile", choices=["printed", "elliptic"], default="printed",
                     help="reference slip profile of compression2d")

    mesh = sub.add_parser("mesh", help="mesh utilities")
    msub = mesh.add_subparsers(dest="mesh_command", required=True)
    gen = msub.add_parser("gen", help="generate a mesh and write it as JSON")
    gen.add_argument("--family", required=True, choices=["cartesian", "tet", "hexa_cut", "hexa_bary", "triangular2d"])
    gen.add_argument("--n", type=int, required=True,
                     help="cells per axis (3D) or number of fracture faces (triangular2d)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True)

    ver = sub.add_parser("verify", help="stability and consistency diagnostics")
    ver.add_argument("check", choices=["infsup", "korn", "consistency"])
    ver.add_argument("--mesh", type=Path, nargs="+", required=True,
                     help="one or more mesh JSON files, coarse to fine")
    return p


def _cache(mesh):
    dofs = build_dof_map(mesh, "all")
    return CellOperatorCache(mesh, dofs)


def cmd_run(args) -> list:
    solver = SolverOptions(beta_n=args.beta, beta_t=args.beta, tol=args.tol, max_iter=args.max_iter,
                           linesearch=args.linesearch, method=args.method)
    config = StudyConfig(args.study, args.family, args.levels or [], solver, args.out, args.seed,
                         sampling=args.sampling, vtu=args.vtu, slip_profile=args.slip_profile)
    report = run_study(config)
    print(report.to_csv(), end="")
    return study_checks(report, args.tol)


def cmd_mesh(args) -> list:
    if args.family == "triangular2d":
        mesh, _ = compression_mesh(args.n)
    else:
        mesh = manufactured_mesh(args.family, args.n, args.seed)
    to_json(mesh, args.out)
    print(f"{args.out}: {mesh.n_cells} cells, {len(mesh.fracture_faces)} fracture faces")
    return []


def cmd_verify(args) -> list:
    meshes = [from_json(p) for p in args.mesh]
    values, hs, ablated = [], [], []
    for path, mesh in zip(args.mesh, meshes):
        cache = _cache(mesh)
        hs.append(mesh.h)
        if args.check == "infsup":
            val = infsup_constant(cache)
            ablated.append(infsup_constant(cache, bubbles=False))
        elif args.check == "korn":
            val = korn_constant(cache)
        else:
            if mesh.dim != 3:
                raise SystemExit("consistency check uses the 3D manufactured solution; pass 3D meshes")
            sol = Manufactured3D()
            val = (consistency_error(cache, sol), adjoint_consistency(cache, sol))
        values.append(val)
        extra = f" without bubbles={ablated[-1]}" if ablated else ""
        print(f"{path}: h={mesh.h:.4g} {args.check}={val}{extra}")
    if args.check == "consistency":
        checks = []
        if len(values) > 1:
            for i, name in enumerate(["C_D", "W_D"]):
                slope = fitted_slope([v[i] for v in values], hs)
                checks.append(Check(f"slope_{name}", slope >= 0.9, f"fitted slope {slope:.3f}"))
        return checks
    vals = np.asarray(values, dtype=float)
    checks = [Check(f"{args.check}_positive", bool(np.all(vals > 0)), f"min {vals.min():.4g}")]
    if len(vals) > 1:
        ratio = vals.max() / vals.min()
        checks.append(Check(f"{args.check}_uniform", ratio <= 2.0, f"max/min {ratio:.3f}"))
    if ablated:
        deg = ablation_ratio(vals, ablated)
        checks.append(Check("infsup_bubble_ablation", bool(np.all(deg >= 4.0)),
                            "with/without bubbles per level " + ", ".join(f"{x:.3g}" for x in deg)))
    return checks


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "mesh": cmd_mesh, "verify": cmd_verify}[args.command]
    checks = handler(args)
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
