import json

import numpy as np
import pytest

from polyfrac.cli import build_parser, main
from polyfrac.mesh import from_json
from polyfrac.studies import Check, StudyConfig, compression_mesh, manufactured_mesh, run_study, study_checks
from polyfrac.verification import ConvergenceReport


def test_config_validation():
    with pytest.raises(ValueError):
        StudyConfig("unknown")
    with pytest.raises(ValueError):
        StudyConfig("manufactured3d", family="triangular2d")
    with pytest.raises(ValueError):
        StudyConfig("manufactured3d", levels=[8, 4])
    with pytest.raises(ValueError):
        StudyConfig("compression2d", slip_profile="parabolic")
    cfg = StudyConfig("compression2d")
    assert cfg.family == "triangular2d" and cfg.levels == [100, 200] and cfg.slip_profile == "printed"


def test_desk_guard():
    with pytest.raises(ValueError, match="desk limit"):
        run_study(StudyConfig("manufactured3d", "cartesian", [64]))


def test_compression_mesh_constraints():
    mesh, constraints = compression_mesh(20)
    assert len(mesh.fracture_faces) == 20
    assert sorted(c for _, c in constraints) == [0, 0, 1, 1]


@pytest.mark.parametrize("family", ["cartesian", "tet", "hexa_cut", "hexa_bary"])
def test_manufactured_mesh_families(family):
    m = manufactured_mesh(family, 2, seed=1)
    assert m.dim == 3
    assert m.face_area[m.fracture_faces].sum() == pytest.approx(4.0)


def test_manufactured_study_small(tmp_path):
    rep = run_study(StudyConfig("manufactured3d", "cartesian", [2, 4], out_dir=tmp_path, vtu=True))
    assert set(rep.errors) == {"u", "jump", "grad", "lambda_n"}
    assert rep.errors["grad"][1] < rep.errors["grad"][0]
    assert max(rep.extra["kkt"]) <= 1e-9
    assert (tmp_path / "manufactured3d_cartesian.csv").exists()
    assert (tmp_path / "manufactured3d_cartesian_4_bulk.vtu").exists()
    data = json.loads((tmp_path / "manufactured3d_cartesian.json").read_text())
    assert data["levels"] == [2, 4]


def test_study_checks_flag_failures():
    rep = ConvergenceReport("manufactured3d", "cartesian")
    rep.add(8, 0.125, 512, {"u": 1.0, "jump": 1.0, "grad": 1.0, "lambda_n": 1.0})
    rep.add(16, 0.0625, 4096, {"u": 0.5, "jump": 0.25, "grad": 0.25, "lambda_n": 0.25})
    rep.extra = {"kkt": [0.0, 0.0], "normal_jump_max": [0.0, 0.0]}
    checks = {c.name: c for c in study_checks(rep, 1e-10)}
    assert not checks["eoc_u"].passed
    assert checks["eoc_grad"].passed
    assert all(isinstance(c, Check) for c in checks.values())
    assert checks["eoc_u"].line().startswith("FAIL")


def test_parser_flags():
    args = build_parser().parse_args(["run", "compression2d", "--levels", "20,40", "--beta", "5",
                                      "--max-iter", "7", "--linesearch", "--slip-profile", "elliptic"])
    assert args.levels == [20, 40] and args.beta == 5.0 and args.max_iter == 7 and args.linesearch
    assert args.slip_profile == "elliptic"


def test_cli_mesh_gen_and_verify(tmp_path, capsys):
    paths = []
    for n in (2, 4):
        p = tmp_path / f"m{n}.json"
        assert main(["mesh", "gen", "--family", "cartesian", "--n", str(n), "--out", str(p)]) == 0
        paths.append(str(p))
    assert from_json(paths[1]).n_cells == 64
    code = main(["verify", "infsup", "--mesh", *paths])
    out = capsys.readouterr().out
    assert "infsup_positive" in out and "infsup_bubble_ablation" in out
    assert code == 0
    main(["verify", "korn", "--mesh", *paths])
    assert "korn_uniform" in capsys.readouterr().out


def test_cli_run_is_deterministic(tmp_path, capsys):
    argv = ["run", "compression2d", "--levels", "20,40", "--slip-profile", "elliptic"]
    main(argv + ["--out", str(tmp_path / "a")])
    first = capsys.readouterr().out
    main(argv + ["--out", str(tmp_path / "b")])
    second = capsys.readouterr().out
    assert first.splitlines()[0].startswith("level,h,n_cells")
    a = (tmp_path / "a" / "compression2d_triangular2d.csv").read_text()
    b = (tmp_path / "b" / "compression2d_triangular2d.csv").read_text()
    assert a == b
    assert "kkt" in first and first.count("\n") == second.count("\n")
    rep = ConvergenceReport.from_csv(tmp_path / "a" / "compression2d_triangular2d.csv")
    assert rep.levels == [20, 40] and np.all(np.isfinite(rep.errors["slip"]))
