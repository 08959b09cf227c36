import csv
import json
from importlib import resources

import pytest

from drifthom.cli import EXIT_ASSERT, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main, report, run
from drifthom.config import ScenarioKind, config_hash, load_config, parse_config
from drifthom.errors import ConfigError
from drifthom.homog_lab import EffectiveReport, write_report_csv


def small_doc():
    return {
        "version": 1,
        "scenarios": [
            {"name": "mms", "kind": "MANUFACTURED", "space": "P1", "eps_list": [0.25, 0.125, 0.0625]},
            {"name": "z", "kind": "CELL_Z", "mu": 10.0, "eps_list": [0.2, 0.1], "mesh": {"grading": {"layers": 256, "ratio": 1.6, "segments": 48}}},
        ],
    }


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def numeric_columns(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r.pop("wall_seconds")
    return rows


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d["scenarios"][0].update(eps_list=[0.125, 0.25]), "scenarios[0].eps_list"),
        (lambda d: d["scenarios"][0].update(kind="NOPE"), "scenarios[0].kind"),
        (lambda d: d["scenarios"][1].update(colour="red"), "scenarios[1].colour"),
        (lambda d: d["scenarios"][1].update(mu=-1.0), "scenarios[1].mu"),
        (lambda d: d["scenarios"][1].update(eps_list=[2.0]), "scenarios[1].eps_list[0]"),
        (lambda d: d["scenarios"][1]["mesh"]["grading"].update(ratio=0.5), "scenarios[1].mesh.grading"),
        (lambda d: d["scenarios"].append({"name": "s", "kind": "SCALAR_SMOOTH", "eps_list": [0.3]}), "scenarios[2].eps_list[0]"),
        (lambda d: d["scenarios"].append({"name": "mms", "kind": "CELL_Z", "eps_list": [0.3]}), "scenarios[2].name"),
        (lambda d: d["scenarios"].append({"name": "f", "kind": "SCALAR_SMOOTH", "eps_list": [0.25], "f": "wind"}), "scenarios[2].f"),
    ],
)
def test_config_errors_name_the_field(tmp_path, capsys, mutate, field):
    doc = small_doc()
    mutate(doc)
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert exc.value.path == field
    assert run(write(tmp_path, doc), tmp_path / "out") == EXIT_CONFIG
    assert field in capsys.readouterr().err


def test_defaults_are_filled():
    cfgs = parse_config({"scenarios": [{"name": "c", "kind": "STOKES_CONCENTRATED", "eps_list": [0.5, 0.25]}]})
    c = cfgs[0]
    assert c.kind == ScenarioKind.STOKES_CONCENTRATED
    assert (c.gamma, c.R, c.interior_margin, c.tol) == (50.0, 1.0, 0.1, 1e-10)
    assert c.radius(0.25) == pytest.approx(0.017930, abs=5e-6)


def test_hash_stable_under_reordering_and_explicit_defaults():
    doc = small_doc()
    h = config_hash(doc)
    reordered = json.loads(json.dumps({"scenarios": [dict(reversed(list(s.items()))) for s in doc["scenarios"]], "version": 1}))
    assert config_hash(reordered) == h
    explicit = small_doc()
    explicit["scenarios"][1]["R"] = 0.4
    explicit["scenarios"][1]["tol"] = 1e-10
    assert config_hash(explicit) == h
    changed = small_doc()
    changed["scenarios"][1]["mu"] = 11.0
    assert config_hash(changed) != h


def test_bundled_configs_parse():
    root = resources.files("drifthom") / "configs"
    names = sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))
    assert "scalar_counterexample.json" in names and "cell_z_sweep.json" in names
    for name in names:
        cfgs, _ = load_config(root / name)
        assert cfgs
    cfgs, _ = load_config(root / "scalar_counterexample.json")
    assert cfgs[0].mu == 50 and cfgs[0].eps_list == (0.25, 1 / 6, 0.125)


def test_run_writes_reports_and_is_reproducible(tmp_path):
    cfg = write(tmp_path, small_doc())
    assert run(cfg, tmp_path / "a", threads=1) == EXIT_OK
    assert run(cfg, tmp_path / "b", threads=1) == EXIT_OK
    assert run(cfg, tmp_path / "c", threads=3, vtk=True) == EXIT_OK
    for name in ("mms.csv", "z.csv", "report.csv"):
        assert numeric_columns(tmp_path / "a" / name) == numeric_columns(tmp_path / "b" / name)
        assert numeric_columns(tmp_path / "a" / name) == numeric_columns(tmp_path / "c" / name)
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["config_hash"] == config_hash(small_doc())
    assert set(manifest["scenarios"]) == {"mms", "z"}
    vtk = json.loads((tmp_path / "c" / "manifest.json").read_text())["scenarios"]["mms"]["vtk"]
    assert vtk and all((tmp_path / "c" / v).exists() for v in vtk)
    rows = numeric_columns(tmp_path / "a" / "report.csv")
    assert [(r["scenario"], float(r["eps"])) for r in rows] == [
        ("mms", 0.25), ("mms", 0.125), ("mms", 0.0625), ("z", 0.2), ("z", 0.1)
    ]
    assert all(r["status"] == "ok" for r in rows)
    assert report([tmp_path / "a" / "report.csv"]) == EXIT_OK


def test_solver_failure_exit_code(tmp_path, capsys):
    doc = {"scenarios": [{"name": "z", "kind": "CELL_Z", "eps_list": [0.2], "mesh": {"grading": {"layers": 1, "ratio": 1.01}}}]}
    assert run(write(tmp_path, doc), tmp_path / "out") == EXIT_SOLVER
    assert "solver failure" in capsys.readouterr().err
    status = numeric_columns(tmp_path / "out" / "z.csv")[0]["status"]
    assert status.startswith("error")


def test_report_flags_increasing_corrector_norms(tmp_path, capsys):
    rows = [
        EffectiveReport("smooth", "SCALAR_SMOOTH", 0.25, corrector_norm=0.02),
        EffectiveReport("smooth", "SCALAR_SMOOTH", 0.125, corrector_norm=0.03),
    ]
    write_report_csv(rows, tmp_path / "r.csv")
    assert report([tmp_path / "r.csv"]) == EXIT_ASSERT
    out = capsys.readouterr().out
    assert "FAIL  smooth: corrector_norm strictly decreasing" in out


def test_report_merges_and_sorts(tmp_path):
    write_report_csv([EffectiveReport("b", "CELL_Z", 0.1), EffectiveReport("a", "CELL_Z", 0.1)], tmp_path / "1.csv")
    write_report_csv([EffectiveReport("a", "CELL_Z", 0.2), EffectiveReport("b", "CELL_Z", 0.3)], tmp_path / "2.csv")
    assert report([tmp_path / "1.csv", tmp_path / "2.csv"], out=tmp_path / "m.csv") == EXIT_OK
    rows = numeric_columns(tmp_path / "m.csv")
    assert [(r["scenario"], float(r["eps"])) for r in rows] == [("a", 0.2), ("a", 0.1), ("b", 0.3), ("b", 0.1)]


def test_report_schema_error(tmp_path):
    (tmp_path / "bad.csv").write_text("scenario,eps,shoe_size\nx,0.1,9\n")
    assert report([tmp_path / "bad.csv"]) == EXIT_CONFIG


def test_mesh_and_cell_subcommands(tmp_path, capsys):
    assert main(["mesh", "cell", "--R", "0.4", "--r", "0.05", "--out", str(tmp_path / "c.txt")]) == EXIT_OK
    assert (tmp_path / "c.txt").read_text().startswith("vertices ")
    assert main(["mesh", "lattice", "--pitch", "0.5", "--target-h", "0.1", "--out", str(tmp_path / "l.vtk")]) == EXIT_OK
    assert main(["mesh", "square", "--n", "3", "--pitch", "0.3", "--out", str(tmp_path / "s.txt")]) == EXIT_OK
    capsys.readouterr()
    assert main(["cell", "V", "--r", "0.2", "--target-h", "0.08"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["gamma_cell"] == pytest.approx(out["annulus_energy_exact"], rel=1e-2)
    assert main(["mesh", "lattice", "--pitch", "0.3", "--out", str(tmp_path / "bad.txt")]) == EXIT_SOLVER
