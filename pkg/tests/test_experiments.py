import csv
import json

import pytest

from bil.errors import ConfigurationError
from bil.experiments.certify import CHECKS, run_checks
from bil.experiments.cli import main
from bil.experiments.config import load_schema, parse_config
from bil.experiments.sweep import SweepRow, fit_slope, plan_sweep
from bil.grid import Grid, SpectralVector, write_bspc


def write_cfg(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_schema_rejects_unknown_keys():
    with pytest.raises(ConfigurationError):
        parse_config({"command": "certify", "grid": {"dim": 3, "res": 16, "colour": 1}})
    with pytest.raises(ConfigurationError):
        parse_config({"command": "certify", "bogus": 1})
    with pytest.raises(ConfigurationError):
        parse_config({"command": "fly"})


def test_config_defaults_and_checks():
    cfg = parse_config({"command": "endtoend"})
    assert (cfg.grid.dim, cfg.grid.res) == (4, 32)
    assert cfg.schedule.sizes == (1, 2, 3)
    with pytest.raises(ConfigurationError):
        parse_config({"command": "decay", "grid": {"res": 48}})
    with pytest.raises(ConfigurationError):
        parse_config({"command": "decay", "schedule": {"sizes": [2, 1]}})
    with pytest.raises(ConfigurationError):
        parse_config({"command": "solve", "source": {"kind": "file"}})


def test_schema_lists_every_sabotage():
    enum = load_schema()["properties"]["sabotage"]["items"]["enum"]
    assert sorted(enum) == sorted(c[0] for c in CHECKS)


def test_each_sabotage_breaks_only_its_check():
    grid = Grid(3, 16, 1.0)
    clean = run_checks(grid, samples=2)
    assert all(r.status == "pass" for r in clean)
    for name, *_ in CHECKS:
        res = run_checks(grid, sabotage=(name,), samples=2)
        failed = [r.name for r in res if r.status == "fail"]
        assert failed == [name]


def test_plumbing_mode_skips_leray():
    res = run_checks(Grid(2, 16, 1.0), samples=2)
    skipped = {r.name for r in res if r.status == "skipped"}
    assert skipped == {"projector", "gradient", "bilinear", "commutation"}


def test_cli_certify(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"command": "certify", "grid": {"dim": 3, "res": 16}})
    out = tmp_path / "out"
    assert main(["certify", "--config", cfg, "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"certify_report.json", "certify_checks.csv", "certify_partition.csv", "certify_partition.svg",
            "certify_config.json"} <= names
    rep = json.loads((out / "certify_report.json").read_text())
    assert rep["exit_status"] == 0 and rep["first_failure"] is None
    assert "certify: PASS" in capsys.readouterr().out


def test_cli_sabotage_exit_one(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "certify", "grid": {"dim": 3, "res": 16}, "sabotage": ["commutation"]})
    out = tmp_path / "o"
    assert main(["certify", "--config", cfg, "--out", str(out)]) == 1
    rep = json.loads((out / "certify_report.json").read_text())
    assert rep["first_failure"] == "commutation"


def test_cli_config_errors(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "certify", "grid": {"dim": 3, "res": 16}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "x")]) == 2
    assert main(["certify", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["certify", "--config", str(bad)]) == 2
    assert main(["certify", "--config", cfg, "--threads", "0"]) == 2


def test_cli_solve_zero_and_file(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "solve", "grid": {"dim": 3, "res": 16}, "source": {"kind": "zero"}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "z")]) == 0
    fpath = write_bspc(tmp_path / "g.bspc", SpectralVector.zeros(Grid(3, 16, 1.0)))
    cfg = write_cfg(tmp_path, {"command": "solve", "source": {"kind": "file", "path": str(fpath)}}, "f.json")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "f")]) == 0
    garbage = tmp_path / "garbage.bspc"
    garbage.write_bytes(b"xx")
    cfg = write_cfg(tmp_path, {"command": "solve", "source": {"kind": "file", "path": str(garbage)}}, "g.json")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "g")]) == 2


def test_cli_solve_random(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "solve", "grid": {"dim": 3, "res": 16}, "solver": {"max_iter": 30}})
    out = tmp_path / "r"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "solve_report.json").read_text())
    assert rep["notes"]["solver"]["converged"]
    assert (out / "solve_u.bspc").exists() and (out / "solve_residual.svg").exists()


def test_cli_solve_too_large_force(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "solve", "grid": {"dim": 3, "res": 16},
                               "source": {"kind": "random", "guard_fraction": 2.0}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "big")]) == 1


def test_infeasible_sweep_writes_partial_rows(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "decay", "grid": {"dim": 3, "res": 64},
                               "schedule": {"sizes": [1, 2], "min_sweep": 2}})
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["decay", "--config", cfg, "--out", str(out), "--threads", "2"]) == 2
        outs.append(out)
    rows = list(csv.reader(open(outs[0] / "decay.csv")))
    assert rows[0] == SweepRow.header()
    assert [r[0] for r in rows[1:]] == ["1"]
    assert (outs[0] / "decay.csv").read_bytes() == (outs[1] / "decay.csv").read_bytes()
    assert (outs[0] / "decay_report.json").read_bytes() == (outs[1] / "decay_report.json").read_bytes()
    assert (outs[0] / "decay_g.svg").read_bytes() == (outs[1] / "decay_g.svg").read_bytes()
    rep = json.loads((outs[0] / "decay_report.json").read_text())
    assert rep["notes"]["feasible_sizes"] == [1]


def test_plan_sweep_reports_missing():
    scheds, missing = plan_sweep(3, 64, 1.0, 0.1, (1, 2), 4, 2)
    assert [s.size for s in scheds] == [1]
    assert missing[0]["size"] == 2 and missing[0]["max_scales"] == 1


def test_fit_slope():
    x = [1, 2, 4, 8]
    assert fit_slope(x, [3 * v**-0.25 for v in x]) == pytest.approx(-0.25)
