import json

import pytest

from indexcurv.cli import main


def test_run_sphere(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--scenario", "sphere", "--samples", "1000", "--seed", "1",
                 "--out", str(out)]) == 0
    d = json.loads((out / "report.json").read_text())
    assert d["chi"] == 2 and d["chi_violations"] == 0 and d["samples"] == 1000
    assert json.loads((out / "timing.json").read_text())["wall_time_s"] > 0
    assert (out / "histograms.csv").exists() and (out / "plotdata.txt").exists()


def test_oracle_flat_polygon(capsys):
    assert main(["oracle", "--scenario", "flat_polygon"]) == 0
    text = capsys.readouterr().out
    line = next(l for l in text.splitlines() if l.startswith("vertex_masses:"))
    assert [float(x) for x in line.split()[1:]] == pytest.approx([0.25, 1 / 3, 5 / 12])
    ref = next(l for l in text.splitlines() if l.startswith("vertex_reference"))
    assert [float(x) for x in ref.split()[1:]] == pytest.approx([0.5, 1 / 3, 1 / 6])


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario:\n  name: sphere\nrun:\n  sample: 10\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert "sample" in capsys.readouterr().err
    bad.write_text("scenario: {name: torus, params: {R: 1, r: 2}}\n")
    assert main(["run", "--config", str(bad)]) == 2
    bad.write_text("solver: {grid_n: 4}\n")
    assert main(["run", "--config", str(bad)]) == 2
    bad.write_text("scenario: [unclosed\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--scenario", "nope"]) == 2
    assert main(["frobnicate"]) == 2


def test_yaml_and_json_configs_agree(tmp_path):
    y = tmp_path / "c.yaml"
    y.write_text("scenario:\n  name: torus\n  params: {R: 2.0, r: 1.0}\n"
                 f"run:\n  samples: 400\n  seed: 5\n  out_dir: {tmp_path / 'y'}\n"
                 "bins: {u: 8, v: 8}\nemit: {plotdata: false}\n")
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"scenario": {"name": "torus", "params": {"R": 2.0, "r": 1.0}},
                             "run": {"samples": 400, "seed": 5, "out_dir": str(tmp_path / "j"),
                                     "threads": 2},
                             "bins": {"u": 8, "v": 8}}))
    assert main(["run", "--config", str(y)]) == 0
    assert main(["run", "--config", str(j)]) == 0
    assert not (tmp_path / "y" / "plotdata.txt").exists()
    a = (tmp_path / "y" / "report.json").read_bytes()
    assert a == (tmp_path / "j" / "report.json").read_bytes()
    assert json.loads(a)["histograms"][0]["shape"] == [8, 8]


def test_catalog(capsys):
    assert main(["catalog"]) == 0
    names = [l.split()[0] for l in capsys.readouterr().out.splitlines()]
    assert "s4patch" in names and len(names) == 8
