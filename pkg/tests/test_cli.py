import json
import re
import subprocess
import sys

import pytest

from coho1 import cli
from coho1.io import file_sha256

def run(args, out):
    return cli.main(list(args) + ["--out", str(out)])


def manifest(out, stem):
    return json.loads((out / f"{stem}.manifest.json").read_text())


def test_fixed_points(tmp_path, capsys):
    assert run(["fixed-points", "--d1", "2", "--d2", "7"], tmp_path) == 0
    text = capsys.readouterr().out
    assert "cone+" in text and "p1+" in text
    m = manifest(tmp_path, "fixed_points_2-7")
    assert m["config"]["dims"] == {"d1": 2, "d2": 7}
    assert "wall_clock_s" in m and m["tolerances"]["epsilon"] == 1e-6
    for name, digest in m["files"].items():
        assert file_sha256(tmp_path / name) == digest


def test_trace_and_slice_and_winding(tmp_path, capsys):
    assert run(["trace", "--from", "p1+", "--t", "0.5", "--d1", "4", "--d2", "5"], tmp_path) == 0
    assert list(tmp_path.glob("trace_4-5_p1+_*.csv"))
    assert run(["slice", "--manifold", "m1+", "--h", "0", "--d1", "4", "--d2", "5"], tmp_path) == 0
    csv = tmp_path / "slice_4-5_m1+_0.csv"
    assert csv.exists() and (tmp_path / "slice_4-5_m1+_0.svg").exists()
    capsys.readouterr()
    assert run(["winding", "--curve", str(csv)], tmp_path) == 0
    text = capsys.readouterr().out
    assert "r = 1e-04" in text
    rep = json.loads((tmp_path / "winding_slice_4-5_m1+_0.json").read_text())
    assert rep["ends_at_origin"] and len(rep["truncation_thetas"]) >= 3


def test_svg_canvas(tmp_path):
    assert run(["barrier", "--n", "9", "--delta", "0"], tmp_path) == 0
    svg = (tmp_path / "barrier_n9_delta0.svg").read_text()
    assert re.search(r'width="800pt" height="800pt" viewBox="0 0 800 800"', svg)
    rep = json.loads((tmp_path / "barrier_n9_delta0.json").read_text())
    assert rep["schema"] == "coho1/barrier/1"


def test_barrier_n10(tmp_path):
    assert run(["barrier", "--n", "10", "--delta", "0"], tmp_path) == 0
    rep = json.loads((tmp_path / "barrier_n10_delta0.json").read_text())
    assert rep["monotonicity_violations"] > 0


def test_intersect_and_reconstruct(tmp_path, capsys):
    assert run(["intersect", "--target", "sphere", "--d1", "4", "--d2", "5"], tmp_path) == 0
    data = json.loads((tmp_path / "intersect_4-5_sphere.json").read_text())
    assert data["schema"] == "coho1/intersections/1"
    classes = sorted(r["classification"] for r in data["records"])
    assert classes.count("Round") == 1 and "NonRound" in classes
    svg = (tmp_path / "intersect_4-5_sphere.svg").read_text()
    assert "M1+" in svg and "bar M2+" in svg
    assert run(["reconstruct", "--record", str(tmp_path / "intersect_4-5_sphere.json"),
                "--lambda", "9"], tmp_path) == 0
    m = manifest(tmp_path, "profile_4-5_NonRound")
    assert m["checks"]["einstein_residual"] <= 1e-5
    assert (tmp_path / "profile_4-5_NonRound_summary.csv").exists()


def test_survey_degenerate(tmp_path, capsys):
    assert run(["survey", "--set", "degenerate-d1"], tmp_path) == 0
    rows = (tmp_path / "survey_degenerate-d1.csv").read_text().splitlines()
    assert rows[0].startswith("d1,d2,target") and rows[1].startswith("1,8,sphere,1,1,0")


def test_exit_code_config(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('schema = "coho1/config/1"\n[trace]\nbogus = 1\n')
    assert run(["fixed-points", "--config", str(bad)], tmp_path) == cli.EXIT_CONFIG
    assert "invalid config" in capsys.readouterr().err
    assert run(["fixed-points", "--d1", "0", "--d2", "5"], tmp_path) == cli.EXIT_CONFIG


def test_exit_code_numeric(tmp_path, capsys):
    bad = tmp_path / "tight.toml"
    bad.write_text('schema = "coho1/config/1"\n[trace]\nmax_steps = 5\n')
    code = run(["slice", "--manifold", "m1+", "--config", str(bad)], tmp_path)
    assert code == cli.EXIT_NUMERIC
    assert "stage slice" in capsys.readouterr().err


def test_exit_code_refinement(tmp_path, monkeypatch, capsys):
    import coho1.intersect as mod
    monkeypatch.setattr(mod, "refine", lambda x1, x2, pa, pb: (x1, x2, 1.0, 40, False))
    assert run(["intersect", "--d1", "4", "--d2", "5"], tmp_path) == cli.EXIT_REFINE
    assert "stage intersect" in capsys.readouterr().err


def test_console_script(tmp_path):
    out = subprocess.run([sys.executable, "-m", "coho1.cli", "fixed-points", "--out",
                          str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0 and "cone+" in out.stdout


def _hashes(out, stem):
    return manifest(out, stem)["files"]


@pytest.mark.parametrize("args,stem", [
    (["fixed-points", "--d1", "3", "--d2", "6"], "fixed_points_3-6"),
    (["slice", "--manifold", "m2-", "--d1", "2", "--d2", "7"], "slice_2-7_m2-_0"),
    (["barrier", "--n", "9", "--delta", "0.001"], "barrier_n9_delta0.001"),
])
def test_determinism(tmp_path, args, stem, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(args, a) == 0 and run(args, b) == 0
    ha, hb = _hashes(a, stem), _hashes(b, stem)
    assert ha and ha == hb
