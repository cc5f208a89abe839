import json
import subprocess
import sys

import pytest

from fractalbem.cli import main

BASE = ["--family", "cantor_set", "--alpha", "0.3333333333333333", "--k", "5",
        "--direction", "0.6,-0.8"]


def test_validate_exits_zero(capsys):
    assert main(["validate"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report and all(item["passed"] for item in report)


def test_solve_writes_files(tmp_path, capsys):
    code = main(["solve", *BASE, "--levels", "0,2", "--outputs", "norms,far_field",
                 "--output-dir", str(tmp_path), "--name", "run"])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["records"] == 1
    assert (tmp_path / "run.csv").exists() and (tmp_path / "run_manifest.json").exists()
    lines = (tmp_path / "run_density_j2.csv").read_text().splitlines()
    assert lines[0] == "x,re,im" and len(lines) == 5


def test_generate(tmp_path, capsys):
    code = main(["generate", "--family", "sierpinski", "--k", "1", "--direction", "0,0,-1",
                 "--levels", "0,2", "--output-dir", str(tmp_path), "--name", "g"])
    assert code == 0
    geometry = json.loads((tmp_path / "g_geometry.json").read_text())
    assert len(geometry["cells"]) == 9
    assert json.loads(capsys.readouterr().out)["N"] == 9


def test_config_file_overrides_flags(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"k": 2.0, "levels": [1, 1], "output_dir": str(tmp_path)}))
    assert main(["sweep-levels", *BASE, "--levels", "0,5", "--config", str(path), "--name", "s"]) == 0
    manifest = json.loads((tmp_path / "s_manifest.json").read_text())
    assert manifest["config"]["k"] == 2.0 and manifest["config"]["levels"] == [1, 1]


@pytest.mark.parametrize("args", [
    ["solve", "--family", "cantor_set", "--k", "5", "--direction", "1,1"],
    ["solve", "--family", "cantor_set", "--direction", "0.6,-0.8"],
])
def test_bad_config_exit_code(args, capsys, tmp_path):
    assert main([*args, "--output-dir", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and err["message"]


def test_unknown_key_in_file(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"colour": "blue"}))
    assert main(["solve", *BASE, "--config", str(path)]) == 2
    assert "colour" in json.loads(capsys.readouterr().err)["message"]


def test_runtime_failure_exit_code(tmp_path, capsys):
    # outer snowflake meshes need a lattice size compatible with the rotated lattice
    code = main(["solve", "--family", "koch_snowflake", "--side", "outer", "--k", "1",
                 "--direction", "0,0,-1", "--mesh-policy", "lattice", "--h", "0.3",
                 "--output-dir", str(tmp_path)])
    assert code == 1
    assert json.loads(capsys.readouterr().err)["error"]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "fractalbem", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "sweep-k" in out.stdout
