import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from bnsp_green.cli import build_parser, main, render

UNEQUAL = """\
mu1 = 1.0
mu2 = 2.0
mubar1 = 1.0
mubar2 = 1.0
rhobar = 2.0
c1sq = 1.0
c2sq = 2.0
eps1 = 1.5
"""


def _run(argv, capsys):
    code = main(argv)
    path = Path(capsys.readouterr().out.strip())
    return code, path


def _error(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    return exc.value.code, json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_spectrum_json(tmp_path, capsys):
    code, path = _run(["spectrum", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert path.parent == tmp_path and path.name.startswith("spectrum-") and path.suffix == ".json"
    doc = json.loads(path.read_text())
    assert doc["schema"] == "bnsp-green/spectrum/1"
    assert doc["command"] == "spectrum"
    assert doc["pass"] is True
    assert doc["k0_error"] <= 1e-10


def test_output_reproducible_except_timestamp(tmp_path, capsys):
    texts = []
    for _ in range(2):
        _, path = _run(["green", "--out", str(tmp_path), "--t", "2"], capsys)
        doc = json.loads(path.read_text())
        stamp = doc.pop("timestamp")
        texts.append(path.read_text().replace(stamp, ""))
    assert texts[0] == texts[1]


def test_csv_has_schema_column(tmp_path, capsys):
    code, path = _run(["projectors", "--out", str(tmp_path), "--format", "csv"], capsys)
    assert code == 0
    lines = path.read_text().splitlines()
    assert lines[0].startswith("schema,k,method")
    assert all(line.startswith("bnsp-green/projectors/1,") for line in lines[1:])


def test_env_var_output_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("BNSP_OUT_DIR", str(tmp_path / "env"))
    code, path = _run(["riesz"], capsys)
    assert code == 0
    assert path.parent == tmp_path / "env"


def test_unequal_speeds_skip_note(tmp_path, capsys):
    cfg = tmp_path / "unequal.toml"
    cfg.write_text(UNEQUAL)
    code, path = _run(["cancellation", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    doc = json.loads(path.read_text())
    assert code == 0
    assert any("skipped" in note for note in doc["skipped"])
    assert {s["kind"] for s in doc["symbol_slopes"]} == {"J1"}


def test_missing_config(tmp_path, capsys):
    code, err = _error(["spectrum", "--config", str(tmp_path / "none.toml"), "--out", str(tmp_path)], capsys)
    assert code == 1
    assert err["code"] == "config_not_found"


def test_missing_key(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("mu1 = 1.0\n")
    code, err = _error(["spectrum", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 1
    assert err["code"] == "missing_key"


def test_constraint_violation(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(UNEQUAL.replace("rhobar = 2.0", "rhobar = -1.0"))
    code, err = _error(["spectrum", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 1
    assert err["code"] == "constraint_violation"


def test_usage_errors(tmp_path, capsys):
    code, err = _error(["nosuch"], capsys)
    assert (code, err["code"]) == (1, "usage")
    code, err = _error(["convolution", "--kinds", "XII", "--out", str(tmp_path)], capsys)
    assert (code, err["code"]) == (1, "usage")


def test_unwritable_out_dir(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, err = _error(["spectrum", "--out", str(blocker / "sub")], capsys)
    assert (code, err["code"]) == (1, "out_dir_unwritable")


def test_verification_error_exit_code(tmp_path, capsys):
    code, err = _error(["profile", "--entry", "G1x", "--out", str(tmp_path)], capsys)
    assert (code, err["code"]) == (2, "verification_error")


def test_render_nonfinite_to_null():
    text = render("x", {"a": float("inf"), "pass": False}, None, "json", "T")
    assert json.loads(text)["a"] is None
    csv_text = render("x", {"a": 1.5, "pass": True}, None, "csv", "T")
    assert csv_text.splitlines()[0] == "schema,key,value"


def test_parser_lists_all_commands():
    sub = next(a for a in build_parser()._actions if a.dest == "command")
    assert set(sub.choices) == {
        "spectrum", "expansions", "projectors", "green", "profile",
        "fronts", "cancellation", "riesz", "convolution", "all",
    }


def test_module_entry_point(tmp_path):
    env = dict(os.environ, BNSP_OUT_DIR=str(tmp_path))
    res = subprocess.run([sys.executable, "-m", "bnsp_green", "spectrum"], capture_output=True, text=True, env=env)
    assert res.returncode == 0
    assert Path(res.stdout.strip()).exists()
