import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from utm.cli_frontend import load_config, resolve_config, run

BUNDLED = ["eq1_a1", "eq1_a2", "eq2_dirichlet", "stokes_c1", "stokes_c2", "heat_robin", "schrodinger_mode1"]


def _run(argv):
    out = io.StringIO()
    code = run(argv, stdout=out)
    return code, out.getvalue()


def test_analyze_stokes_c1():
    code, text = _run(["analyze", "--config", "stokes_c1"])
    assert code == 0
    assert text.splitlines()[0] == "admissible: true, N_left=1, N_right=2"


def test_analyze_stokes_c2_names_unbounded_carrier():
    code, text = _run(["analyze", "--config", "stokes_c2"])
    assert code == 0
    assert text.startswith("admissible: false")
    assert "g~_1" in text


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_configs_dispatch(name):
    cfg = load_config(name)
    assert set(cfg) == {"problem", "numerics", "output"}
    code, text = _run(["analyze", "--config", name])
    assert code == 0 and text.startswith("admissible:")


@pytest.mark.parametrize("name", ["eq1_a2", "stokes_c2"])
def test_solve_ill_posed_exit_code(name):
    code, text = _run(["solve", "--config", name])
    assert code == 2 and text == ""


def test_solve_is_byte_stable():
    argv = ["solve", "--config", "eq2_dirichlet", "--grid", "4,2"]
    code1, a = _run(argv)
    code2, b = _run(argv)
    assert code1 == code2 == 0
    assert a == b
    lines = a.splitlines()
    assert lines[0] == "x,t,re_q,im_q,err_est"
    assert len(lines) == 1 + 8
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert np.all(rows[:, 4] >= 0)
    assert set(np.round(rows[:, 0], 12)) == {0.0, round(1 / 3, 12), round(2 / 3, 12), 1.0}


def test_solve_eigenmode_row():
    code, text = _run(["solve", "--config", "schrodinger_mode1", "--grid", "21,5"])
    assert code == 0
    rows = [line.split(",") for line in text.splitlines()[1:]]
    hit = [r for r in rows if abs(float(r[0]) - 0.5) < 1e-12 and abs(float(r[1]) - 0.1) < 1e-12]
    assert len(hit) == 1
    q = float(hit[0][2]) + 1j * float(hit[0][3])
    assert abs(q - np.exp(-1j * np.pi**2 / 10)) < 1e-6


def test_solve_both_representations_to_directory(tmp_path):
    code, text = _run(["solve", "--config", "eq2_dirichlet", "--grid", "3,2", "--representation", "both",
                       "--out", str(tmp_path)])
    assert code == 0 and text == ""
    lines = (tmp_path / "solution.csv").read_text().splitlines()
    assert lines[0] == "representation,x,t,re_q,im_q,err_est"
    assert {line.split(",")[0] for line in lines[1:]} == {"integral", "series"}
    meta = (tmp_path / "metadata.txt").read_text()
    assert "max |integral - series|" in meta


def test_analyze_json_output(tmp_path):
    code, _ = _run(["analyze", "--config", "stokes_c2", "--out", str(tmp_path)])
    doc = json.loads((tmp_path / "analyze.json").read_text())
    assert code == 0 and doc["admissible"] is False and doc["N_left"] == 2


def test_zeros_command():
    code, text = _run(["zeros", "--config", "eq2_dirichlet", "--rmax", "10"])
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == "re_k,im_k,in_D,nearest_ray,residual"
    ks = [complex(float(l.split(",")[0]), float(l.split(",")[1])) for l in lines[1:]]
    assert any(abs(k - (np.pi + 0.5j)) < 1e-10 for k in ks)


def test_contour_command():
    code, text = _run(["contour", "--config", "heat_robin", "--rmax", "10"])
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == "component,node,re_k,im_k"
    assert len(lines) > 10


def test_verify_command():
    code, text = _run(["verify", "--config", "eq2_dirichlet"])
    assert code == 0
    names = [line.split()[0] for line in text.splitlines()]
    assert names == ["admissible", "global_relation_fd", "integral_vs_fd", "integral_vs_series"]


def _write(tmp_path, cfg):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def test_config_from_path_and_unknown_keys(tmp_path):
    cfg = yaml.safe_load(Path(resolve_config("eq2_dirichlet")).read_text())
    code, _ = _run(["analyze", "--config", _write(tmp_path, cfg)])
    assert code == 0
    bad = dict(cfg, extra=1)
    assert _run(["analyze", "--config", _write(tmp_path, bad)])[0] == 1
    bad = dict(cfg, numerics={"tol": 1e-6, "speed": "fast"})
    assert _run(["analyze", "--config", _write(tmp_path, bad)])[0] == 1


def test_bad_invocations():
    assert _run(["analyze", "--config", "no_such_config"])[0] == 1
    assert _run(["frobnicate", "--config", "eq2_dirichlet"])[0] == 1
    assert _run(["solve", "--config", "eq2_dirichlet", "--grid", "0,3"])[0] == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "utm", "analyze", "--config", "eq2_dirichlet"],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0
    assert r.stdout.startswith("admissible: true, N_left=1, N_right=1")
