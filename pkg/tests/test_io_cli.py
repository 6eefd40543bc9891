import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mcflab import io as mio
from mcflab.config import load_config
from mcflab.errors import ConfigError
from mcflab.scenarios import make_circle, make_limacon, make_sphere


def test_polyline_roundtrip(tmp_path):
    sc = make_limacon(n=64)
    path = tmp_path / "curve.polyline"
    mio.write_surface(str(path), sc.surface)
    back = mio.read_surface(str(path))
    assert back.dimension == 1
    assert np.array_equal(back.vertices, sc.surface.vertices)
    assert back.closed and back.orientation == 1


def test_obj_roundtrip(tmp_path):
    sc = make_sphere(1.0, 1)
    path = tmp_path / "mesh.obj"
    mio.write_surface(str(path), sc.surface)
    back = mio.read_surface(str(path))
    assert back.dimension == 2
    assert np.array_equal(back.vertices, sc.surface.vertices)
    assert np.array_equal(back.faces, sc.surface.faces)


def test_csv_schema_enforced(tmp_path):
    w = mio.CsvWriter(str(tmp_path / "x.csv"), ("a", "b"))
    with pytest.raises(ValueError):
        w.row({"a": 1, "nope": 2})
    w.row({"a": 1.5, "b": 2})
    w.close()
    back = mio.read_csv(str(tmp_path / "x.csv"))
    assert back["a"][0] == 1.5 and back["b"][0] == 2


def test_config_rejects_bad_surgery_thresholds(tmp_path):
    cfg = {"schema": 1, "scenario": {"name": "circle"},
           "surgery": {"h1": 30.0, "h2": 20.0, "h3": 40.0}}
    with pytest.raises(ConfigError, match="H1 < H2 < H3"):
        load_config(cfg)


def test_config_rejects_unknown_field():
    with pytest.raises(ConfigError, match="unknown config field"):
        load_config({"schema": 1, "floww": {}})


def _cli(*args, env=None):
    e = dict(os.environ)
    if env:
        e.update(env)
    return subprocess.run([sys.executable, "-m", "mcflab.cli", *args],
                          capture_output=True, text=True, env=e)


def test_cli_generate_and_analyze(tmp_path):
    out = tmp_path / "circle.polyline"
    r = _cli("generate", "circle", "--param", "r=1.0", "--param", "n=64",
             "-o", str(out))
    assert r.returncode == 0, r.stderr
    assert out.exists()
    r2 = _cli("analyze", str(out), "-o", str(tmp_path / "rep"))
    assert r2.returncode == 0, r2.stderr
    assert "alpha_inner=1" in r2.stdout.replace("alpha_inner=1.0", "alpha_inner=1")
    assert (tmp_path / "rep" / "noncollapse.csv").exists()


def test_cli_oracle_visibility(tmp_path):
    out = tmp_path / "lim.polyline"
    assert _cli("generate", "limacon", "--param", "n=128", "-o", str(out)).returncode == 0
    r = _cli("oracle", str(out), "--check", "all-pairs-z")
    assert r.returncode == 0 and "all-pairs sup Z" in r.stdout


def test_cli_bad_config_exit_code(tmp_path):
    cfg = {"schema": 1, "scenario": {"name": "circle"},
           "surgery": {"h1": 30.0, "h2": 20.0, "h3": 40.0}}
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(cfg))
    r = _cli("run", str(p))
    assert r.returncode == 2
    assert "H1 < H2 < H3" in r.stderr


def test_run_determinism(tmp_path):
    cfg = {"schema": 1, "scenario": {"name": "circle", "params": {"r": 1.0, "n": 96}},
           "flow": {"c_cfl": 0.1, "max_time": 0.1, "a_stop": 1e4},
           "diagnostics": {"cadence": 100, "noncollapse": True, "monitors": True}}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    outs = []
    for k in (1, 2):
        d = tmp_path / f"out{k}"
        from mcflab.runner import run
        run(str(p), out_dir=str(d))
        outs.append({f: open(os.path.join(d, f), "rb").read()
                     for f in sorted(os.listdir(d))})
    assert outs[0].keys() == outs[1].keys()
    for f in outs[0]:
        assert outs[0][f] == outs[1][f], f"file {f} differs between runs"
