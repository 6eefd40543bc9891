import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mcfviz import FigureSpec, SchemaError, render
from mcfviz.figures import FIGURE_KINDS, read_csv


@pytest.fixture(scope="session")
def circle_run(tmp_path_factory):
    from mcflab.runner import run
    out = tmp_path_factory.mktemp("circle_run")
    cfg = {"schema": 1,
           "scenario": {"name": "circle", "params": {"r": 1.0, "n": 128}},
           "flow": {"c_cfl": 0.1, "max_time": 0.15, "a_stop": 1e4},
           "diagnostics": {"cadence": 200, "noncollapse": True,
                           "monitors": True, "viscosity": True}}
    run(cfg, out_dir=str(out))
    return str(out)


@pytest.fixture(scope="session")
def dumbbell_run(tmp_path_factory):
    from mcflab.runner import run
    out = tmp_path_factory.mktemp("dumbbell_run")
    cfg = {"schema": 1,
           "scenario": {"name": "dumbbell", "params": {"n_axial": 28, "n_phi": 20}},
           "flow": {"c_cfl": 0.05, "max_time": 0.004, "a_stop": 2500.0},
           "shell": {"enabled": True},
           "diagnostics": {"cadence": 25, "noncollapse": True, "monitors": True}}
    run(cfg, out_dir=str(out))
    # a synthetic surgery marker exercises the event-annotation path
    s = json.load(open(os.path.join(out, "summary.json")))
    s["surgery_events"] = [{"t": 0.002, "neck_rho": 0.1}]
    json.dump(s, open(os.path.join(out, "summary.json"), "w"))
    return str(out)


def test_alpha_timeline_roundtrip(circle_run, tmp_path):
    spec = FigureSpec(circle_run, "alpha-timeline", str(tmp_path / "a.png"))
    data = render(spec)
    rows = json.load(open(os.path.join(circle_run, "summary.json")))["alpha_timeline"]
    assert np.array_equal(data["t"], [r[0] for r in rows])
    assert np.array_equal(data["alpha_inner"], [r[1] for r in rows])
    assert os.path.exists(spec.out_path)


def test_snapshot_heat_roundtrip(circle_run, tmp_path):
    spec = FigureSpec(circle_run, "snapshot-heat", str(tmp_path / "h.png"))
    data = render(spec)
    nc = read_csv(os.path.join(circle_run, "noncollapse.csv"))
    sel = nc["t"] == nc["t"].max()
    want = nc["Zbar"][sel][np.argsort(nc["vertex"][sel].astype(int))]
    assert np.array_equal(data["values"], want[:len(data["values"])])


def test_residual_scatter_roundtrip(circle_run, tmp_path):
    spec = FigureSpec(circle_run, "residual-scatter", str(tmp_path / "r.png"))
    data = render(spec)
    res = read_csv(os.path.join(circle_run, "residuals.csv"))
    assert np.array_equal(data["R_inner"], res["R_inner"])


def test_all_kinds_render_for_dumbbell(dumbbell_run, tmp_path):
    for kind in FIGURE_KINDS:
        if kind == "residual-scatter":
            continue  # this quick run records no residual windows
        spec = FigureSpec(dumbbell_run, kind, str(tmp_path / f"{kind}.png"))
        render(spec)
        assert os.path.exists(spec.out_path)


def test_render_deterministic(circle_run, tmp_path):
    p1, p2 = str(tmp_path / "d1.png"), str(tmp_path / "d2.png")
    render(FigureSpec(circle_run, "alpha-timeline", p1))
    render(FigureSpec(circle_run, "alpha-timeline", p2))
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_schema_error_names_column(circle_run, tmp_path):
    bad = tmp_path / "bad_run"
    bad.mkdir()
    (bad / "noncollapse.csv").write_text("t,vertex\n0,0\n")
    (bad / "summary.json").write_text("{}")
    with pytest.raises(SchemaError, match="Zbar|zh_monitor"):
        render(FigureSpec(str(bad), "monitor-ratios", str(tmp_path / "x.png")))


def test_unknown_kind_rejected(circle_run, tmp_path):
    with pytest.raises(SchemaError, match="unknown figure kind"):
        FigureSpec(circle_run, "pie-chart", str(tmp_path / "x.png"))


def test_cli(circle_run, tmp_path):
    out = tmp_path / "cli.png"
    r = subprocess.run([sys.executable, "-m", "mcfviz.cli", circle_run,
                        "--fig", "inj-decay", "-o", str(out)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert out.exists()
