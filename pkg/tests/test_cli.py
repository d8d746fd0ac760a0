import json

import pytest

from latavoid import cli
from latavoid.avoid import SplitViolation
from latavoid.io import load_cover, load_graph, load_plan, load_sweep, save_cover
from test_cover import lbs_case_b


def run(argv, capsys, environ=None):
    try:
        code = cli.main(argv, environ or {})
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def s8file(tmp_path, capsys):
    path = tmp_path / "s8.json"
    assert run(["generate", "--stencil1d", "8,2,2,1", "-o", str(path)], capsys)[0] == 0
    return path


# -- generate ---------------------------------------------------------------


def test_generate_stencil(s8file, tmp_path, capsys):
    g = load_graph(s8file)
    assert len(g) == 24
    cov = tmp_path / "c.json"
    code, out, _ = run(["generate", "--stencil1d", "8,2,2,1", "--boundary", "periodic", "-o", str(tmp_path / "p.json"), "--cover", str(cov)], capsys)
    assert code == 0 and "24 tasks" in out
    assert len(load_cover(cov).blocks) == 6


def test_generate_random_is_seeded(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert run(["generate", "--random", "20,0.3,3", "--seed", "9", "-o", str(p)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_generate_errors(tmp_path, capsys):
    code, _, err = run(["generate", "--stencil1d", "8,2,2,1"], capsys)
    assert code == 2 and "--output" in err
    code, _, err = run(["generate", "-o", str(tmp_path / "x.json")], capsys)
    assert code == 2 and "--stencil1d" in err
    code, _, err = run(["generate", "--stencil1d", "2,4,2,1", "-o", str(tmp_path / "x.json")], capsys)
    assert code == 1 and err.startswith("error:")
    assert not (tmp_path / "x.json").exists()
    code, _, _ = run(["generate", "--stencil1d", "8,2", "-o", str(tmp_path / "x.json")], capsys)
    assert code == 2
    code, _, _ = run(["generate", "--random", "10,1.5,2", "-o", str(tmp_path / "x.json")], capsys)
    assert code == 2


# -- transform ----------------------------------------------------------------


def test_transform_s8(s8file, tmp_path, capsys):
    out_path = tmp_path / "plan.json"
    dot = tmp_path / "plan.dot"
    code, out, _ = run(["transform", "-g", str(s8file), "-b", "2", "-o", str(out_path), "--emit-dot", str(dot)], capsys)
    assert code == 0
    assert "1 macro-steps" in out
    assert "redundant tasks per processor: 1 1" in out
    assert "redundancy: 2 tasks total" in out
    assert "messages: 2, elements: 4" in out
    plan = load_plan(out_path)
    assert plan.block == 2 and len(plan.steps) == 1
    assert dot.read_text().startswith("digraph")


def test_transform_bad_block(s8file, tmp_path, capsys):
    code, _, err = run(["transform", "-g", str(s8file), "-b", "0", "-o", str(tmp_path / "p.json")], capsys)
    assert code == 1 and "error:" in err


def test_transform_refuses_then_forces(s8file, tmp_path, monkeypatch, capsys):
    fake = [(0, SplitViolation("b", 0, "3,1", None, "corrupted for the test"))]
    monkeypatch.setattr(cli, "verify_plan", lambda g, plan: fake)
    out_path = tmp_path / "p.json"
    code, _, err = run(["transform", "-g", str(s8file), "-b", "2", "-o", str(out_path)], capsys)
    assert code == 1 and "not written" in err
    assert not out_path.exists()
    code, _, err = run(["transform", "-g", str(s8file), "-b", "2", "-o", str(out_path), "--force"], capsys)
    assert code == 0 and "warning" in err
    assert out_path.exists()


def test_missing_graph_file(tmp_path, capsys):
    code, _, err = run(["transform", "-g", str(tmp_path / "nope.json"), "-b", "2", "-o", str(tmp_path / "p.json")], capsys)
    assert code == 1 and "nope.json" in err


def test_malformed_graph_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"nprocs": 1, "tasks": [{"id": 3, "proc": 0}], "edges": []}')
    code, _, err = run(["simulate", "-g", str(bad)], capsys)
    assert code == 1 and "tasks[0].id" in err


# -- validate -----------------------------------------------------------------


def test_validate(s8file, tmp_path, capsys):
    cov = tmp_path / "c.json"
    run(["generate", "--stencil1d", "8,2,2,1", "-o", str(tmp_path / "g.json"), "--cover", str(cov)], capsys)
    code, out, _ = run(["validate", "-g", str(s8file), "-c", str(cov)], capsys)
    assert code == 0
    assert json.loads(out) == {"valid": True, "violations": [], "granularity": 4}

    code, out, _ = run(["validate", "-g", str(s8file), "-c", str(cov), "--overlap"], capsys)
    doc = json.loads(out)
    assert code == 1 and doc["valid"] and not doc["overlap_ok"]
    assert {"k": 1, "p": 0, "task": "3,1", "pred": "4,0"} in doc["overlap_witnesses"]

    bad = tmp_path / "lbs.json"
    save_cover(lbs_case_b(load_graph(s8file)), bad)
    code, out, _ = run(["validate", "-g", str(s8file), "-c", str(bad)], capsys)
    doc = json.loads(out)
    assert code == 1 and not doc["valid"]
    assert {v["condition"] for v in doc["violations"]} == {3}


# -- simulate -----------------------------------------------------------------


def test_simulate_listing(s8file, capsys):
    code, out, _ = run(["simulate", "-g", str(s8file), "-b", "2", "--beta", "1", "--threads", "3"], capsys)
    assert code == 0
    assert out.count("total parallel time : 1*(0+2+2) = 4") == 2
    assert out.rstrip().endswith("2 tasks to recv, 2 k2 parallel time")


def test_simulate_json_and_naive(s8file, capsys):
    code, out, _ = run(["simulate", "-g", str(s8file), "-b", "2", "--alpha", "2", "--threads", "3", "--json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["total"] == 4 and doc["variant"] == "blocked"
    code, out, _ = run(["simulate", "-g", str(s8file), "--variant", "naive", "--alpha", "10", "--threads", "4", "--json"], capsys)
    assert json.loads(out)["total"] == 22
    code, out, _ = run(["simulate", "-g", str(s8file), "--threads", "inf", "--json"], capsys)
    assert code == 0 and json.loads(out)["total"] == 4
    assert run(["simulate", "-g", str(s8file), "--threads", "0"], capsys)[0] == 2
    assert run(["simulate", "-g", str(s8file), "--alpha", "-1"], capsys)[0] == 2


# -- sweep --------------------------------------------------------------------


def write_config(path, **kw):
    cfg = {"graph": {"stencil1d": [64, 4, 8, 1]}, "b": [2, 4], "alpha": [1000, 10000], "threads": [1, 2, 4, 8, 16]}
    cfg.update(kw)
    path.write_text(json.dumps(cfg))
    return path


def test_sweep_rows_and_determinism(tmp_path, capsys):
    cfg = write_config(tmp_path / "sweep.json")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    code, out, _ = run(["sweep", "--config", str(cfg), "-o", str(a), "--gnuplot", str(tmp_path / "plots")], capsys)
    assert code == 0 and "30 rows" in out
    run(["sweep", "--config", str(cfg), "-o", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()
    rows = load_sweep(a).rows
    assert len(rows) == 2 * 2 * 5 + 2 * 5
    assert sorted(p.name for p in (tmp_path / "plots").iterdir()) == ["sweep_alpha1000.dat", "sweep_alpha10000.dat"]


def test_sweep_graph_forms(s8file, tmp_path, capsys):
    cfg = write_config(tmp_path / "path.json", graph={"path": s8file.name}, b=[2], alpha=[0], threads=[3, "inf"])
    code, _, _ = run(["sweep", "--config", str(cfg), "-o", str(tmp_path / "o.csv")], capsys)
    assert code == 0
    text = (tmp_path / "o.csv").read_text()
    assert "3,0,blocked,2,4" in text
    inline = json.loads(s8file.read_text())
    cfg = write_config(tmp_path / "inline.json", graph=inline, b=[2], alpha=[0], threads=[3])
    assert run(["sweep", "--config", str(cfg), "-o", str(tmp_path / "i.csv")], capsys)[0] == 0


def test_sweep_config_errors(tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.json", b=[0])
    code, _, err = run(["sweep", "--config", str(cfg), "-o", str(tmp_path / "o.csv")], capsys)
    assert code == 1 and "b/0" in err
    cfg = write_config(tmp_path / "bad2.json", graph={"stencil1d": [8, 2]})
    assert run(["sweep", "--config", str(cfg), "-o", str(tmp_path / "o.csv")], capsys)[0] == 1
    (tmp_path / "bad3.json").write_text("{")
    assert run(["sweep", "--config", str(tmp_path / "bad3.json"), "-o", str(tmp_path / "o.csv")], capsys)[0] == 1


# -- usage and environment --------------------------------------------------


def test_unknown_flag_and_command(capsys):
    assert run(["simulate", "--frobnicate"], capsys)[0] == 2
    assert run(["launch"], capsys)[0] == 2
    assert run([], capsys)[0] == 2


def test_environment_defaults(s8file, capsys):
    env = {"CA_GRAPH": str(s8file), "CA_BLOCK": "2", "CA_THREADS": "3", "CA_BETA": "1", "CA_JSON": "yes"}
    code, out, _ = run(["simulate"], capsys, env)
    assert code == 0 and json.loads(out)["total"] == 4
    # flags win over the environment
    code, out, _ = run(["simulate", "--threads", "1"], capsys, env)
    assert json.loads(out)["total"] > 4
    code, out, _ = run(["simulate"], capsys, dict(env, CA_JSON="0"))
    assert "total parallel time" in out


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "latavoid", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "generate" in r.stdout
