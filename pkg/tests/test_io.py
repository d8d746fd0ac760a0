import json
import math

import pytest

from conftest import full_corpus, s8
from latavoid.avoid import blocked_transform, split
from latavoid.cover import LevelCover, validate_cover
from latavoid.dot import COLORS, emit_dot
from latavoid.errors import DanglingEdge, ParseError, SchemaError
from latavoid.generators import per_level_cover, random_dag
from latavoid.graph import Task, build_graph
from latavoid.io import (
    dumps_cover,
    dumps_graph,
    dumps_plan,
    dumps_report,
    dumps_split,
    dumps_sweep,
    load_cover,
    load_graph,
    load_plan,
    load_sweep,
    loads_cover,
    loads_graph,
    loads_plan,
    loads_split,
    loads_sweep,
    save_cover,
    save_graph,
    save_plan,
    save_sweep,
    write_gnuplot,
)
from latavoid.simulate import Scenario, SweepRow, SweepTable, strong_scaling_sweep


def test_graph_round_trip(tmp_path):
    g = s8()
    path = tmp_path / "g.json"
    save_graph(g, path)
    h = load_graph(path)
    assert h == g
    assert dumps_graph(h) == path.read_text()
    assert h.task("3,1").label == "(3,1)"


def test_graph_weights_and_defaults():
    text = '{"nprocs": 1, "tasks": [{"id": "a", "proc": 0}, {"id": "b", "proc": 0, "weight": 2.5}], "edges": [["a", "b"]]}'
    g = loads_graph(text)
    assert g.weight("a") == 1 and g.weight("b") == 2.5
    assert loads_graph(dumps_graph(g)) == g


def test_graph_file_layout():
    text = dumps_graph(build_graph([Task("a", 0), Task("b", 0)], [("a", "b")], 1))
    assert text.splitlines()[:3] == ['{', '  "nprocs": 1,', '  "tasks": [']
    assert '    ["a", "b"]' in text
    assert text.endswith("}\n")


def test_parse_error_has_position():
    with pytest.raises(ParseError) as exc:
        loads_graph('{"nprocs": 1,\n  "tasks": [}', source="bad.json")
    msg = str(exc.value)
    assert "bad.json" in msg and "line 2" in msg


@pytest.mark.parametrize(
    "doc,path",
    [
        ({"nprocs": 1, "tasks": [{"id": "a", "proc": -1}], "edges": []}, "tasks[0].proc"),
        ({"nprocs": 1, "tasks": [{"id": "a"}], "edges": []}, "tasks[0]"),
        ({"nprocs": 1, "tasks": [], "edges": [["a"]]}, "edges[0]"),
        ({"nprocs": 1, "tasks": [], "edges": [], "extra": 1}, "<root>"),
        ({"tasks": [], "edges": []}, "<root>"),
    ],
)
def test_schema_errors_name_the_path(doc, path):
    with pytest.raises(SchemaError) as exc:
        loads_graph(json.dumps(doc))
    assert f"graph {path}:" in str(exc.value)


def test_dangling_edge_names_the_id():
    with pytest.raises(DanglingEdge) as exc:
        loads_graph('{"nprocs": 1, "tasks": [{"id": "a", "proc": 0}], "edges": [["a", "ghost"]]}')
    assert "ghost" in str(exc.value)
    assert isinstance(exc.value, SchemaError)


def test_cover_round_trip(tmp_path):
    g = s8()
    c = per_level_cover(g)
    path = tmp_path / "c.json"
    save_cover(c, path)
    assert load_cover(path) == c
    assert dumps_cover(load_cover(path)) == path.read_text()
    with pytest.raises(SchemaError):
        loads_cover('{"blocks": [{"k": 0, "p": 0, "tasks": []}, {"k": 0, "p": 0, "tasks": []}]}')
    with pytest.raises(SchemaError):
        loads_cover('{"blocks": [{"k": 0, "p": 0}]}')


def test_report_layout():
    g = s8()
    r = validate_cover(g, per_level_cover(g))
    d = json.loads(dumps_report(r))
    assert list(d) == ["valid", "violations", "granularity", "overlap_ok"]
    assert d == {"valid": True, "violations": [], "granularity": 4, "overlap_ok": False}


def test_plan_round_trip(tmp_path):
    g = s8()
    for b in (1, 2, 3):
        plan = blocked_transform(g, per_level_cover(g), b)
        path = tmp_path / f"plan{b}.json"
        save_plan(plan, path)
        back = load_plan(path)
        assert back == plan
        assert dumps_plan(back) == path.read_text()


def test_plan_structure_errors():
    g = s8()
    doc = json.loads(dumps_plan(blocked_transform(g, per_level_cover(g), 2)))
    bad = dict(doc, steps=doc["steps"][:1])
    with pytest.raises(SchemaError, match="one entry per processor"):
        loads_plan(json.dumps(bad))
    bad = {k: v for k, v in doc.items() if k != "block"}
    with pytest.raises(SchemaError, match="block"):
        loads_plan(json.dumps(bad))
    bad = json.loads(json.dumps(doc))
    bad["steps"][0]["recv"] = {"0->1": ["x"]}
    with pytest.raises(SchemaError, match="misplaced"):
        loads_plan(json.dumps(bad))
    bad = json.loads(json.dumps(doc))
    bad["steps"][0]["l9"] = []
    with pytest.raises(SchemaError):
        loads_plan(json.dumps(bad))


def test_split_round_trip():
    g = s8()
    target = {p: {t for t in g.owned(p) if g.levels()[t] >= 1} for p in range(2)}
    initial = {p: {t for t in g.owned(p) if g.levels()[t] == 0} for p in range(2)}
    s = split(g, target, initial)
    text = dumps_split(s)
    assert loads_split(text) == s
    assert dumps_split(loads_split(text)) == text


def sample_table():
    rows = [
        SweepRow(1, 1000, "naive", None, 12.5),
        SweepRow(2, 1000, "naive", None, 7.0),
        SweepRow(math.inf, 1000, "naive", None, 3),
        SweepRow(1, 1000, "blocked", 2, 10),
        SweepRow(2, 1000, "blocked", 2, 6),
        SweepRow(math.inf, 1000, "blocked", 2, 2.25),
    ]
    return SweepTable(rows)


def test_sweep_round_trip(tmp_path):
    t = sample_table()
    text = dumps_sweep(t)
    lines = text.splitlines()
    assert lines[0] == "threads,alpha,variant,block,total"
    assert lines[1] == "1,1000,naive,,12.5"
    assert lines[2] == "2,1000,naive,,7"
    assert lines[3] == "inf,1000,naive,,3"
    path = tmp_path / "s.csv"
    save_sweep(t, path)
    back = load_sweep(path)
    assert [r.key() for r in back.rows] == [r.key() for r in t.rows]
    assert dumps_sweep(back) == text


def test_sweep_parse_errors():
    with pytest.raises(SchemaError):
        loads_sweep("a,b\n")
    with pytest.raises(SchemaError):
        loads_sweep("threads,alpha,variant,block,total\n1,2,fancy,,3\n")
    with pytest.raises(ParseError, match="line 2"):
        loads_sweep("threads,alpha,variant,block,total\n1,x,naive,,3\n")


def test_sweep_from_scenario_round_trips():
    g = random_dag(20, 0.3, 2, 1)
    t = strong_scaling_sweep(Scenario(g, [1, 2], [0, 5], [1, 2, math.inf]))
    assert dumps_sweep(loads_sweep(dumps_sweep(t))) == dumps_sweep(t)


def test_write_gnuplot(tmp_path):
    paths = write_gnuplot(sample_table(), tmp_path / "plots")
    assert [p.name for p in paths] == ["sweep_alpha1000.dat"]
    assert paths[0].read_text().splitlines() == [
        "# alpha=1000",
        "# threads naive blocked_b2",
        "1 12.5 10",
        "2 7 6",
        "inf 3 2.25",
    ]


@pytest.mark.parametrize("idx", range(0, 400, 23))
def test_corpus_round_trips(idx):
    corpus = full_corpus()
    g = corpus[idx % len(corpus)]
    assert dumps_graph(loads_graph(dumps_graph(g))) == dumps_graph(g)
    c = per_level_cover(g)
    assert dumps_cover(loads_cover(dumps_cover(c))) == dumps_cover(c)
    plan = blocked_transform(g, c, 2)
    assert dumps_plan(loads_plan(dumps_plan(plan))) == dumps_plan(plan)


# -- dot --------------------------------------------------------------------


def test_dot_split_colors():
    g = s8()
    plan = blocked_transform(g, per_level_cover(g), 2)
    text = emit_dot(g, plan.steps[0])
    assert text.startswith('digraph "split" {')
    assert text.count("subgraph") == 2
    # proc 0 receives (4,0) and (5,0)
    assert '"p0:4,0" [label="(4,0)", fillcolor=khaki, class=recv];' in text
    assert '"p1:3,0" -> "p0:3,0"' not in text
    assert '"p1:4,0" -> "p0:4,0" [style=dashed, color=gray40];' in text
    assert "fillcolor=" + COLORS["l3"] in text
    assert text.count("class=l1") == 0


def test_dot_plan_prefixes():
    g = s8()
    plan = blocked_transform(g, per_level_cover(g), 1)
    text = emit_dot(g, plan, name="plan")
    assert text.startswith('digraph "plan" {')
    assert all(f'"cluster_s{i} p0"' in text for i in range(len(plan.steps)))


def test_dot_quotes_odd_ids():
    g = build_graph([Task('a"b', 0), Task("c", 1)], [('a"b', "c")], 2)
    c = LevelCover({(0, 0): {'a"b'}, (1, 1): {"c"}})
    plan = blocked_transform(g, c, 2)
    assert '"p0:a\\"b"' in emit_dot(g, plan.steps[0])
