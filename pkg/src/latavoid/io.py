"""JSON and CSV file formats.

Every ``save_*``/``dump_*`` writes a canonical form: keys in a fixed order,
sets sorted by task id, one list item per line.  Loading a saved file and
saving it again therefore gives identical bytes.

Schemas are enforced with :mod:`jsonschema`; unknown fields are rejected and
errors carry the path of the offending value.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path

import jsonschema

from .avoid import SUBSETS, AvoidSplit, MacroStepPlan, ProcSplit
from .cover import CoverReport, LevelCover
from .errors import ParseError, SchemaError
from .graph import Task, TaskGraph, build_graph
from .simulate import PhaseTrace, SweepRow, SweepTable

_ids = {"type": "array", "items": {"type": "string"}}

GRAPH_SCHEMA = {
    "type": "object",
    "required": ["nprocs", "tasks", "edges"],
    "additionalProperties": False,
    "properties": {
        "nprocs": {"type": "integer", "minimum": 1},
        "tasks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "proc"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string"},
                    "proc": {"type": "integer", "minimum": 0},
                    "weight": {"type": "number", "minimum": 0},
                    "label": {"type": "string"},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {"type": "array", "prefixItems": [{"type": "string"}] * 2, "minItems": 2, "maxItems": 2},
        },
    },
}

COVER_SCHEMA = {
    "type": "object",
    "required": ["blocks"],
    "additionalProperties": False,
    "properties": {
        "blocks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["k", "p", "tasks"],
                "additionalProperties": False,
                "properties": {
                    "k": {"type": "integer", "minimum": 0},
                    "p": {"type": "integer", "minimum": 0},
                    "tasks": _ids,
                },
            },
        }
    },
}

_entry = {
    "type": "object",
    "required": ["step", "p", "target", *SUBSETS, "recv"],
    "additionalProperties": False,
    "properties": {
        "step": {"type": "integer", "minimum": 0},
        "p": {"type": "integer", "minimum": 0},
        "target": _ids,
        **{k: _ids for k in SUBSETS},
        "recv": {"type": "object", "patternProperties": {r"^\d+->\d+$": _ids}, "additionalProperties": False},
    },
}

PLAN_SCHEMA = {
    "type": "object",
    "required": ["nprocs", "steps"],
    "additionalProperties": False,
    "properties": {
        "block": {"type": "integer", "minimum": 1},
        "nprocs": {"type": "integer", "minimum": 1},
        "levels": {
            "type": "array",
            "items": {"type": "array", "prefixItems": [{"type": "integer"}] * 2, "minItems": 2, "maxItems": 2},
        },
        "steps": {"type": "array", "items": _entry},
    },
}

SWEEP_HEADER = ["threads", "alpha", "variant", "block", "total"]


# -- helpers ----------------------------------------------------------------


def _num(x):
    """Integral floats become ints so ``1.0`` and ``1`` serialize alike."""
    if isinstance(x, float) and x.is_integer():
        return int(x)
    return x


def _dump(doc: dict) -> str:
    """Top-level keys one per line, list items one per line, compact inside."""
    lines = ["{"]
    keys = list(doc)
    for i, k in enumerate(keys):
        v = doc[k]
        sep = "," if i < len(keys) - 1 else ""
        if isinstance(v, list) and v:
            lines.append(f"  {json.dumps(k)}: [")
            lines += [f"    {json.dumps(x)}," for x in v[:-1]]
            lines.append(f"    {json.dumps(v[-1])}")
            lines.append(f"  ]{sep}")
        else:
            lines.append(f"  {json.dumps(k)}: {json.dumps(v)}{sep}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _parse(text: str, what: str, source: str | None):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        where = f"{source}: " if source else ""
        raise ParseError(f"{where}{what} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from None


def _check(doc, schema, what: str, source: str | None):
    v = jsonschema.Draft202012Validator(schema)
    errors = sorted(v.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        path = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in e.absolute_path).lstrip(".") or "<root>"
        where = f"{source}: " if source else ""
        raise SchemaError(f"{where}{what} {path}: {e.message}")


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


# -- graph ------------------------------------------------------------------


def graph_to_dict(g: TaskGraph) -> dict:
    tasks = []
    for t in g.tasks():
        d = {"id": t.id, "proc": t.proc, "weight": _num(t.weight)}
        if t.label is not None:
            d["label"] = t.label
        tasks.append(d)
    return {"nprocs": g.nprocs, "tasks": tasks, "edges": [list(e) for e in g.edges()]}


def graph_from_dict(doc, source: str | None = None) -> TaskGraph:
    _check(doc, GRAPH_SCHEMA, "graph", source)
    tasks = [Task(t["id"], t["proc"], t.get("weight", 1), t.get("label")) for t in doc["tasks"]]
    return build_graph(tasks, [tuple(e) for e in doc["edges"]], doc["nprocs"])


def dumps_graph(g: TaskGraph) -> str:
    return _dump(graph_to_dict(g))


def loads_graph(text: str, source: str | None = None) -> TaskGraph:
    return graph_from_dict(_parse(text, "graph", source), source)


def save_graph(g: TaskGraph, path) -> None:
    _write(path, dumps_graph(g))


def load_graph(path) -> TaskGraph:
    return loads_graph(_read(path), os.fspath(path))


# -- cover ------------------------------------------------------------------


def cover_to_dict(c: LevelCover) -> dict:
    return {"blocks": [{"k": k, "p": p, "tasks": sorted(c.blocks[k, p])} for k, p in sorted(c.blocks)]}


def cover_from_dict(doc, source: str | None = None) -> LevelCover:
    _check(doc, COVER_SCHEMA, "cover", source)
    blocks: dict[tuple[int, int], frozenset] = {}
    for b in doc["blocks"]:
        key = (b["k"], b["p"])
        if key in blocks:
            raise SchemaError(f"{source + ': ' if source else ''}cover lists block k={key[0]} p={key[1]} twice")
        blocks[key] = frozenset(b["tasks"])
    return LevelCover(blocks)


def dumps_cover(c: LevelCover) -> str:
    return _dump(cover_to_dict(c))


def loads_cover(text: str, source: str | None = None) -> LevelCover:
    return cover_from_dict(_parse(text, "cover", source), source)


def save_cover(c: LevelCover, path) -> None:
    _write(path, dumps_cover(c))


def load_cover(path) -> LevelCover:
    return loads_cover(_read(path), os.fspath(path))


def dumps_report(r: CoverReport) -> str:
    return json.dumps(r.as_dict(), indent=2) + "\n"


# -- splits and plans -------------------------------------------------------


def _split_entries(s: AvoidSplit, step: int) -> list[dict]:
    out = []
    for p, ps in enumerate(s.procs):
        e = {"step": step, "p": p, "target": sorted(ps.target)}
        for k in SUBSETS:
            e[k] = sorted(getattr(ps, k))
        e["recv"] = {f"{q}->{pp}": sorted(ts) for (q, pp), ts in sorted(s.recv.items()) if pp == p}
        out.append(e)
    return out


def plan_to_dict(plan: MacroStepPlan) -> dict:
    steps = []
    for i, s in enumerate(plan.steps):
        steps += _split_entries(s, i)
    return {
        "block": plan.block,
        "nprocs": plan.nprocs,
        "levels": [list(x) for x in plan.levels],
        "steps": steps,
    }


def split_to_dict(s: AvoidSplit) -> dict:
    return {"nprocs": s.nprocs, "steps": _split_entries(s, 0)}


def _steps_from_entries(doc, source) -> list[AvoidSplit]:
    P = doc["nprocs"]
    where = f"{source}: " if source else ""
    grouped: dict[int, dict[int, dict]] = {}
    for e in doc["steps"]:
        if e["p"] >= P:
            raise SchemaError(f"{where}plan entry for processor {e['p']} but nprocs is {P}")
        per = grouped.setdefault(e["step"], {})
        if e["p"] in per:
            raise SchemaError(f"{where}plan lists processor {e['p']} twice in step {e['step']}")
        per[e["p"]] = e
    if sorted(grouped) != list(range(len(grouped))):
        raise SchemaError(f"{where}plan steps must be numbered 0..n-1")
    steps = []
    for i in range(len(grouped)):
        per = grouped[i]
        if sorted(per) != list(range(P)):
            raise SchemaError(f"{where}step {i} must have one entry per processor 0..{P - 1}")
        procs = []
        recv = {}
        for p in range(P):
            e = per[p]
            procs.append(ProcSplit(frozenset(e["target"]), *(frozenset(e[k]) for k in SUBSETS)))
            for key, ts in e["recv"].items():
                q, dst = map(int, key.split("->"))
                if dst != p or q >= P:
                    raise SchemaError(f"{where}step {i} processor {p} has misplaced message {key!r}")
                recv[q, dst] = frozenset(ts)
        steps.append(AvoidSplit(procs, dict(sorted(recv.items()))))
    return steps


def plan_from_dict(doc, source: str | None = None) -> MacroStepPlan:
    _check(doc, PLAN_SCHEMA, "plan", source)
    for k in ("block", "levels"):
        if k not in doc:
            raise SchemaError(f"{source + ': ' if source else ''}plan <root>: {k!r} is a required property")
    steps = _steps_from_entries(doc, source)
    if len(doc["levels"]) != len(steps):
        raise SchemaError(f"{source + ': ' if source else ''}plan has {len(steps)} steps but {len(doc['levels'])} level spans")
    return MacroStepPlan(doc["block"], doc["nprocs"], steps, [tuple(x) for x in doc["levels"]])


def split_from_dict(doc, source: str | None = None) -> AvoidSplit:
    _check(doc, PLAN_SCHEMA, "split", source)
    steps = _steps_from_entries(doc, source)
    if len(steps) != 1:
        raise SchemaError(f"{source + ': ' if source else ''}a split has exactly one step, found {len(steps)}")
    return steps[0]


def dumps_plan(plan: MacroStepPlan) -> str:
    return _dump(plan_to_dict(plan))


def loads_plan(text: str, source: str | None = None) -> MacroStepPlan:
    return plan_from_dict(_parse(text, "plan", source), source)


def save_plan(plan: MacroStepPlan, path) -> None:
    _write(path, dumps_plan(plan))


def load_plan(path) -> MacroStepPlan:
    return loads_plan(_read(path), os.fspath(path))


def dumps_split(s: AvoidSplit) -> str:
    return _dump(split_to_dict(s))


def loads_split(text: str, source: str | None = None) -> AvoidSplit:
    return split_from_dict(_parse(text, "split", source), source)


def dumps_trace(trace: PhaseTrace) -> str:
    return json.dumps(trace.as_dict(), indent=2) + "\n"


# -- sweeps -----------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return str(_num(x))


def _parse_num(s: str, what: str, line: int):
    try:
        x = float(s)
    except ValueError:
        raise ParseError(f"sweep line {line}: {what} {s!r} is not a number") from None
    return _num(x)


def dumps_sweep(table: SweepTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in table.rows:
        w.writerow([_fmt(r.threads), _fmt(r.alpha), r.variant, _fmt(r.block), _fmt(r.total)])
    return buf.getvalue()


def loads_sweep(text: str) -> SweepTable:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != SWEEP_HEADER:
        raise SchemaError(f"sweep header must be {','.join(SWEEP_HEADER)}, got {header}")
    rows = []
    for n, rec in enumerate(reader, start=2):
        if len(rec) != 5:
            raise SchemaError(f"sweep line {n}: expected 5 fields, got {len(rec)}")
        threads, alpha, variant, block, total = rec
        if variant not in ("naive", "blocked"):
            raise SchemaError(f"sweep line {n}: unknown variant {variant!r}")
        b = None if block == "" else int(_parse_num(block, "block", n))
        rows.append(
            SweepRow(_parse_num(threads, "threads", n), _parse_num(alpha, "alpha", n), variant, b, _parse_num(total, "total", n))
        )
    return SweepTable(rows)


def save_sweep(table: SweepTable, path) -> None:
    _write(path, dumps_sweep(table))


def load_sweep(path) -> SweepTable:
    return loads_sweep(_read(path))


def write_gnuplot(table: SweepTable, directory) -> list[Path]:
    """One whitespace-separated columns file per alpha: threads, naive, then each block size."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    blocks = sorted({r.block for r in table.rows if r.variant == "blocked"})
    paths = []
    for a in sorted({r.alpha for r in table.rows}):
        naive = table.totals("naive", a)
        cols = [table.totals("blocked", a, b) for b in blocks]
        lines = [f"# alpha={_fmt(a)}", "# threads naive " + " ".join(f"blocked_b{b}" for b in blocks)]
        for w in sorted(set(naive).union(*cols)):
            vals = [naive.get(w)] + [c.get(w) for c in cols]
            lines.append(" ".join([_fmt(w)] + ["?" if v is None else _fmt(v) for v in vals]))
        p = d / f"sweep_alpha{_fmt(a)}.dat"
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths.append(p)
    return paths
