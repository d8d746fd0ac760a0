"""Graphviz rendering of a split: one cluster per processor, one color per subset."""

from __future__ import annotations

from .avoid import AvoidSplit, MacroStepPlan
from .graph import TaskGraph

COLORS = {
    "l0": "lightgray",
    "l1": "tomato",
    "l2": "palegreen",
    "l3": "lightskyblue",
    "recv": "khaki",
}


def _q(s) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _classify(s: AvoidSplit, p: int, data) -> dict:
    ps = s.procs[p]
    kind = {t: "l0" for t in ps.l0}
    kind.update((t, "recv") for t in s.received(p))
    kind.update((t, "l3") for t in s.l3_compute(p, data))
    kind.update((t, "l2") for t in ps.l2)
    kind.update((t, "l1") for t in ps.l1)
    return kind


def split_to_dot(g: TaskGraph, s: AvoidSplit, prefix: str = "") -> list[str]:
    data = s.data()
    lines = []
    node = {}
    for p in range(s.nprocs):
        kind = _classify(s, p, data)
        lines.append(f"  subgraph {_q(f'cluster_{prefix}p{p}')} {{")
        lines.append(f"    label={_q(f'{prefix}proc {p}')};")
        for t in sorted(kind):
            nid = f"{prefix}p{p}:{t}"
            node[p, t] = nid
            label = g.task(t).label or t
            lines.append(f"    {_q(nid)} [label={_q(label)}, fillcolor={COLORS[kind[t]]}, class={kind[t]}];")
        lines.append("  }")
    for p in range(s.nprocs):
        for t in sorted(s.computed(p, data)):
            for q in sorted(g.preds(t)):
                if (p, q) in node:
                    lines.append(f"  {_q(node[p, q])} -> {_q(node[p, t])};")
    for (q, p), ts in sorted(s.recv.items()):
        for t in sorted(ts):
            lines.append(f"  {_q(node[q, t])} -> {_q(node[p, t])} [style=dashed, color=gray40];")
    return lines


def emit_dot(g: TaskGraph, what, name: str = "split") -> str:
    """DOT text for an :class:`AvoidSplit` or every step of a :class:`MacroStepPlan`.

    Colors: initial data gray, ``l1`` red, ``l2`` green, computed ``l3``
    blue, received elements yellow.  Dashed edges are messages.
    """
    lines = [f"digraph {_q(name)} {{", "  node [style=filled, shape=box];"]
    if isinstance(what, MacroStepPlan):
        for i, s in enumerate(what.steps):
            lines += split_to_dot(g, s, prefix=f"s{i} ")
    else:
        lines += split_to_dot(g, what)
    lines.append("}")
    return "\n".join(lines) + "\n"
