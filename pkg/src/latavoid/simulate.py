"""Phase-model runtimes of naive and blocked executions.

A macro-step on one processor costs ``k1 + max(k2, recv) + k3``: the sent
tasks are computed first, the halo arrives while the purely local work runs,
and the tasks needing the halo come last.  Processors synchronize at every
macro-step boundary, so a step costs the maximum over processors.

``recv`` is ``alpha + beta * elements`` (latency paid once per step), plus
any time spent waiting for a sender whose ``k1`` phase ends later than the
receiver's.

Parallel time of a task set is computed level by level over its internal
dependency depth, each level costing ``ceil(work / threads)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .avoid import MacroStepPlan, blocked_transform, verify_plan
from .cover import LevelCover, validate_cover
from .errors import InvalidCover, MalformedPlan
from .generators import per_level_cover
from .graph import TaskGraph, TaskId


@dataclass
class CostModel:
    alpha: float = 0
    beta: float = 0
    threads: float = 1
    nodes: int | None = None

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def comm_time(self, elements: int) -> float:
        return self.alpha + self.beta * elements if elements else 0


def depth_profile(g: TaskGraph, tasks: Iterable[TaskId]) -> list[float]:
    """Work per internal dependency depth of the subgraph induced by ``tasks``."""
    S = set(tasks)
    g.check_ids(S)
    preds, weight = g.pred_map, g.weight_of
    depth: dict[TaskId, int] = {}
    work: list[float] = []
    for t in sorted(S, key=g.index_of.__getitem__):
        d = 0
        for q in preds[t]:
            if q in depth and depth[q] >= d:
                d = depth[q] + 1
        depth[t] = d
        if d == len(work):
            work.append(0)
        work[d] += weight[t]
    return work


def profile_time(work: Sequence[float], threads: float) -> float:
    if math.isinf(threads):
        return sum(1 for w in work if w > 0)
    return sum(math.ceil(w / threads) for w in work)


def parallel_time(g: TaskGraph, tasks: Iterable[TaskId], threads: float) -> float:
    return profile_time(depth_profile(g, tasks), threads)


# -- traces -----------------------------------------------------------------


@dataclass
class PhaseRow:
    step: int
    proc: int
    k1_tasks: int
    k1_pt: float
    recv_elems: int
    recv_time: float
    k2_tasks: int
    k2_pt: float
    k3_tasks: int
    k3_pt: float

    @property
    def stall(self) -> float:
        return max(0, self.recv_time - self.k2_pt)

    @property
    def middle(self) -> float:
        return max(self.k2_pt, self.recv_time)

    @property
    def total(self) -> float:
        return self.k1_pt + self.middle + self.k3_pt


@dataclass
class PhaseTrace:
    variant: str
    nprocs: int
    rows: list[PhaseRow] = field(default_factory=list)
    block: int | None = None

    @property
    def nsteps(self) -> int:
        return 1 + max((r.step for r in self.rows), default=-1)

    def step_totals(self) -> list[float]:
        out = [0] * self.nsteps
        for r in self.rows:
            out[r.step] = max(out[r.step], r.total)
        return out

    @property
    def total(self) -> float:
        return sum(self.step_totals())

    def node_rows(self, p: int) -> list[PhaseRow]:
        return [r for r in self.rows if r.proc == p]

    def as_dict(self):
        rows = []
        for r in self.rows:
            d = asdict(r)
            d.update(stall=r.stall, step_total=r.total)
            rows.append(d)
        return {
            "variant": self.variant,
            "block": self.block,
            "nprocs": self.nprocs,
            "rows": rows,
            "step_totals": self.step_totals(),
            "total": self.total,
        }


def _num(x) -> str:
    if isinstance(x, float) and x.is_integer():
        x = int(x)
    return str(x)


def format_trace(trace: PhaseTrace) -> str:
    """Render a trace node by node in the classic listing layout."""
    out = []
    for p in range(trace.nprocs):
        rows = trace.node_rows(p)
        terms = [(r.k1_pt, r.middle, r.k3_pt) for r in rows]
        node_total = sum(r.total for r in rows)
        if terms and all(t == terms[0] for t in terms):
            formula = f"{len(terms)}*({'+'.join(_num(x) for x in terms[0])})"
        else:
            formula = "+".join(f"({'+'.join(_num(x) for x in t)})" for t in terms) or "0"
        recv = sum(r.recv_elems for r in rows)
        k2pt = sum(r.k2_pt for r in rows)
        out += [
            f"Graph on node {p},",
            f"    execution of {len(rows)} macro steps:",
            f"k1 local execution: {sum(r.k1_tasks for r in rows)}",
            f"  parallel time: {_num(sum(r.k1_pt for r in rows))}",
            f"k3 receive: {recv}",
            f"k2 local execution: {sum(r.k2_tasks for r in rows)}",
            f"  parallel time: {_num(k2pt)}",
            f"k3 local execution: {sum(r.k3_tasks for r in rows)}",
            f"  parallel time: {_num(sum(r.k3_pt for r in rows))}",
            f"total parallel time : {formula} = {_num(node_total)}",
            "overlap analysis:",
            f"  {recv} tasks to recv, {_num(k2pt)} k2 parallel time",
        ]
    return "\n".join(out) + "\n"


# -- blocked and naive ------------------------------------------------------


@dataclass
class StepProfile:
    k1: tuple[int, list[float]]
    k2: tuple[int, list[float]]
    k3: tuple[int, list[float]]
    recv_elems: int
    # processors whose l1 results this one receives
    l1_senders: tuple[int, ...] = ()


def plan_profile(plan: MacroStepPlan, g: TaskGraph) -> list[list[StepProfile]]:
    """Thread-count independent part of :func:`simulate_blocked`."""
    out = []
    for s in plan.steps:
        data = s.data()
        row = []
        for p, ps in enumerate(s.procs):
            l3c = s.l3_compute(p, data)
            row.append(
                StepProfile(
                    (len(ps.l1), depth_profile(g, ps.l1)),
                    (len(ps.l2), depth_profile(g, ps.l2)),
                    (len(l3c), depth_profile(g, l3c)),
                    len(s.received(p)),
                    tuple(sorted(q for (q, pp), ts in s.recv.items() if pp == p and ts & s.procs[q].l1)),
                )
            )
        out.append(row)
    return out


def _check_nodes(g, m):
    if m.nodes is not None and m.nodes != g.nprocs:
        raise ValueError(f"cost model has {m.nodes} nodes, graph has {g.nprocs} processors")


def trace_from_profile(prof, m: CostModel, nprocs: int, block: int | None = None) -> PhaseTrace:
    w = m.threads
    trace = PhaseTrace("blocked", nprocs, block=block)
    for i, row in enumerate(prof):
        k1 = [profile_time(sp.k1[1], w) for sp in row]
        for p, sp in enumerate(row):
            # l1 results cannot leave a sender before its own k1 phase is over
            wait = max([0] + [k1[q] - k1[p] for q in sp.l1_senders])
            trace.rows.append(
                PhaseRow(
                    i, p,
                    sp.k1[0], k1[p],
                    sp.recv_elems, wait + m.comm_time(sp.recv_elems),
                    sp.k2[0], profile_time(sp.k2[1], w),
                    sp.k3[0], profile_time(sp.k3[1], w),
                )
            )
    return trace


def simulate_blocked(plan: MacroStepPlan, g: TaskGraph, m: CostModel, *, check: bool = True) -> PhaseTrace:
    _check_nodes(g, m)
    if check:
        bad = verify_plan(g, plan)
        if bad:
            step, v = bad[0]
            raise MalformedPlan(f"macro-step {step}: {v}")
    return trace_from_profile(plan_profile(plan, g), m, plan.nprocs, plan.block)


def naive_profile(c: LevelCover, g: TaskGraph):
    """Per level ``k >= 1``: any cross edge, incoming element counts and work profiles per processor."""
    out = []
    for k in range(1, c.kmax + 1):
        incoming, work = [], []
        for p in range(g.nprocs):
            blk = c.block(k, p)
            own = g.owned(p)
            remote = {q for t in blk for q in g.pred_map[t] if q not in own}
            incoming.append(len(remote))
            work.append((len(blk), depth_profile(g, blk)))
        out.append((incoming, work))
    return out


def naive_from_profile(prof, m: CostModel, nprocs: int) -> PhaseTrace:
    trace = PhaseTrace("naive", nprocs)
    for i, (incoming, work) in enumerate(prof):
        comm = m.alpha * any(incoming) + m.beta * max(incoming, default=0)
        for p in range(nprocs):
            n, prof_p = work[p]
            # one unoverlapped exchange per level, then the local update
            trace.rows.append(PhaseRow(i, p, 0, 0, incoming[p], comm, 0, 0, n, profile_time(prof_p, m.threads)))
    return trace


def simulate_naive(c: LevelCover, g: TaskGraph, m: CostModel) -> PhaseTrace:
    """Level-synchronous execution without overlap; level 0 is initial data."""
    _check_nodes(g, m)
    report = validate_cover(g, c)
    if not report.valid:
        v = report.violations[0]
        raise InvalidCover(f"cover violates condition {v.condition} at {v.task!r}: {v.detail}")
    return naive_from_profile(naive_profile(c, g), m, g.nprocs)


# -- data transfer orchestration -------------------------------------------


@dataclass(frozen=True)
class Descriptor:
    src: int
    dst: int
    element: TaskId
    posted_at: int
    consumed_at: int
    elements: int = 1

    @property
    def live(self) -> tuple[int, int]:
        return (self.posted_at, self.consumed_at)


def _producer_step(plan: MacroStepPlan, level: int) -> int:
    for i, (lo, hi) in enumerate(plan.levels):
        if lo <= level <= hi:
            return i
    return 0


def transfer_schedule(plan: MacroStepPlan, g: TaskGraph):
    """One descriptor per communicated element, posted when its producer finishes.

    Returns ``(descriptors, peak)`` where ``peak[p]`` is the largest number of
    buffered elements bound for ``p`` that are live during any one step.
    """
    bad = verify_plan(g, plan)
    if bad:
        step, v = bad[0]
        raise MalformedPlan(f"macro-step {step}: {v}")
    depth = g.levels()
    desc = []
    for s, sp in enumerate(plan.steps):
        for (q, p), ts in sorted(sp.recv.items()):
            for t in sorted(ts):
                posted = s if t in sp.procs[q].l1 else _producer_step(plan, depth[t])
                desc.append(Descriptor(q, p, t, posted, s))
    peak = [0] * plan.nprocs
    for j in range(len(plan.steps)):
        live = [0] * plan.nprocs
        for d in desc:
            if d.posted_at <= j <= d.consumed_at:
                live[d.dst] += d.elements
        peak = [max(a, b) for a, b in zip(peak, live)]
    return desc, peak


# -- strong scaling ---------------------------------------------------------


@dataclass
class SweepRow:
    threads: float
    alpha: float
    variant: str
    block: int | None
    total: float

    def key(self):
        return (self.alpha, self.variant, self.block or 0, self.threads)


@dataclass
class SweepTable:
    rows: list[SweepRow]
    metadata: dict = field(default_factory=dict)

    def totals(self, variant: str, alpha: float, block: int | None = None) -> dict:
        return {
            r.threads: r.total
            for r in self.rows
            if r.variant == variant and r.alpha == alpha and (block is None or r.block == block)
        }


@dataclass
class Scenario:
    graph: TaskGraph
    blocks: list[int]
    alphas: list[float]
    threads: list[float]
    beta: float = 0
    metadata: dict = field(default_factory=dict)


def strong_scaling_sweep(sc: Scenario) -> SweepTable:
    """Naive and blocked totals for every (alpha, block, threads) combination on a fixed graph."""
    g = sc.graph
    cover = per_level_cover(g)
    naive = naive_profile(cover, g)
    blocked = {b: plan_profile(blocked_transform(g, cover, b), g) for b in sc.blocks}
    rows = []
    for a in sc.alphas:
        for w in sc.threads:
            m = CostModel(a, sc.beta, w, g.nprocs)
            rows.append(SweepRow(w, a, "naive", None, naive_from_profile(naive, m, g.nprocs).total))
            for b, prof in blocked.items():
                rows.append(SweepRow(w, a, "blocked", b, trace_from_profile(prof, m, g.nprocs, b).total))
    rows.sort(key=SweepRow.key)
    return SweepTable(rows, dict(sc.metadata))
