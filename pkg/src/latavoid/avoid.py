"""Communication-avoiding splitting of a distributed task graph.

For every processor ``p`` the work needed to produce its target set is cut
into

* ``l0``: data present before the step starts,
* ``l4``: target tasks computable from ``l0`` alone (``l1`` + ``l2``),
* ``l5``: everything that must exist somewhere to build the target,
* ``l1``: the part of ``l4`` some other processor needs; computed first and
  sent right away,
* ``l2``: the rest of ``l4``; its computation hides the message latency,
* ``l3``: what is left of ``l5``, built after the halo has arrived.

``l3`` may contain remote initial data; those elements arrive by message and
are not recomputed (see :meth:`AvoidSplit.l3_compute`).  Any other remote
task in ``l3`` is recomputed locally, which is the redundant work traded for
fewer, overlappable messages.

A leveled graph is processed in macro-steps of ``b`` levels with
:func:`blocked_transform`; the results of one step are the initial data of the
next.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .cover import LevelCover, validate_cover
from .errors import BadBlockSize, InvalidCover, MalformedSplit, TargetNotOwned, Unreachable
from .graph import Task, TaskGraph, TaskId, build_graph

SUBSETS = ("l0", "l1", "l2", "l3", "l4", "l5")


@dataclass
class ProcSplit:
    target: frozenset = frozenset()
    l0: frozenset = frozenset()
    l1: frozenset = frozenset()
    l2: frozenset = frozenset()
    l3: frozenset = frozenset()
    l4: frozenset = frozenset()
    l5: frozenset = frozenset()


@dataclass
class AvoidSplit:
    procs: list[ProcSplit]
    # (q, p) -> elements sent from q to p
    recv: dict[tuple[int, int], frozenset] = field(default_factory=dict)

    @property
    def nprocs(self) -> int:
        return len(self.procs)

    def __getitem__(self, p: int) -> ProcSplit:
        return self.procs[p]

    def data(self) -> frozenset:
        """All initial data of the step, on any processor."""
        return frozenset().union(*(ps.l0 for ps in self.procs))

    def received(self, p: int) -> frozenset:
        return frozenset().union(*(ts for (q, pp), ts in self.recv.items() if pp == p))

    def send(self) -> dict[tuple[int, int], frozenset]:
        """Same sets as :attr:`recv`, keyed by sender first for readability."""
        return dict(sorted(self.recv.items()))

    def l3_compute(self, p: int, data: frozenset | None = None) -> frozenset:
        """Tasks of ``l3`` that ``p`` actually computes (initial data is never recomputed)."""
        if data is None:
            data = self.data()
        return self.procs[p].l3 - data

    def computed(self, p: int, data: frozenset | None = None) -> frozenset:
        ps = self.procs[p]
        return ps.l1 | ps.l2 | self.l3_compute(p, data)


def _check_inputs(g: TaskGraph, target, initial):
    nprocs = g.nprocs
    for p in list(target) + list(initial):
        if not 0 <= p < nprocs:
            raise TargetNotOwned(f"processor {p} does not exist (graph has {nprocs})")
    for p, ts in target.items():
        g.check_ids(ts)
        foreign = sorted(t for t in ts if g.proc(t) != p)
        if foreign:
            raise TargetNotOwned(f"target of processor {p} contains {foreign[0]!r}, owned by {g.proc(foreign[0])}")
    for ts in initial.values():
        g.check_ids(ts)


def _closure(g: TaskGraph, seeds, data) -> frozenset:
    preds = g.pred_map
    seen = set(seeds)
    work = [t for t in seeds if t not in data]
    while work:
        t = work.pop()
        for q in preds[t]:
            if q not in seen:
                seen.add(q)
                if q not in data:
                    work.append(q)
    return frozenset(seen)


def split(g: TaskGraph, target: Mapping[int, frozenset], initial: Mapping[int, frozenset]) -> AvoidSplit:
    """Split the computation of ``target[p]`` (owned by ``p``) starting from ``initial[p]``."""
    _check_inputs(g, target, initial)
    P = g.nprocs
    l0 = [frozenset(initial.get(p, ())) for p in range(P)]
    tgt = [frozenset(target.get(p, ())) for p in range(P)]
    data = frozenset().union(*l0)
    index = g.index_of
    preds = g.pred_map

    l4 = []
    l5 = []
    for p in range(P):
        have = set(l0[p])
        local = []
        for t in sorted(tgt[p] - l0[p], key=index.__getitem__):
            if preds[t] <= have:
                have.add(t)
                local.append(t)
        l4.append(frozenset(local))
        l5.append(_closure(g, tgt[p], data))

    # which processors need each task
    needed_by: dict[TaskId, list[int]] = {}
    for p in range(P):
        for t in l5[p]:
            needed_by.setdefault(t, []).append(p)

    l1 = [frozenset(t for t in l4[p] - l0[p] if any(q != p for q in needed_by.get(t, ()))) for p in range(P)]
    l2 = [l4[p] - l1[p] for p in range(P)]
    sent_by = {t: p for p in range(P) for t in l1[p]}
    holders: dict[TaskId, list[int]] = {}
    for p in range(P):
        for t in l0[p]:
            holders.setdefault(t, []).append(p)

    procs = []
    recv: dict[tuple[int, int], set] = {}
    for p in range(P):
        own = g.owned(p)
        l3 = frozenset(t for t in l5[p] - l4[p] - l0[p] if sent_by.get(t, p) == p)
        for t in sorted(l5[p] - l0[p] - l4[p]):
            if t in sent_by and sent_by[t] != p:
                src = sent_by[t]
            elif t in holders:
                if t in own:
                    raise Unreachable(f"processor {p} needs its own task {t!r}, which only exists as data elsewhere")
                hs = holders[t]
                src = g.proc(t) if g.proc(t) in hs else min(hs)
            else:
                continue
            recv.setdefault((src, p), set()).add(t)
        procs.append(ProcSplit(tgt[p], l0[p], l1[p], l2[p], l3, l4[p], l5[p]))
    return AvoidSplit(procs, {k: frozenset(v) for k, v in sorted(recv.items())})


@dataclass
class SplitViolation:
    check: str
    proc: int
    task: TaskId
    witness: TaskId | None
    detail: str

    def __str__(self):
        w = f" (witness {self.witness})" if self.witness is not None else ""
        return f"[{self.check}] proc {self.proc}: {self.task}{w}: {self.detail}"


def verify_well_formed(g: TaskGraph, s: AvoidSplit):
    """Check that a split is executable and overlaps communication.

    Returns ``(ok, violations)``.  Checks:

    a. ``l1`` and ``l2`` only read ``l0`` and ``l4`` (no synchronization),
    b. computed ``l3`` tasks only read ``l0``, ``l4``, received data or ``l3``,
    c. the target minus initial data is covered by ``l1 | l2 | l3``,
    d. nothing in ``l2`` reads ``l3``,
    e. every received element is held by its sender and is not owned by the receiver.
    """
    out: list[SplitViolation] = []
    data = s.data()
    for p, ps in enumerate(s.procs):
        got = s.received(p)
        local = ps.l0 | ps.l4
        comp3 = s.l3_compute(p, data)
        for t in sorted(ps.l1 | ps.l2):
            bad = sorted(g.preds(t) - local)
            if bad:
                out.append(SplitViolation("a", p, t, bad[0], "reads data that is neither initial nor locally computed"))
        ok3 = local | got | comp3
        for t in sorted(comp3):
            bad = sorted(g.preds(t) - ok3)
            if bad:
                out.append(SplitViolation("b", p, t, bad[0], "predecessor is never available"))
        for t in sorted(ps.target - ps.l0 - ps.l1 - ps.l2 - ps.l3):
            out.append(SplitViolation("c", p, t, None, "target task is not computed"))
        for t in sorted(ps.l2):
            bad = sorted(g.preds(t) & ps.l3)
            if bad:
                out.append(SplitViolation("d", p, t, bad[0], "l2 task depends on l3"))
    for (q, p), ts in sorted(s.recv.items()):
        have = s.procs[q].l0 | s.procs[q].l1
        for t in sorted(ts):
            if t not in have:
                out.append(SplitViolation("e", p, t, None, f"processor {q} sends a task it does not have"))
            if g.proc(t) == p:
                out.append(SplitViolation("e", p, t, None, "receives its own task"))
    return not out, out


@dataclass
class ProcRedundancy:
    native: int
    computed: int

    @property
    def redundant(self) -> int:
        return self.computed - self.native

    @property
    def ratio(self) -> float:
        return self.redundant / self.native if self.native else 0.0


@dataclass
class RedundancyReport:
    procs: list[ProcRedundancy]
    duplicated: int

    @property
    def native(self) -> int:
        return sum(r.native for r in self.procs)

    @property
    def computed(self) -> int:
        return sum(r.computed for r in self.procs)

    @property
    def redundant(self) -> int:
        return self.computed - self.native

    def as_dict(self):
        return {
            "procs": [
                {"native": r.native, "computed": r.computed, "redundant": r.redundant, "ratio": r.ratio}
                for r in self.procs
            ],
            "native": self.native,
            "computed": self.computed,
            "redundant": self.redundant,
            "duplicated": self.duplicated,
        }


def redundancy(g: TaskGraph, s: AvoidSplit) -> RedundancyReport:
    ok, viol = verify_well_formed(g, s)
    if not ok:
        raise MalformedSplit(f"split is not well-formed: {viol[0]}")
    data = s.data()
    counts: dict[TaskId, int] = {}
    procs = []
    for p, ps in enumerate(s.procs):
        comp = s.computed(p, data)
        for t in comp:
            counts[t] = counts.get(t, 0) + 1
        procs.append(ProcRedundancy(len(ps.target - ps.l0), len(comp)))
    return RedundancyReport(procs, sum(1 for c in counts.values() if c >= 2))


# -- macro-steps ------------------------------------------------------------


@dataclass
class MacroStepPlan:
    block: int
    nprocs: int
    steps: list[AvoidSplit]
    # dependency levels covered by each step, inclusive
    levels: list[tuple[int, int]]

    def step_of_level(self, level: int) -> int:
        """Macro-step producing tasks of ``level``; initial data maps to step 0."""
        return 0 if level <= 0 else (level - 1) // self.block


def _check_leveled(g: TaskGraph, c: LevelCover):
    report = validate_cover(g, c, overlap=False)
    if not report.valid:
        v = report.violations[0]
        raise InvalidCover(f"cover violates condition {v.condition} at {v.task!r}: {v.detail}")
    depth = g.levels()
    for (k, p), ts in c.blocks.items():
        for t in ts:
            if depth[t] != k:
                raise InvalidCover(f"cover is not leveled: {t!r} has depth {depth[t]} but sits in level {k}")


def blocked_transform(g: TaskGraph, c: LevelCover, b: int) -> MacroStepPlan:
    """Group levels ``1..kmax`` into macro-steps of ``b`` levels and split each step.

    Level 0 is initial data.  The initial data of step ``s`` is the part of
    everything computed before it that the step actually reads, so a
    dependency skipping several steps is still served from the producer.
    """
    if b < 1:
        raise BadBlockSize(f"block size must be >= 1, got {b}")
    _check_leveled(g, c)
    P = g.nprocs
    depth = g.levels()
    where = g.proc_of
    kmax = c.kmax
    steps, spans = [], []
    for lo in range(1, kmax + 1, b):
        hi = min(lo + b - 1, kmax)
        target = {p: frozenset().union(*(c.block(k, p) for k in range(lo, hi + 1))) for p in range(P)}
        avail = _Below(depth, lo)
        used = set()
        for p in range(P):
            used |= _closure(g, target[p], avail)
        initial: dict[int, set] = {p: set() for p in range(P)}
        for t in used:
            if depth[t] < lo:
                initial[where[t]].add(t)
        steps.append(split(g, target, initial))
        spans.append((lo, hi))
    return MacroStepPlan(b, P, steps, spans)


class _Below:
    """Set-like view of the tasks shallower than a given depth."""

    def __init__(self, depth, lo):
        self.depth = depth
        self.lo = lo

    def __contains__(self, t):
        return self.depth[t] < self.lo


def plan_redundancy(g: TaskGraph, plan: MacroStepPlan) -> RedundancyReport:
    """Redundancy summed over all macro-steps."""
    procs = [ProcRedundancy(0, 0) for _ in range(plan.nprocs)]
    dup = 0
    for s in plan.steps:
        r = redundancy(g, s)
        dup += r.duplicated
        for acc, x in zip(procs, r.procs):
            acc.native += x.native
            acc.computed += x.computed
    return RedundancyReport(procs, dup)


def communicated_volume(plan: MacroStepPlan) -> dict:
    """Messages (non-empty ordered processor pairs) and elements per step, plus totals."""
    per_step = {}
    for i, s in enumerate(plan.steps):
        sets = [ts for ts in s.recv.values() if ts]
        per_step[i] = {"messages": len(sets), "elements": sum(len(ts) for ts in sets)}
    total = {
        "messages": sum(v["messages"] for v in per_step.values()),
        "elements": sum(v["elements"] for v in per_step.values()),
    }
    return {"steps": per_step, "total": total}


def verify_plan(g: TaskGraph, plan: MacroStepPlan) -> list[tuple[int, SplitViolation]]:
    out = []
    for i, s in enumerate(plan.steps):
        _, viol = verify_well_formed(g, s)
        out.extend((i, v) for v in viol)
    return out


def expanded_graph(g: TaskGraph, plan: MacroStepPlan) -> tuple[TaskGraph, LevelCover]:
    """Materialize every computed copy of a task as its own task.

    Copies are named ``task@proc``.  Each step ``s`` occupies three cover
    levels: ``l1`` at ``3s+1``, ``l2`` at ``3s+2`` and computed ``l3`` at
    ``3s+3``; initial sources sit at level 0.  Remote inputs are wired to
    the sender's copy, local ones to the processor's own copy.
    """
    P = plan.nprocs
    where: dict[TaskId, dict[int, str]] = {}
    blocks: dict[tuple[int, int], set] = {}
    tasks: list[Task] = []
    edges: list[tuple[str, str]] = []

    def add(t, p, k):
        cid = f"{t}@{p}"
        where.setdefault(t, {})[p] = cid
        tasks.append(Task(cid, p, g.weight(t), t))
        blocks.setdefault((k, p), set()).add(cid)
        return cid

    # initial data of the whole plan that no step computes
    computed = set()
    for s in plan.steps:
        for p in range(P):
            computed |= s.computed(p)
    for s in plan.steps:
        for p, ps in enumerate(s.procs):
            for t in ps.l0:
                if t not in computed and p not in where.get(t, {}):
                    add(t, g.proc(t), 0)
    for i, s in enumerate(plan.steps):
        data = s.data()
        senders = {}
        for (q, p), ts in s.recv.items():
            for t in ts:
                senders[t, p] = q
        placed = []
        for p, ps in enumerate(s.procs):
            groups = ((ps.l1, 3 * i + 1), (ps.l2, 3 * i + 2), (s.l3_compute(p, data), 3 * i + 3))
            for ts, k in groups:
                for t in sorted(ts):
                    placed.append((t, p, add(t, p, k)))
        for t, p, cid in placed:
            for q in g.preds(t):
                edges.append((where[q][senders.get((q, p), p)], cid))
    return build_graph(tasks, edges, P), LevelCover(blocks)
