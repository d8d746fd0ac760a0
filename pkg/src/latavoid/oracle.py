"""Discrete-event replay of a distributed schedule.

This is deliberately independent of the phase model in :mod:`simulate`: it
tracks individual threads, per-processor data availability and message
departures.  A task starts when its processor has a free thread and every
predecessor is present on that processor, either computed there, held as
initial data, or received.

Messages to one processor within one step form a single receive: it
completes ``alpha + beta * total_size`` after the last of its messages has
departed, and all their elements become available then.  A message departs
once its elements exist on the sender and its send anchors have passed.

Schedules are lists of :class:`Stage`.  With ``phased=True`` stages act as
barriers: a processor's stages run one after another, step ``s`` starts only
once every stage of earlier steps is done on all processors, and a stage
flagged ``after_recv`` also waits for its processor's receive of that step.
With ``phased=False`` only data dependencies and thread counts constrain
execution, stage order only sets priority, and stage anchors are ignored.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

from .avoid import MacroStepPlan
from .errors import Deadlock
from .graph import TaskGraph, TaskId
from .simulate import CostModel


@dataclass
class Stage:
    proc: int
    tasks: list[TaskId]
    step: int = 0
    after_recv: bool = False


@dataclass(frozen=True)
class AfterStage:
    """Send anchor: the moment stage ``index`` of the schedule completes."""

    index: int


Anchor = Union[float, AfterStage, tuple]


@dataclass
class Message:
    elements: list[TaskId]
    src: int
    dst: int
    earliest: Anchor = 0
    step: int = 0


def _as_stage(x) -> Stage:
    if isinstance(x, Stage):
        return x
    return Stage(x[0], list(x[1]), *x[2:])


def _group_comm(comm) -> list[Message]:
    """Accept messages or ``(element, src, dst, earliest[, step])`` tuples."""
    groups: dict = {}
    out = []
    for c in comm:
        if isinstance(c, Message):
            out.append(c)
            continue
        elem, src, dst, earliest, *rest = c
        step = rest[0] if rest else 0
        key = (src, dst, earliest, step)
        if key not in groups:
            groups[key] = Message([], src, dst, earliest, step)
            out.append(groups[key])
        groups[key].elements.append(elem)
    return out


def _anchors(a) -> tuple:
    return a if isinstance(a, tuple) else (a,)


@dataclass
class _Receive:
    pending: int
    size: int = 0
    last_departure: float = 0.0
    done: float | None = None
    elements: list = field(default_factory=list)


def event_sim_oracle(
    g: TaskGraph,
    schedule: Sequence,
    comm: Sequence,
    m: CostModel,
    *,
    phased: bool = True,
    initial: dict[int, set] | None = None,
) -> float:
    """Makespan of ``schedule`` with messages ``comm`` under cost model ``m``.

    Tasks that appear in no stage are initial data on their owner unless
    ``initial`` says otherwise.  Raises :class:`Deadlock` when some stage or
    message can never make progress.
    """
    stages = [_as_stage(s) for s in schedule]
    msgs = _group_comm(comm)
    P = g.nprocs
    threads = m.threads

    scheduled = set()
    for st in stages:
        g.check_ids(st.tasks)
        scheduled.update(st.tasks)
    avail: list[dict[TaskId, float]] = [{} for _ in range(P)]
    if initial is None:
        initial = {}
        for t in g.topological_order():
            if t not in scheduled:
                initial.setdefault(g.proc(t), set()).add(t)
    for p, ts in initial.items():
        for t in ts:
            avail[p][t] = 0.0

    prio: dict[tuple[int, TaskId], int] = {}
    for i, st in enumerate(stages):
        for t in st.tasks:
            prio.setdefault((st.proc, t), len(prio))

    by_proc: dict[int, list[int]] = {p: [] for p in range(P)}
    for i, st in enumerate(stages):
        by_proc[st.proc].append(i)
    prev_stage = {}
    for idx in by_proc.values():
        for a, b in zip(idx, idx[1:]):
            prev_stage[b] = a

    receives: dict[tuple[int, int], _Receive] = {}
    for msg in msgs:
        r = receives.setdefault((msg.dst, msg.step), _Receive(0))
        r.pending += 1
        r.size += len(msg.elements)
        r.elements.extend(msg.elements)

    pending = [set(st.tasks) for st in stages]
    inflight = [0] * len(stages)
    opened = [False] * len(stages)
    done_at: dict[int, float] = {}
    busy = [0] * P
    sent = [False] * len(msgs)
    running: list = []  # (finish, seq, proc, task, stage)
    completions: list = []  # (time, seq, receive key)
    seq = 0
    now = 0.0

    def earlier_steps_done(step):
        return all(i in done_at for i, st in enumerate(stages) if st.step < step)

    def can_open(i):
        if not phased:
            return True
        st = stages[i]
        if i in prev_stage and prev_stage[i] not in done_at:
            return False
        if not earlier_steps_done(st.step):
            return False
        if st.after_recv:
            r = receives.get((st.proc, st.step))
            if r is not None and (r.done is None or r.done > now):
                return False
        return True

    def departure(msg):
        src = avail[msg.src]
        t = 0.0
        for e in msg.elements:
            if e not in src:
                return None
            t = max(t, src[e])
        for a in _anchors(msg.earliest):
            if isinstance(a, AfterStage):
                if not phased:
                    continue
                if a.index not in done_at:
                    return None
                t = max(t, done_at[a.index])
            else:
                t = max(t, a)
        return t

    def progress():
        nonlocal seq
        changed = True
        while changed:
            changed = False
            for i in range(len(stages)):
                if not opened[i] and can_open(i):
                    opened[i] = True
                    changed = True
                if opened[i] and i not in done_at and not pending[i] and not inflight[i]:
                    done_at[i] = now
                    changed = True
            for k, msg in enumerate(msgs):
                if sent[k]:
                    continue
                d = departure(msg)
                if d is None or d > now:
                    continue
                sent[k] = True
                changed = True
                r = receives[msg.dst, msg.step]
                r.pending -= 1
                r.last_departure = max(r.last_departure, d)
                if not r.pending:
                    r.done = r.last_departure + m.alpha + m.beta * r.size
                    heapq.heappush(completions, (r.done, seq, (msg.dst, msg.step)))
                    seq += 1
            for p in range(P):
                if busy[p] >= threads:
                    continue
                have = avail[p]
                cands = []
                for i in by_proc[p]:
                    if not opened[i]:
                        continue
                    for t in pending[i]:
                        if all(q in have and have[q] <= now for q in g.preds(t)):
                            cands.append((prio[p, t], t, i))
                cands.sort()
                for _, t, i in cands:
                    if busy[p] >= threads:
                        break
                    pending[i].discard(t)
                    inflight[i] += 1
                    busy[p] += 1
                    heapq.heappush(running, (now + g.weight(t), seq, p, t, i))
                    seq += 1
                    changed = True

    def next_departure():
        best = math.inf
        for k, msg in enumerate(msgs):
            if not sent[k]:
                d = departure(msg)
                if d is not None and d > now:
                    best = min(best, d)
        return best

    progress()
    while True:
        nxt = min(
            running[0][0] if running else math.inf,
            completions[0][0] if completions else math.inf,
            next_departure(),
        )
        if math.isinf(nxt):
            break
        now = nxt
        while running and running[0][0] == now:
            _, _, p, t, i = heapq.heappop(running)
            busy[p] -= 1
            inflight[i] -= 1
            avail[p].setdefault(t, now)
        while completions and completions[0][0] == now:
            _, _, key = heapq.heappop(completions)
            for e in receives[key].elements:
                avail[key[0]].setdefault(e, now)
        progress()

    stuck: dict[int, list[str]] = {}
    for i, st in enumerate(stages):
        if i not in done_at:
            stuck.setdefault(st.proc, []).extend(sorted(pending[i]) or [f"stage {i}"])
    for k, msg in enumerate(msgs):
        if not sent[k]:
            stuck.setdefault(msg.src, []).append(f"send {sorted(msg.elements)} -> {msg.dst}")
    if stuck:
        raise Deadlock(stuck, now)
    ends = [0.0, *done_at.values()]
    ends += [r.done for r in receives.values() if r.done is not None]
    return max(ends)


def _depth_groups(g: TaskGraph, tasks) -> list[list[TaskId]]:
    S = set(tasks)
    depth: dict[TaskId, int] = {}
    groups: list[list[TaskId]] = []
    for t in sorted(S, key=g.topo_index):
        d = 1 + max((depth[q] for q in g.preds(t) if q in S), default=-1)
        depth[t] = d
        if d == len(groups):
            groups.append([])
        groups[d].append(t)
    return [sorted(gr) for gr in groups]


def phase_schedule(plan: MacroStepPlan, g: TaskGraph):
    """Stages and messages replaying ``plan`` with phase boundaries enforced.

    Per step and processor: ``l1`` depth by depth, then ``l2`` depth by depth,
    then computed ``l3`` depth by depth, the first ``l3`` stage waiting for
    the step's receive.  A message leaves once the receiver has finished its
    ``l1`` stages and, if it carries ``l1`` results, once the sender has too.
    """
    stages: list[Stage] = []
    comm: list[Message] = []
    for s, sp in enumerate(plan.steps):
        data = sp.data()
        k1_end = {}
        for p, ps in enumerate(sp.procs):
            for grp in _depth_groups(g, ps.l1) or [[]]:
                stages.append(Stage(p, grp, s))
            k1_end[p] = len(stages) - 1
            for grp in _depth_groups(g, ps.l2):
                stages.append(Stage(p, grp, s))
            k3 = _depth_groups(g, sp.l3_compute(p, data)) or [[]]
            for j, grp in enumerate(k3):
                stages.append(Stage(p, grp, s, after_recv=(j == 0)))
        for (q, p), ts in sorted(sp.recv.items()):
            anchors = (AfterStage(k1_end[p]),)
            if ts & sp.procs[q].l1:
                anchors += (AfterStage(k1_end[q]),)
            comm.append(Message(sorted(ts), q, p, anchors, s))
    return stages, comm
