"""Distributed task graphs and the primitive relations on them.

A :class:`TaskGraph` is an immutable DAG whose tasks are each owned by one
processor.  The processor partition ``C_p`` is available as
:meth:`TaskGraph.owned`.  All set-valued queries return ``frozenset`` and all
orderings are by task id, so results are reproducible.
"""

from __future__ import annotations

import graphlib
import heapq
from typing import Iterable, Mapping, NamedTuple

from .errors import BadProc, CycleError, DanglingEdge, DuplicateId, UnknownTask

TaskId = str


class Task(NamedTuple):
    id: TaskId
    proc: int
    weight: float = 1
    label: str | None = None


class TaskGraph:
    """Validated, immutable task graph.

    Use :func:`build_graph` rather than calling the constructor directly.
    """

    __slots__ = ("nprocs", "_tasks", "_preds", "_succs", "_order", "_index", "_owned", "_levels", "proc_of", "weight_of")

    def __init__(self, tasks: Mapping[TaskId, Task], preds, succs, order, nprocs: int):
        self.nprocs = nprocs
        self._tasks = dict(tasks)
        self._preds = preds
        self._succs = succs
        self._order = tuple(order)
        self._index = {t: i for i, t in enumerate(self._order)}
        self.proc_of = {t.id: t.proc for t in self._tasks.values()}
        self.weight_of = {t.id: t.weight for t in self._tasks.values()}
        owned: list[set] = [set() for _ in range(nprocs)]
        for t, p in self.proc_of.items():
            owned[p].add(t)
        self._owned = tuple(frozenset(s) for s in owned)
        self._levels = None

    # -- basic access -------------------------------------------------------

    def __len__(self):
        return len(self._tasks)

    def __contains__(self, tid):
        return tid in self._tasks

    def __iter__(self):
        return iter(self._order)

    def __eq__(self, other):
        if not isinstance(other, TaskGraph):
            return NotImplemented
        return (
            self.nprocs == other.nprocs
            and self._tasks == other._tasks
            and self._preds == other._preds
        )

    def __hash__(self):
        return hash((self.nprocs, frozenset(self._tasks.values()), frozenset(self.edges())))

    def __repr__(self):
        return f"TaskGraph(tasks={len(self)}, edges={self.num_edges()}, nprocs={self.nprocs})"

    def task(self, tid: TaskId) -> Task:
        try:
            return self._tasks[tid]
        except KeyError:
            raise UnknownTask(tid) from None

    def tasks(self) -> list[Task]:
        return [self._tasks[t] for t in sorted(self._tasks)]

    def proc(self, tid: TaskId) -> int:
        try:
            return self.proc_of[tid]
        except KeyError:
            raise UnknownTask(tid) from None

    def weight(self, tid: TaskId) -> float:
        return self.task(tid).weight

    def owned(self, p: int) -> frozenset:
        """The tasks of processor ``p``."""
        return self._owned[p]

    def edges(self) -> list[tuple[TaskId, TaskId]]:
        return sorted((a, b) for b, ps in self._preds.items() for a in ps)

    def num_edges(self) -> int:
        return sum(len(ps) for ps in self._preds.values())

    def topological_order(self) -> tuple:
        return self._order

    def topo_index(self, tid: TaskId) -> int:
        return self._index[tid]

    @property
    def index_of(self) -> dict:
        return self._index

    @property
    def pred_map(self) -> Mapping[TaskId, frozenset]:
        return self._preds

    def preds(self, tid: TaskId) -> frozenset:
        try:
            return self._preds[tid]
        except KeyError:
            raise UnknownTask(tid) from None

    def succs(self, tid: TaskId) -> frozenset:
        try:
            return self._succs[tid]
        except KeyError:
            raise UnknownTask(tid) from None

    def check_ids(self, ids: Iterable[TaskId]) -> None:
        tasks = self._tasks
        for t in ids:
            if t not in tasks:
                raise UnknownTask(t)

    def levels(self) -> dict[TaskId, int]:
        if self._levels is None:
            lev = {}
            for t in self._order:
                ps = self._preds[t]
                lev[t] = 1 + max(lev[q] for q in ps) if ps else 0
            self._levels = lev
        return self._levels


def _topo_sort(ids, preds, succs):
    indeg = {t: len(preds[t]) for t in ids}
    heap = [t for t in ids if indeg[t] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        t = heapq.heappop(heap)
        order.append(t)
        for s in succs[t]:
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(heap, s)
    if len(order) != len(ids):
        sorter = graphlib.TopologicalSorter({t: preds[t] for t in ids})
        try:
            sorter.prepare()
        except graphlib.CycleError as exc:
            raise CycleError(sorted(set(exc.args[1]))) from None
        raise AssertionError("cycle detected but not located")
    return order


def build_graph(tasks: Iterable[Task], edges: Iterable[tuple[TaskId, TaskId]], nprocs: int) -> TaskGraph:
    """Validate tasks and edges and return an immutable graph."""
    if nprocs < 1:
        raise BadProc(f"nprocs must be >= 1, got {nprocs}")
    table: dict[TaskId, Task] = {}
    for t in tasks:
        if t.id in table:
            raise DuplicateId(f"duplicate task id {t.id!r}")
        if not 0 <= t.proc < nprocs:
            raise BadProc(f"task {t.id!r} has proc {t.proc}, graph has {nprocs} processors")
        if t.weight < 0:
            raise ValueError(f"task {t.id!r} has negative weight {t.weight}")
        table[t.id] = t
    preds: dict[TaskId, set] = {t: set() for t in table}
    succs: dict[TaskId, set] = {t: set() for t in table}
    for a, b in edges:
        for end in (a, b):
            if end not in table:
                raise DanglingEdge((a, b), end)
        preds[b].add(a)
        succs[a].add(b)
    order = _topo_sort(list(table), preds, succs)
    return TaskGraph(
        table,
        {t: frozenset(s) for t, s in preds.items()},
        {t: frozenset(s) for t, s in succs.items()},
        order,
        nprocs,
    )


def immediate_predecessors(g: TaskGraph, t: TaskId) -> frozenset:
    return g.preds(t)


def sync_points(g: TaskGraph, t: TaskId) -> frozenset:
    """Immediate predecessors of ``t`` that live on another processor."""
    p = g.proc(t)
    where = g.proc_of
    return frozenset(q for q in g.preds(t) if where[q] != p)


def base(g: TaskGraph, tasks: Iterable[TaskId]) -> frozenset:
    """Tasks of the set that have at least one predecessor outside it."""
    L = frozenset(tasks)
    g.check_ids(L)
    return frozenset(t for t in L if not g.preds(t) <= L)


def pred_closure(g: TaskGraph, tasks: Iterable[TaskId], stop: Iterable[TaskId] = ()) -> frozenset:
    """Reflexive-transitive predecessor closure.

    Tasks in ``stop`` are included when reached but not expanded further;
    they stand for data that already exists.
    """
    seeds = frozenset(tasks)
    g.check_ids(seeds)
    stop = stop if isinstance(stop, (set, frozenset)) else frozenset(stop)
    seen = set(seeds)
    work = [t for t in seeds if t not in stop]
    while work:
        t = work.pop()
        for q in g.preds(t):
            if q not in seen:
                seen.add(q)
                if q not in stop:
                    work.append(q)
    return frozenset(seen)


def topological_levels(g: TaskGraph) -> dict[TaskId, int]:
    """Depth of every task: 0 for sources, else one more than its deepest predecessor."""
    return dict(g.levels())
