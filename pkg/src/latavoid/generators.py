"""Canonical task graphs: 1D stencil sweeps and seeded random DAGs."""

from __future__ import annotations

import random

from .cover import LevelCover
from .errors import BadShape
from .graph import Task, TaskGraph, build_graph


def stencil_id(i: int, t: int) -> str:
    return f"{i},{t}"


def owner_of_point(i: int, npoints: int, nprocs: int) -> int:
    return i * nprocs // npoints


def stencil_1d(points: int, procs: int, steps: int, radius: int = 1, boundary: str = "dirichlet") -> TaskGraph:
    """Explicit 1D stencil sweep: one task per (point, time level).

    Task ``(i, t)`` for ``t >= 1`` reads points ``i-r .. i+r`` of level
    ``t-1``, clipped at the ends for ``dirichlet`` and wrapped for
    ``periodic``.  Points are distributed in contiguous blocks.  Level-0
    tasks are zero-weight sources standing for the initial condition.
    """
    if points < 1 or procs < 1 or steps < 1 or radius < 1:
        raise BadShape("points, procs, steps and radius must all be >= 1")
    if procs > points:
        raise BadShape(f"more processors ({procs}) than points ({points})")
    if boundary not in ("dirichlet", "periodic"):
        raise BadShape(f"unknown boundary {boundary!r}")
    if boundary == "periodic" and radius >= points:
        raise BadShape(f"periodic radius {radius} wraps onto itself with {points} points")

    owner = [owner_of_point(i, points, procs) for i in range(points)]
    if boundary == "periodic":
        reads = [[j % points for j in range(i - radius, i + radius + 1)] for i in range(points)]
    else:
        reads = [list(range(max(0, i - radius), min(points, i + radius + 1))) for i in range(points)]
    tasks = []
    edges = []
    prev = None
    for t in range(steps + 1):
        ids = [stencil_id(i, t) for i in range(points)]
        for i in range(points):
            tasks.append(Task(ids[i], owner[i], 0 if t == 0 else 1, f"({i},{t})"))
            if prev is not None:
                edges.extend((prev[j], ids[i]) for j in reads[i])
        prev = ids
    return build_graph(tasks, edges, procs)


def per_level_cover(g: TaskGraph) -> LevelCover:
    """One block per (dependency depth, processor)."""
    blocks: dict[tuple[int, int], set] = {}
    where = g.proc_of
    for t, k in g.levels().items():
        blocks.setdefault((k, where[t]), set()).add(t)
    return LevelCover(blocks)


def random_dag(n: int, p_edge: float, procs: int, seed: int) -> TaskGraph:
    """Seeded random DAG; edges only run from lower to higher task index."""
    rng = random.Random(seed)
    width = len(str(max(n - 1, 0)))
    ids = [f"t{i:0{width}d}" for i in range(n)]
    tasks = [Task(ids[i], rng.randrange(procs)) for i in range(n)]
    edges = [(ids[i], ids[j]) for j in range(n) for i in range(j) if rng.random() < p_edge]
    return build_graph(tasks, edges, procs)
