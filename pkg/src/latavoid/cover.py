"""Two-parameter coverings ``L[k, p]`` of a task graph ("local computations").

``k`` is a blocking level and ``p`` a processor.  A cover is *valid* when

1. the blocks of each processor partition exactly the tasks it owns,
2. no task depends on a task placed in a later level, and
3. every remote predecessor sits in a strictly earlier level.

Validation reports violations instead of raising, except for a task placed
twice on one processor, which makes the level of a task ambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from .errors import EmptyCover, InvalidCover, OverlappingBlocks
from .graph import TaskGraph, TaskId, base


@dataclass
class LevelCover:
    blocks: dict[tuple[int, int], frozenset]

    def __post_init__(self):
        self.blocks = {(int(k), int(p)): frozenset(ts) for (k, p), ts in self.blocks.items()}

    @property
    def kmax(self) -> int:
        return max((k for k, _ in self.blocks), default=-1)

    def block(self, k: int, p: int) -> frozenset:
        return self.blocks.get((k, p), frozenset())

    def keys(self):
        return sorted(self.blocks)

    def level_map(self) -> dict[TaskId, int]:
        """k index of every covered task (lowest k if a task is placed on several processors)."""
        out: dict[TaskId, int] = {}
        for (k, p) in sorted(self.blocks):
            for t in self.blocks[k, p]:
                out.setdefault(t, k)
        return out

    def level(self, k: int) -> frozenset:
        return frozenset().union(*(ts for (kk, _), ts in self.blocks.items() if kk == k))


@dataclass
class Violation:
    condition: int
    task: TaskId
    witness: TaskId
    detail: str

    def as_dict(self):
        return {"condition": self.condition, "task": self.task, "witness": self.witness, "detail": self.detail}


@dataclass
class CoverReport:
    violations: list[Violation] = field(default_factory=list)
    granularity: int | None = None
    overlap_ok: bool = False

    @property
    def valid(self) -> bool:
        return not self.violations

    def as_dict(self):
        return {
            "valid": self.valid,
            "violations": [v.as_dict() for v in self.violations],
            "granularity": self.granularity,
            "overlap_ok": self.overlap_ok,
        }


def _check_overlaps(c: LevelCover) -> None:
    seen: dict[tuple[TaskId, int], int] = {}
    for (k, p) in c.keys():
        for t in sorted(c.blocks[k, p]):
            if (t, p) in seen:
                raise OverlappingBlocks(f"task {t!r} appears in blocks ({seen[t, p]},{p}) and ({k},{p})")
            seen[t, p] = k


def validate_cover(g: TaskGraph, c: LevelCover, *, overlap: bool = True) -> CoverReport:
    for ts in c.blocks.values():
        g.check_ids(ts)
    _check_overlaps(c)
    report = CoverReport()
    viol = report.violations

    # condition 1: blocks of p cover C_p and nothing else
    placed: dict[TaskId, int] = {}
    for (k, p) in c.keys():
        for t in sorted(c.blocks[k, p]):
            owner = g.proc(t)
            if owner != p:
                viol.append(Violation(1, t, t, f"task owned by processor {owner} placed in block ({k},{p})"))
            else:
                placed[t] = k
    for t in g.topological_order():
        if t not in placed:
            viol.append(Violation(1, t, t, f"task of processor {g.proc(t)} is in no block of that processor"))

    level = c.level_map()
    where = g.proc_of
    pred_map = g.pred_map
    for (k, p) in c.keys():
        for t in c.blocks[k, p]:
            preds = [(q, level[q]) for q in pred_map[t] if q in level]
            # condition 2: no predecessor in a later level
            later = [q for q, kq in preds if kq > k]
            if later:
                w = min(later)
                viol.append(Violation(2, t, w, f"predecessor in level {level[w]} > {k}"))
            # condition 3: remote predecessors strictly earlier
            remote = [q for q, kq in preds if kq >= k and where[q] != p]
            if remote:
                w = min(remote)
                viol.append(Violation(3, t, w, f"remote predecessor in level {level[w]}, needs <= {k - 1}"))
    viol.sort(key=lambda v: (v.condition, v.task, v.witness))

    if c.blocks:
        report.granularity = granularity(c)
    if report.valid and overlap:
        report.overlap_ok, _ = check_overlap_condition(g, c, _checked=True)
    return report


def bases_of_cover(g: TaskGraph, c: LevelCover) -> dict[tuple[int, int], frozenset]:
    return {kp: base(g, c.blocks[kp]) for kp in c.keys()}


def granularity(c: LevelCover) -> int:
    """Smallest block size; blocks that are present but empty count as 0."""
    if not c.blocks:
        raise EmptyCover("cover has no blocks")
    return min(len(ts) for ts in c.blocks.values())


def _require_valid(g, c):
    report = validate_cover(g, c)
    if not report.valid:
        v = report.violations[0]
        raise InvalidCover(f"cover violates condition {v.condition} at {v.task!r}: {v.detail}")


def check_overlap_condition(g: TaskGraph, c: LevelCover, *, _checked=False):
    """Check that every remote input of a block is at least two levels older.

    Returns ``(ok, witnesses)``, where each witness is ``(k, p, task, pred)``
    for a remote predecessor sitting at exactly level ``k - 1``.
    """
    if not _checked:
        _require_valid(g, c)
    level = c.level_map()
    where = g.proc_of
    witnesses = []
    for (k, p) in c.keys():
        for t in c.blocks[k, p]:
            for q in g.preds(t):
                if where[q] != p and level.get(q, k) > k - 2:
                    witnesses.append((k, p, t, q))
    witnesses.sort()
    return not witnesses, witnesses


def independent_executability(g: TaskGraph, c: LevelCover, k: int) -> bool:
    """True if every block of level ``k`` only needs local data or data from earlier levels.

    Only structural defects (unknown ids, a task placed twice on one
    processor) raise; a cover breaking the level conditions just yields False.
    """
    for ts in c.blocks.values():
        g.check_ids(ts)
    try:
        _check_overlaps(c)
    except OverlappingBlocks as exc:
        raise InvalidCover(str(exc)) from None
    level = c.level_map()
    for (kk, p) in c.keys():
        if kk != k:
            continue
        own = g.owned(p)
        for t in c.blocks[kk, p]:
            for q in g.preds(t):
                if q not in own and level.get(q, k) >= k:
                    return False
    return True

