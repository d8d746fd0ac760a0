"""Exception hierarchy.

Every error raised by the library derives from :class:`LatavoidError`, so the
command line front end can map all of them to exit status 1 in one place.
"""


class LatavoidError(Exception):
    """Base class for all domain errors."""


class SchemaError(LatavoidError):
    """A file or in-memory structure does not follow the expected layout."""


class ParseError(SchemaError):
    """Input is not valid JSON."""


class GraphError(LatavoidError):
    pass


class CycleError(GraphError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("task graph has a cycle through: " + ", ".join(self.cycle))


class DanglingEdge(GraphError, SchemaError):
    def __init__(self, edge, missing):
        self.edge = tuple(edge)
        self.missing = missing
        super().__init__(f"edge {self.edge[0]!r} -> {self.edge[1]!r} references unknown task {missing!r}")


class BadProc(GraphError):
    pass


class DuplicateId(GraphError):
    pass


class UnknownTask(GraphError, KeyError):
    def __init__(self, task):
        self.task = task
        super().__init__(f"unknown task {task!r}")

    def __str__(self):
        return self.args[0]


class BadShape(LatavoidError):
    pass


class CoverError(LatavoidError):
    pass


class OverlappingBlocks(CoverError):
    pass


class EmptyCover(CoverError):
    pass


class InvalidCover(CoverError):
    pass


class SplitError(LatavoidError):
    pass


class TargetNotOwned(SplitError):
    pass


class Unreachable(SplitError):
    pass


class MalformedSplit(SplitError):
    pass


class BadBlockSize(SplitError):
    pass


class MalformedPlan(LatavoidError):
    pass


class Deadlock(LatavoidError):
    def __init__(self, frontier, time):
        self.frontier = frontier
        self.time = time
        desc = "; ".join(f"proc {p}: {', '.join(ts)}" for p, ts in sorted(frontier.items()))
        super().__init__(f"simulation stuck at t={time}: {desc}")
