"""Command line front end.

Subcommands ``generate``, ``transform``, ``validate``, ``simulate`` and
``sweep`` talk to each other only through files.  Every option can also be
given as an environment variable ``CA_<DEST>`` (``CA_ALPHA``, ``CA_GRAPH``,
...); a flag on the command line wins.

Exit status: 0 success, 1 domain error (bad graph, invalid cover, ...),
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import jsonschema

from . import io as lio
from .avoid import blocked_transform, communicated_volume, plan_redundancy, verify_plan
from .cover import check_overlap_condition, validate_cover
from .dot import emit_dot
from .errors import LatavoidError, SchemaError
from .generators import per_level_cover, random_dag, stencil_1d
from .simulate import CostModel, Scenario, format_trace, simulate_blocked, simulate_naive, strong_scaling_sweep

ENV_PREFIX = "CA_"

SWEEP_SCHEMA = {
    "type": "object",
    "required": ["graph", "b", "alpha", "threads"],
    "additionalProperties": False,
    "properties": {
        "graph": {"type": "object"},
        "b": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "alpha": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "threads": {
            "type": "array",
            "items": {"anyOf": [{"type": "number", "minimum": 1}, {"const": "inf"}]},
            "minItems": 1,
        },
        "beta": {"type": "number", "minimum": 0},
    },
}


# -- argument types ---------------------------------------------------------


def _int_list(n):
    def parse(s):
        parts = s.split(",")
        if len(parts) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated values, got {s!r}")
        try:
            return [int(x) for x in parts]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected integers, got {s!r}") from None

    return parse


def _random_spec(s):
    parts = s.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected n,p_edge,P, got {s!r}")
    try:
        n, p_edge, P = int(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected n,p_edge,P, got {s!r}") from None
    if not 0 <= p_edge <= 1:
        raise argparse.ArgumentTypeError(f"p_edge must lie in [0, 1], got {p_edge}")
    return n, p_edge, P


def _nonneg(s):
    try:
        x = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if x < 0 or math.isnan(x):
        raise argparse.ArgumentTypeError(f"must be >= 0, got {s!r}")
    return x


def _threads(s):
    try:
        x = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a thread count: {s!r}") from None
    if not x >= 1:
        raise argparse.ArgumentTypeError(f"threads must be >= 1 or inf, got {s!r}")
    return x if math.isinf(x) else int(x)


def _truthy(s: str) -> bool:
    return s.strip().lower() in ("1", "true", "yes", "on")


# -- commands ---------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.stencil1d:
        N, P, T, r = args.stencil1d
        g = stencil_1d(N, P, T, r, args.boundary)
    else:
        n, p_edge, P = args.random
        if n < 1 or P < 1:
            raise SchemaError("random graph needs n >= 1 and P >= 1")
        g = random_dag(n, p_edge, P, args.seed)
    lio.save_graph(g, args.output)
    if args.cover:
        lio.save_cover(per_level_cover(g), args.cover)
    print(f"wrote {args.output}: {len(g)} tasks, {g.num_edges()} edges, {g.nprocs} processors")
    return 0


def cmd_transform(args) -> int:
    g = lio.load_graph(args.graph)
    plan = blocked_transform(g, per_level_cover(g), args.block)
    bad = verify_plan(g, plan)
    if bad:
        for step, v in bad:
            print(f"step {step}: {v}", file=sys.stderr)
        if not args.force:
            print(f"error: plan has {len(bad)} violations, not written (use --force to write anyway)", file=sys.stderr)
            return 1
        print(f"warning: writing plan with {len(bad)} violations", file=sys.stderr)
    lio.save_plan(plan, args.output)
    if args.emit_dot:
        with open(args.emit_dot, "w", encoding="utf-8") as fh:
            fh.write(emit_dot(g, plan))
    vol = communicated_volume(plan)["total"]
    print(f"wrote {args.output}: {len(plan.steps)} macro-steps of {args.block} levels")
    if not bad:
        red = plan_redundancy(g, plan)
        print("redundant tasks per processor: " + " ".join(str(r.redundant) for r in red.procs))
        print(f"redundancy: {red.redundant} tasks total")
    print(f"messages: {vol['messages']}, elements: {vol['elements']}")
    return 0


def cmd_validate(args) -> int:
    g = lio.load_graph(args.graph)
    c = lio.load_cover(args.cover)
    report = validate_cover(g, c, overlap=args.overlap)
    doc = report.as_dict()
    ok = report.valid
    if args.overlap:
        if report.valid:
            _, wit = check_overlap_condition(g, c)
            doc["overlap_witnesses"] = [{"k": k, "p": p, "task": t, "pred": q} for k, p, t, q in wit]
            ok = report.overlap_ok
        else:
            doc["overlap_witnesses"] = None
    else:
        del doc["overlap_ok"]
    print(json.dumps(doc, indent=2))
    return 0 if ok else 1


def cmd_simulate(args) -> int:
    g = lio.load_graph(args.graph)
    m = CostModel(args.alpha, args.beta, args.threads)
    cover = per_level_cover(g)
    if args.variant == "naive":
        trace = simulate_naive(cover, g, m)
    else:
        trace = simulate_blocked(blocked_transform(g, cover, args.block), g, m)
    sys.stdout.write(lio.dumps_trace(trace) if args.json else format_trace(trace))
    return 0


def _sweep_graph(spec: dict, base: str):
    if "stencil1d" in spec:
        extra = set(spec) - {"stencil1d", "boundary"}
        if extra:
            raise SchemaError(f"sweep config graph: unknown fields {sorted(extra)}")
        shape = spec["stencil1d"]
        if not (isinstance(shape, list) and len(shape) == 4 and all(type(x) is int for x in shape)):
            raise SchemaError(f"sweep config graph.stencil1d must be [N, P, T, r], got {shape!r}")
        N, P, T, r = shape
        return stencil_1d(N, P, T, r, spec.get("boundary", "dirichlet")), {"stencil1d": [N, P, T, r]}
    if "path" in spec:
        path = os.path.join(base, spec["path"])
        return lio.load_graph(path), {"path": spec["path"]}
    return lio.graph_from_dict(spec, "sweep config graph"), {}


def cmd_sweep(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        text = fh.read()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{args.config}: not valid JSON (line {exc.lineno}): {exc.msg}") from None
    err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(SWEEP_SCHEMA).iter_errors(cfg))
    if err is not None:
        path = "/".join(map(str, err.absolute_path)) or "<root>"
        raise SchemaError(f"{args.config}: {path}: {err.message}")
    g, meta = _sweep_graph(cfg["graph"], os.path.dirname(args.config))
    threads = [math.inf if w == "inf" else w for w in cfg["threads"]]
    sc = Scenario(g, cfg["b"], cfg["alpha"], threads, cfg.get("beta", 0), meta)
    table = strong_scaling_sweep(sc)
    lio.save_sweep(table, args.output)
    print(f"wrote {args.output}: {len(table.rows)} rows")
    if args.gnuplot:
        for p in lio.write_gnuplot(table, args.gnuplot):
            print(f"wrote {p}")
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latavoid", description="Communication-avoiding task graph toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a stencil or random task graph")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--stencil1d", type=_int_list(4), metavar="N,P,T,r")
    src.add_argument("--random", type=_random_spec, metavar="n,p_edge,P")
    p.add_argument("--boundary", choices=["dirichlet", "periodic"], default="dirichlet")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--cover", help="also write the per-level cover here")
    p.set_defaults(func=cmd_generate, subparser=p)

    p = sub.add_parser("transform", help="split a graph into communication-avoiding macro-steps")
    p.add_argument("-g", "--graph", required=True)
    p.add_argument("-b", "--block", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--emit-dot", metavar="FILE")
    p.add_argument("--force", action="store_true", help="write the plan even if it has violations")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("validate", help="check a cover of a graph")
    p.add_argument("-g", "--graph", required=True)
    p.add_argument("-c", "--cover", required=True)
    p.add_argument("--overlap", action="store_true", help="also require the overlap condition")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="phase-model runtime of one configuration")
    p.add_argument("-g", "--graph", required=True)
    p.add_argument("-b", "--block", type=int, default=1)
    p.add_argument("--alpha", type=_nonneg, default=0.0)
    p.add_argument("--beta", type=_nonneg, default=0.0)
    p.add_argument("--threads", type=_threads, default=1)
    p.add_argument("--variant", choices=["blocked", "naive"], default="blocked")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="strong-scaling sweep to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--gnuplot", metavar="DIR")
    p.set_defaults(func=cmd_sweep)
    return ap


def _apply_env(ap: argparse.ArgumentParser, environ) -> None:
    """Turn ``CA_<DEST>`` variables into defaults; explicit flags still override."""
    for action in ap._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                _apply_env(sp, environ)
            continue
        if not action.option_strings or action.dest == "help":
            continue
        val = environ.get(ENV_PREFIX + action.dest.upper())
        if val is None:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            action.default = _truthy(val)
        else:
            # argparse runs string defaults through ``type``
            action.default = val
        action.required = False


def main(argv=None, environ=None) -> int:
    ap = build_parser()
    _apply_env(ap, os.environ if environ is None else environ)
    args = ap.parse_args(argv)
    if args.command == "generate" and not (args.stencil1d or args.random):
        args.subparser.error("one of --stencil1d or --random is required")
    try:
        return args.func(args)
    except (LatavoidError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
