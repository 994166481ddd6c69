"""Command-line front end for the mining pipeline.

Commands: gen (synthesize a trace from flow descriptions), slice
(split a trace by attribute), mine (trace files to a model), eval
(score a model against a trace), export-smt (emit the consistency
constraints as an SMT-LIB2 script), dot (render a model).

Exit codes are a stable contract: 0 success, 1 bad input, 2 mining
found no feasible model.  Flag defaults can be preloaded from a JSON
object file via --config; explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .causality import dump_graph
from .extract import (
    ExtractConfig,
    ExtractResult,
    NoFeasibleWindowError,
    REDUCTION_ORDERS,
    annotated_graph,
    auto_window,
    model_extract,
)
from .flows import GenConfig, generate, parse_flowspec
from .fsa import STRATEGIES, acceptance_ratio, derive_fsa, fsa_from_json, fsa_to_json, to_dot
from .slicing import labeled_slices, parse_policy
from .solver import build_constraints, export_smtlib
from .trace import (
    MessageTable,
    ParseError,
    Trace,
    parse_message_table,
    parse_trace,
    serialize_trace,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_table(path: str | None) -> MessageTable | None:
    return parse_message_table(_read(path)) if path else None


def _load_traces(paths: list[str], table: MessageTable | None) -> list[Trace]:
    traces = []
    for path in paths:
        try:
            traces.append(parse_trace(_read(path), table))
        except ParseError as exc:
            raise ParseError("%s: %s" % (path, exc)) from None
    return traces


def _parse_window(text: str) -> tuple[str, int | None]:
    if text == "auto":
        return "auto", None
    if text == "off":
        return "off", None
    try:
        value = int(text)
    except ValueError:
        raise ValueError("window must be 'auto', 'off', or an integer, got %r" % text) from None
    if value < 0:
        raise ValueError("window length must be non-negative")
    return "fixed", value


def _parse_instances(text: str) -> int | dict[str, int]:
    if text.isdigit():
        return int(text)
    counts: dict[str, int] = {}
    for item in text.split(","):
        name, sep, num = item.partition("=")
        if not sep or not name or not num.isdigit():
            raise ValueError("instances must be a count or name=count[,name=count...], got %r" % text)
        counts[name.strip()] = int(num)
    return counts


def _workers() -> int:
    raw = os.environ.get("FLOWMINE_THREADS")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError("FLOWMINE_THREADS must be an integer, got %r" % raw) from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _msg_obj(m) -> dict:
    return {"src": m.src, "dest": m.dest, "cmd": m.cmd}


def cmd_gen(args) -> int:
    table = _load_table(args.table)
    spec = parse_flowspec(_read(args.spec), table)
    cfg = GenConfig(
        instances=_parse_instances(args.instances),
        seed=args.seed,
        max_gap=args.gap,
        simul_prob=args.simul,
        tag=args.tag,
    )
    trace = generate(spec, cfg)
    _emit(serialize_trace(trace, table), args.out)
    return EXIT_OK


def cmd_slice(args) -> int:
    table = _load_table(args.table)
    trace = _load_traces([args.trace], table)[0]
    policy = parse_policy(args.slice)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = {}
    for label, part in labeled_slices(trace, policy):
        name = "slice_%s.trace" % label
        (out_dir / name).write_text(serialize_trace(part, table), encoding="utf-8")
        index[label] = {"file": name, "messages": part.msg_count}
    (out_dir / "slices.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print("%d slices -> %s" % (len(index), out_dir))
    return EXIT_OK


def _extract_cfg(args) -> ExtractConfig:
    return ExtractConfig(
        sz=args.sz,
        top=args.top,
        reduction_order=args.order,
        seed=args.seed,
        workers=_workers(),
    )


def _report_rows(result: ExtractResult) -> list[dict]:
    rows = []
    for rank, sol in enumerate(result.top, start=1):
        edges = [
            {"head": _msg_obj(h), "tail": _msg_obj(t), "count": sol.value((h, t))}
            for h, t in sol.nonzero_edges()
        ]
        rows.append({"rank": rank, "size": sol.size, "edges": edges})
    return rows


def cmd_mine(args) -> int:
    table = _load_table(args.table)
    traces = _load_traces(args.trace, table)
    policy = parse_policy(args.slice) if args.slice else None
    cfg = _extract_cfg(args)
    mode, fixed = _parse_window(args.window)
    started = time.perf_counter()
    if mode == "auto":
        try:
            found, graph, result = auto_window(
                traces, cfg, max_w=args.max_window, slice_policy=policy, table=table
            )
        except NoFeasibleWindowError as exc:
            print("infeasible: %s" % exc, file=sys.stderr)
            return EXIT_INFEASIBLE
        window_desc = {"mode": "auto", "value": found}
    else:
        width = fixed if mode == "fixed" else None
        graph = annotated_graph(traces, window=width, slice_policy=policy, table=table)
        result = model_extract(build_constraints(graph), cfg)
        if result is None:
            print("infeasible: the consistency constraints admit no solution", file=sys.stderr)
            return EXIT_INFEASIBLE
        window_desc = {"mode": mode, "value": width}
    elapsed = time.perf_counter() - started

    fsa = derive_fsa(result.best, graph)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "model.json").write_text(fsa_to_json(fsa), encoding="utf-8")
    (out_dir / "model.dot").write_text(to_dot(fsa, table), encoding="utf-8")
    (out_dir / "graph.json").write_text(
        json.dumps(dump_graph(graph), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out_dir / "report.json").write_text(
        json.dumps(_report_rows(result), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    summary = {
        "traces": args.trace,
        "messages": sum(t.msg_count for t in traces),
        "window": window_desc,
        "slice": args.slice,
        "candidates": len(result.pool),
        "best_size": result.best.size,
        "states": len(fsa.states),
        "wall_time_s": round(elapsed, 6),
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    shown = "off" if window_desc["value"] is None else window_desc["value"]
    print(
        "model size %d (%d states), window %s, %d candidates, %.3fs -> %s"
        % (result.best.size, len(fsa.states), shown, len(result.pool), elapsed, out_dir)
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    fsa = fsa_from_json(_read(args.model))
    table = _load_table(args.table)
    trace = _load_traces([args.trace], table)[0]
    report = acceptance_ratio(fsa, trace, strategy=args.strategy, budget=args.budget, table=table)
    obj = {
        "accepted": report.accepted,
        "total": report.total,
        "ratio": report.ratio,
        "strategy": report.strategy,
        "rejected_positions": [
            {"event": e_idx, "msg": _msg_obj(m)} for e_idx, m in report.rejected
        ],
    }
    print(json.dumps(obj, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_export_smt(args) -> int:
    table = _load_table(args.table)
    traces = _load_traces(args.trace, table)
    mode, fixed = _parse_window(args.window)
    if mode == "auto":
        raise ValueError("export-smt needs a concrete window: 'off' or an integer")
    width = fixed if mode == "fixed" else None
    graph = annotated_graph(traces, window=width, table=table)
    _emit(export_smtlib(build_constraints(graph)), args.out)
    return EXIT_OK


def cmd_dot(args) -> int:
    fsa = fsa_from_json(_read(args.model))
    table = _load_table(args.table)
    _emit(to_dot(fsa, table), args.out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; 2 is reserved
    for infeasible mining, so usage errors become input errors."""

    def error(self, message):
        raise ValueError(message)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="flowmine", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    by_name: dict[str, argparse.ArgumentParser] = {}

    def sub(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = subs.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="JSON file with flag defaults")
        by_name[name] = p
        return p

    p = sub("gen", cmd_gen, "synthesize a trace from flow descriptions")
    p.add_argument("--spec", required=True, help="flow description file")
    p.add_argument("--table", help="message table file")
    p.add_argument("--instances", default="1", help="count, or name=count[,name=count...]")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--gap", type=int, default=10, help="max foreign messages between an instance's messages")
    p.add_argument("--simul", type=float, default=0.0, help="probability of a simultaneous partner")
    p.add_argument("--tag", help="stamp messages with <tag>=<instance id>")
    p.add_argument("--out", help="output trace file (default stdout)")

    p = sub("slice", cmd_slice, "split a trace by a message attribute")
    p.add_argument("--trace", required=True)
    p.add_argument("--table", help="message table file")
    p.add_argument("--slice", required=True, help="attr, attr:block=N, attr:missing=drop")
    p.add_argument("--out", required=True, help="output directory")

    p = sub("mine", cmd_mine, "mine a model from trace files")
    p.add_argument("--trace", action="append", required=True, help="trace file (repeatable)")
    p.add_argument("--table", help="message table file")
    p.add_argument("--window", default="auto", help="auto, off, or a length")
    p.add_argument("--max-window", type=int, default=12, help="auto search bound")
    p.add_argument("--slice", help="attribute slicing policy")
    p.add_argument("--sz", type=int, default=200, help="solutions enumerated before reduction")
    p.add_argument("--top", type=int, default=20, help="models kept in the report")
    p.add_argument("--order", default="ascending-support", choices=REDUCTION_ORDERS)
    p.add_argument("--seed", type=int, default=None, help="shuffle candidate order")
    p.add_argument("--out", required=True, help="output directory")

    p = sub("eval", cmd_eval, "score a model against a trace")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--trace", required=True)
    p.add_argument("--table", help="message table file")
    p.add_argument("--strategy", default="oldest-first", choices=STRATEGIES)
    p.add_argument("--budget", type=int, default=100_000, help="exhaustive search node budget")

    p = sub("export-smt", cmd_export_smt, "emit consistency constraints as SMT-LIB2")
    p.add_argument("--trace", action="append", required=True, help="trace file (repeatable)")
    p.add_argument("--table", help="message table file")
    p.add_argument("--window", default="off", help="off or a length")
    p.add_argument("--out", help="output file (default stdout)")

    p = sub("dot", cmd_dot, "render a model JSON file as DOT")
    p.add_argument("--model", required=True)
    p.add_argument("--table", help="message table file")
    p.add_argument("--out", help="output file (default stdout)")

    return parser, by_name


def main(argv: list[str] | None = None) -> int:
    parser, by_name = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.config:
            defaults = json.loads(_read(args.config))
            if not isinstance(defaults, dict):
                raise ValueError("config file must hold a JSON object")
            known = vars(args)
            unknown = [k for k in defaults if k not in known]
            if unknown:
                raise ValueError("config keys not recognized: %s" % ", ".join(sorted(unknown)))
            by_name[args.command].set_defaults(**defaults)
            args = parser.parse_args(argv)
        return args.func(args)
    except NoFeasibleWindowError as exc:
        print("infeasible: %s" % exc, file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ParseError, ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
