"""Search for small models that explain an annotated graph.

A solution of the consistency problem is already a model candidate:
its non-zero edges say which triggering actually happened.  Smaller
candidates generalize better, so each enumerated solution is walked
downhill: repeatedly pin one of its non-zero edges to zero and
re-solve, until no single pin keeps the problem feasible.  The walk
follows one path (no backtracking over pin choices); if it strands
on a larger solution than it started from, the starting solution is
kept instead.  Candidates are ranked by size, then by their sorted
non-zero edge list, then by values, which makes the choice of best
model deterministic and independent of enumeration concurrency.
"""

from __future__ import annotations

import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .causality import CausalityGraph, annotate, build_graph, detect_initials, detect_terminals
from .slicing import SlicePolicy, annotate_sliced
from .solver import ConstraintProblem, Solution, build_constraints, enumerate_solutions, pin_zero, solve
from .trace import MessageTable, Trace, unique_messages

log = logging.getLogger(__name__)

REDUCTION_ORDERS = ("ascending-support", "descending-support", "index")


class NoFeasibleWindowError(RuntimeError):
    """No window length up to the configured bound admits a solution."""


@dataclass(frozen=True)
class ExtractConfig:
    sz: int = 200  # solutions enumerated before reduction
    top: int = 20  # models reported
    reduction_order: str = "ascending-support"
    seed: int | None = None  # optional shuffle of the candidate order
    workers: int = 1

    def __post_init__(self):
        if self.reduction_order not in REDUCTION_ORDERS:
            raise ValueError("unknown reduction order %r" % (self.reduction_order,))
        if self.sz < 1 or self.top < 1 or self.workers < 1:
            raise ValueError("sz, top, and workers must be positive")


@dataclass(frozen=True)
class ExtractResult:
    best: Solution
    top: tuple[Solution, ...]
    pool: tuple[Solution, ...]  # all distinct reduced candidates, ranked


def _pin_order(sol: Solution, order: str) -> list[int]:
    candidates = [i for i, v in enumerate(sol.values) if v > 0]
    if order == "ascending-support":
        candidates.sort(key=lambda i: (sol.problem.uppers[i], i))
    elif order == "descending-support":
        candidates.sort(key=lambda i: (-sol.problem.uppers[i], i))
    return candidates


def reduce_model(
    problem: ConstraintProblem, sol: Solution, order: str = "ascending-support"
) -> Solution:
    """Walk one pin-to-zero path down from sol.

    Each step pins the first non-zero edge (in the configured order)
    whose pin leaves the problem feasible, then continues from the
    new solution with the pin kept.  The walk ends when every single
    pin is infeasible.  Solutions along the way may grow (pins can
    force flow onto more edges); the result is never larger than the
    input, falling back to the input when the walk strands high.
    """
    if order not in REDUCTION_ORDERS:
        raise ValueError("unknown reduction order %r" % (order,))
    current_p, current_s = problem, sol
    while True:
        for i in _pin_order(current_s, order):
            candidate_p = pin_zero(current_p, current_p.edges[i])
            nxt = solve(candidate_p)
            if nxt is not None:
                current_p, current_s = candidate_p, nxt
                break
        else:
            break
    if current_s.size > sol.size:
        log.debug("reduction stranded at size %d > %d; keeping the input", current_s.size, sol.size)
        return sol
    return current_s


def model_extract(problem: ConstraintProblem, cfg: ExtractConfig = ExtractConfig()) -> ExtractResult | None:
    """Enumerate, reduce, rank.  None when the problem is infeasible."""
    seeds = enumerate_solutions(problem, cfg.sz)
    if not seeds:
        return None
    if cfg.seed is not None:
        random.Random(cfg.seed).shuffle(seeds)

    def reduce_one(s: Solution) -> Solution:
        return reduce_model(problem, s, cfg.reduction_order)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            reduced = list(pool.map(reduce_one, seeds))
    else:
        reduced = [reduce_one(s) for s in seeds]

    distinct: dict[tuple[int, ...], Solution] = {}
    for s in reduced:
        distinct.setdefault(s.values, s)
    ranked = sorted(distinct.values(), key=Solution.rank_key)
    return ExtractResult(best=ranked[0], top=tuple(ranked[: cfg.top]), pool=tuple(ranked))


def annotated_graph(
    traces: Sequence[Trace],
    window: int | None = None,
    slice_policy: SlicePolicy | None = None,
    table: MessageTable | None = None,
):
    """Build and annotate the graph for a trace set.

    Entry/exit detection always runs on the full, unsliced traces;
    the window and the slicing policy shape only the pair matching.
    """
    msgs = unique_messages(traces)
    graph = build_graph(msgs, detect_initials(traces), detect_terminals(traces), table)
    for t in traces:
        if slice_policy is not None:
            annotate_sliced(graph, t, slice_policy, window)
        else:
            annotate(graph, t, window)
    return graph


def auto_window(
    traces: Sequence[Trace],
    cfg: ExtractConfig = ExtractConfig(),
    max_w: int = 12,
    slice_policy: SlicePolicy | None = None,
    table: MessageTable | None = None,
) -> tuple[int, CausalityGraph, ExtractResult]:
    """Smallest window length that admits a model.

    Tries w = 0, 1, 2, ... and returns (w, graph, extraction) at the
    first feasible length.  Raises NoFeasibleWindowError when none up
    to max_w works.
    """
    for w in range(max_w + 1):
        graph = annotated_graph(traces, window=w, slice_policy=slice_policy, table=table)
        problem = build_constraints(graph)
        result = model_extract(problem, cfg)
        if result is not None:
            return w, graph, result
    raise NoFeasibleWindowError("no window length up to %d admits a solution" % max_w)
