"""Support-consistency constraints over an annotated graph, and an
exact integer solver for them.

Model
-----
One variable c_e per graph edge e = (head, tail), meaning how many
tail instances were really triggered by head instances.

  * 0 <= c_e <= support(e)
  * for each node n with outgoing edges: sum of c_e over them equals
    support(n); same for incoming edges.

A node side without any edges gets no constraint (logged, since for
an interior node that usually means the trace set is too thin).
Edges with support 0 stay as variables pinned to that bound; they
matter for the shape of later reductions.

Infeasibility is an answer, not an error: it says the observed
supports admit no explanation, e.g. because a window is too tight.

Search
------
Interval domains, fixpoint propagation over the balance equations,
then depth-first search branching on the variable with the smallest
remaining domain (lowest edge index on ties), values tried from the
upper end downward.  The solution stream is deterministic; previously
returned or explicitly blocked assignments are skipped, which is also
how enumeration produces distinct solutions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from itertools import islice
from typing import Iterable, Iterator

import numpy as np

from .causality import CausalityGraph, Edge

log = logging.getLogger(__name__)

Assignment = tuple[int, ...]


@dataclass(frozen=True)
class Balance:
    """sum(vars) == total, bookkeeping which node side it came from."""

    node: str
    side: str  # "out" or "in"
    total: int
    vars: tuple[int, ...]


@dataclass(frozen=True)
class ConstraintProblem:
    edges: tuple[Edge, ...]
    ordinals: tuple[tuple[int, int], ...]  # (head, tail) node numbers per edge
    uppers: tuple[int, ...]
    balances: tuple[Balance, ...]
    pinned: frozenset[int] = frozenset()
    blocked: tuple[Assignment, ...] = ()
    _index: dict[Edge, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self._index:
            self._index.update({e: i for i, e in enumerate(self.edges)})

    def var_name(self, i: int) -> str:
        return "c_%d_%d" % self.ordinals[i]

    def index_of(self, edge: Edge) -> int:
        try:
            return self._index[edge]
        except KeyError:
            raise ValueError("edge %s -> %s is not in the problem" % (edge[0].label(), edge[1].label())) from None

    def effective_upper(self, i: int) -> int:
        return 0 if i in self.pinned else self.uppers[i]


@dataclass(frozen=True)
class Solution:
    problem: ConstraintProblem
    values: Assignment

    @property
    def size(self) -> int:
        return sum(1 for v in self.values if v > 0)

    def value(self, edge: Edge) -> int:
        return self.values[self.problem.index_of(edge)]

    def items(self) -> Iterator[tuple[Edge, int]]:
        return iter(zip(self.problem.edges, self.values))

    def nonzero_edges(self) -> tuple[Edge, ...]:
        return tuple(e for e, v in self.items() if v > 0)

    def rank_key(self):
        """(size, sorted non-zero edge numbers, values): the total order
        used to pick best models and break ties deterministically."""
        nz = tuple(self.problem.ordinals[i] for i, v in enumerate(self.values) if v > 0)
        return (self.size, nz, self.values)


def build_constraints(graph: CausalityGraph) -> ConstraintProblem:
    order = sorted(graph.nodes, key=graph.ordinal)
    edges = tuple(sorted(graph.edges, key=lambda e: (graph.ordinal(e[0]), graph.ordinal(e[1]))))
    ordinals = tuple((graph.ordinal(h), graph.ordinal(t)) for h, t in edges)
    uppers = tuple(graph.edges[e] for e in edges)
    index = {e: i for i, e in enumerate(edges)}

    balances = []
    for node in order:
        stats = graph.nodes[node]
        out_vars = tuple(index[e] for e in edges if e[0] == node)
        in_vars = tuple(index[e] for e in edges if e[1] == node)
        if out_vars:
            balances.append(Balance(node.label(), "out", stats.support, out_vars))
        elif not stats.terminal:
            log.warning("node %s has no outgoing edges; out-balance skipped", node.label())
        if in_vars:
            balances.append(Balance(node.label(), "in", stats.support, in_vars))
        elif not stats.initial:
            log.warning("node %s has no incoming edges; in-balance skipped", node.label())
    return ConstraintProblem(
        edges=edges, ordinals=ordinals, uppers=uppers, balances=tuple(balances)
    )


def pin_zero(problem: ConstraintProblem, edge: Edge) -> ConstraintProblem:
    """A copy of the problem with one edge forced to zero."""
    i = problem.index_of(edge)
    return replace(problem, pinned=problem.pinned | {i}, _index=problem._index)


def block_assignment(problem: ConstraintProblem, values: Assignment) -> ConstraintProblem:
    """A copy of the problem that excludes one exact assignment."""
    if len(values) != len(problem.edges):
        raise ValueError("assignment length %d does not match %d edges" % (len(values), len(problem.edges)))
    return replace(problem, blocked=problem.blocked + (tuple(values),), _index=problem._index)


def _propagate(domains: list[tuple[int, int]], balances: tuple[Balance, ...]) -> bool:
    """Tighten interval domains to a fixpoint; False on contradiction."""
    changed = True
    while changed:
        changed = False
        for b in balances:
            lo_sum = sum(domains[v][0] for v in b.vars)
            hi_sum = sum(domains[v][1] for v in b.vars)
            if lo_sum > b.total or hi_sum < b.total:
                return False
            for v in b.vars:
                lo, hi = domains[v]
                new_lo = max(lo, b.total - (hi_sum - hi))
                new_hi = min(hi, b.total - (lo_sum - lo))
                if new_lo > new_hi:
                    return False
                if (new_lo, new_hi) != (lo, hi):
                    domains[v] = (new_lo, new_hi)
                    changed = True
    return True


def _leaves(domains: list[tuple[int, int]], balances: tuple[Balance, ...]) -> Iterator[Assignment]:
    if not _propagate(domains, balances):
        return
    open_vars = [i for i, (lo, hi) in enumerate(domains) if lo < hi]
    if not open_vars:
        yield tuple(lo for lo, _ in domains)
        return
    var = min(open_vars, key=lambda i: domains[i][1] - domains[i][0])
    lo, hi = domains[var]
    for value in range(hi, lo - 1, -1):
        child = list(domains)
        child[var] = (value, value)
        yield from _leaves(child, balances)


def solutions(problem: ConstraintProblem) -> Iterator[Solution]:
    """All solutions, deterministically ordered, blocked ones skipped."""
    domains = [(0, problem.effective_upper(i)) for i in range(len(problem.edges))]
    blocked = set(problem.blocked)
    for assignment in _leaves(domains, problem.balances):
        if assignment not in blocked:
            yield Solution(problem, assignment)


def solve(problem: ConstraintProblem) -> Solution | None:
    """First solution in the deterministic order, or None if infeasible."""
    return next(solutions(problem), None)


def enumerate_solutions(problem: ConstraintProblem, limit: int | None = None) -> list[Solution]:
    """Up to limit distinct solutions (all of them when limit is None)."""
    stream = solutions(problem)
    return list(stream if limit is None else islice(stream, limit))


BRUTE_FORCE_CAP = 10_000_000


def brute_force_solutions(problem: ConstraintProblem, cap: int = BRUTE_FORCE_CAP) -> list[Assignment]:
    """Check every assignment in the bound box; the independent oracle.

    Refuses to run when the box holds more than cap points.
    """
    n = len(problem.edges)
    sizes = [problem.effective_upper(i) + 1 for i in range(n)]
    total = 1
    for s in sizes:
        total *= s
    if total > cap:
        raise ValueError("assignment space %d exceeds cap %d" % (total, cap))
    blocked = set(problem.blocked)
    if n == 0:
        return [] if () in blocked else [()]

    strides = [1] * n
    for i in range(n - 2, -1, -1):
        strides[i] = strides[i + 1] * sizes[i + 1]
    rows = np.zeros((len(problem.balances), n), dtype=np.int64)
    totals = np.zeros(len(problem.balances), dtype=np.int64)
    for r, b in enumerate(problem.balances):
        totals[r] = b.total
        for v in b.vars:
            rows[r, v] = 1

    out: list[Assignment] = []
    chunk = 1 << 20
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        grid = np.empty((len(idx), n), dtype=np.int64)
        for i in range(n):
            grid[:, i] = (idx // strides[i]) % sizes[i]
        ok = np.all(rows @ grid.T == totals[:, None], axis=0)
        for row in grid[ok]:
            values = tuple(int(x) for x in row)
            if values not in blocked:
                out.append(values)
    return out


def export_smtlib(problem: ConstraintProblem) -> str:
    """QF_LIA script equivalent to the problem, for external checking."""
    lines = [
        "; support consistency constraints",
        "(set-option :produce-models true)",
        "(set-logic QF_LIA)",
    ]
    names = [problem.var_name(i) for i in range(len(problem.edges))]
    for name in names:
        lines.append("(declare-const %s Int)" % name)
    for i, name in enumerate(names):
        lines.append("(assert (and (<= 0 %s) (<= %s %d)))" % (name, name, problem.uppers[i]))
    for i in sorted(problem.pinned):
        lines.append("(assert (= %s 0))" % names[i])
    for b in problem.balances:
        term = names[b.vars[0]] if len(b.vars) == 1 else "(+ %s)" % " ".join(names[v] for v in b.vars)
        lines.append("(assert (= %s %d)) ; %s %s" % (term, b.total, b.node, b.side))
    for values in problem.blocked:
        eqs = " ".join("(= %s %d)" % (names[i], v) for i, v in enumerate(values))
        lines.append("(assert (not (and %s)))" % eqs)
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def check_solution(problem: ConstraintProblem, values: Iterable[int]) -> bool:
    """Does an assignment satisfy bounds, pins, balances, and blocks?"""
    vals = tuple(values)
    if len(vals) != len(problem.edges):
        return False
    for i, v in enumerate(vals):
        if v < 0 or v > problem.effective_upper(i):
            return False
    for b in problem.balances:
        if sum(vals[v] for v in b.vars) != b.total:
            return False
    return vals not in set(problem.blocked)
