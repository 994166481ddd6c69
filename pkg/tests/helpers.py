"""Independent oracles used by the tests.

Everything here is deliberately written from the definitions, not by
calling the production code, so agreement is meaningful.
"""

from __future__ import annotations

import re
from collections import Counter
from itertools import product

from flowmine import Message, Trace, causal, trace_of


def naive_edge_support(trace: Trace, head: Message, tail: Message, window: int | None) -> int:
    """Quadratic matcher: scan tail instances in order, each takes the
    nearest strictly-earlier unmatched head instance within the window."""
    flat = list(trace.flattened())
    heads = [(e, p) for e, p, m in flat if m == head]
    tails = [(e, p) for e, p, m in flat if m == tail]
    used = set()
    count = 0
    for te, tp in tails:
        best = None
        for he, hp in heads:
            if he >= te or (he, hp) in used:
                continue
            if window is not None and tp > hp + window + 1:
                continue
            if best is None or hp > best[1]:
                best = (he, hp)
        if best is not None:
            used.add(best)
            count += 1
    return count


def naive_initials(traces) -> set:
    """A message starts a flow if, in every trace where it occurs, its
    first instance has no causal predecessor in a strictly earlier event."""
    verdict: dict[Message, bool] = {}
    for trace in traces:
        flat = list(trace.flattened())
        firsts: dict[Message, int] = {}
        for e, _, m in flat:
            firsts.setdefault(m.plain(), e)
        for msg, first_e in firsts.items():
            ok = not any(
                e < first_e and causal(other.plain(), msg) for e, _, other in flat
            )
            verdict[msg] = verdict.get(msg, True) and ok
    return {m for m, ok in verdict.items() if ok}


def naive_terminals(traces) -> set:
    verdict: dict[Message, bool] = {}
    for trace in traces:
        flat = list(trace.flattened())
        lasts: dict[Message, int] = {}
        for e, _, m in flat:
            lasts[m.plain()] = e
        for msg, last_e in lasts.items():
            ok = not any(
                e > last_e and causal(msg, other.plain()) for e, _, other in flat
            )
            verdict[msg] = verdict.get(msg, True) and ok
    return {m for m, ok in verdict.items() if ok}


def brute_minimum_size(problem) -> int | None:
    """Smallest non-zero count over every assignment within bounds
    satisfying all balances.  None when infeasible."""
    ranges = [range(problem.effective_upper(i) + 1) for i in range(len(problem.edges))]
    best = None
    for values in product(*ranges):
        if values in problem.blocked:
            continue
        if any(sum(values[i] for i in b.vars) != b.total for b in problem.balances):
            continue
        size = sum(1 for v in values if v)
        if best is None or size < best:
            best = size
    return best


def admits_single_zeroing(problem, solution) -> bool:
    """True if some feasible assignment uses a proper subset of the
    solution's non-zero edges: an edge could have been dropped without
    recruiting any new edge.  Checked by brute force."""
    from flowmine import brute_force_solutions

    support = {i for i, v in enumerate(solution.values) if v}
    for values in brute_force_solutions(problem):
        if {i for i, v in enumerate(values) if v} < support:
            return True
    return False


def random_problem(seed: int, max_edges: int = 8, max_support: int = 4):
    """Deterministic random consistency problem within the size caps.

    Draws traces until one fits, so callers never see a rejection."""
    import random

    from flowmine import build_constraints
    from flowmine.extract import annotated_graph

    rng = random.Random(seed)
    msgs = [Message(s, d, c) for s in "abc" for d in "abc" for c in "xy"]
    while True:
        events = [[rng.choice(msgs)] for _ in range(rng.randrange(4, 11))]
        problem = build_constraints(annotated_graph([trace_of(*events)]))
        if not problem.edges or len(problem.edges) > max_edges:
            continue
        if any(u > max_support for u in problem.uppers):
            continue
        if any(b.total > max_support for b in problem.balances):
            continue
        return problem


def instance_pair_counts(instances, edges) -> Counter:
    """Expected per-edge supports when pairing is confined to one flow
    instance: nearest-match within each instance's own sequence."""
    total: Counter = Counter()
    for inst in instances:
        seq = [m.plain() for _, m in inst.emissions]
        mini = trace_of(*[[m] for m in seq])
        for head, tail in edges:
            n = naive_edge_support(mini, head, tail, None)
            if n:
                total[(head, tail)] += n
    return total


_DOT_EDGE = re.compile(r'^\s*"((?:[^"\\]|\\.)*)"\s*->\s*"((?:[^"\\]|\\.)*)"\s*\[label="((?:[^"\\]|\\.)*)"\];$')
_DOT_NODE = re.compile(r'^\s*"((?:[^"\\]|\\.)*)"(?:\s*\[[^\]]*\])?;$')


def check_dot(text: str) -> tuple[set[str], list[tuple[str, str, str]]]:
    """Minimal DOT digraph checker: returns (nodes, edges) or raises."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines[0].startswith("digraph ") or not lines[0].rstrip().endswith("{"):
        raise AssertionError("missing digraph header: %r" % lines[0])
    if lines[-1].strip() != "}":
        raise AssertionError("missing closing brace")
    nodes: set[str] = set()
    edges: list[tuple[str, str, str]] = []
    for ln in lines[1:-1]:
        stripped = ln.strip()
        if stripped in ("rankdir=LR;", "node [shape=circle];"):
            continue
        m = _DOT_EDGE.match(ln)
        if m:
            edges.append((m.group(1), m.group(2), m.group(3)))
            continue
        m = _DOT_NODE.match(ln)
        if m:
            nodes.add(m.group(1))
            continue
        raise AssertionError("unparseable DOT line: %r" % ln)
    for a, b, _ in edges:
        nodes.add(a)
        nodes.add(b)
    return nodes, edges


_SMT_COMMANDS = {
    "set-option",
    "set-logic",
    "declare-const",
    "assert",
    "check-sat",
    "get-model",
}


def check_smtlib(text: str) -> list:
    """S-expression well-formedness check; every top-level form must
    open with a known command name.  Returns the parsed forms."""
    tokens = re.findall(r"\(|\)|[^\s()]+", re.sub(r";[^\n]*", "", text))
    forms = []
    stack = []
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise AssertionError("unbalanced ')'")
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            else:
                forms.append(done)
        else:
            if not stack:
                raise AssertionError("atom %r outside any form" % tok)
            stack[-1].append(tok)
    if stack:
        raise AssertionError("unbalanced '('")
    for form in forms:
        if not form or form[0] not in _SMT_COMMANDS:
            raise AssertionError("unknown top-level form: %r" % (form[:1] or ["<empty>"]))
    return forms
