"""Edge-count and step-count reductions applied after construction.

Both passes keep the recognised language, the reject offset of every input
and the stack contents between steps (up to the states a folded reduction
would have pushed and immediately popped again).
"""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

from .dpda import (
    ACCEPTANCE,
    CYCLE_BACK,
    DPDA,
    REDUCTION,
    CompositeEdge,
    Edge,
    _Patterns,
    group_edges,
)
from .grammar import END

MAX_FOLDS = 64
MAX_TAIL = 16


def _boundary_prefixes(seq: Sequence[int], pats: _Patterns) -> set:
    """(pattern, j) such that ``pattern[j:]`` is a proper prefix of ``seq``.

    These are the ways a traversal could straddle the unknown stack region
    below ``seq``.
    """
    out = set()
    for pat in pats.patterns:
        for j in range(1, len(pat)):
            rest = pat[j:]
            if tuple(seq[: len(rest)]) == rest:
                out.add((pat, j))
    return out


def _fold(d: DPDA, e: Edge, pats: _Patterns) -> Edge:
    """Run the default reductions that follow ``e`` whatever comes next.

    A reduce-only state reduces on every lookahead it accepts and errors on
    the rest.  After the reduction the parser sits in a state whose valid
    continuations are exactly those lookaheads, so moving the reduction into
    the incoming edge never changes where an error is detected.  Folding
    stops at the first reduction that would pop below the known region.
    """
    if e.origin == CYCLE_BACK or e.target not in d.default_reductions:
        return e
    base = [] if e.match_pop else [e.source]
    after = base + list(e.push)
    before = _boundary_prefixes(after, pats)
    changed = False
    for _ in range(MAX_FOLDS):
        info = d.default_reductions.get(after[-1])
        if info is None:
            break
        k, gotos = info
        if len(after) < k + 1:
            break
        trial = after[: len(after) - k]
        g = gotos.get(trial[-1])
        if g is None:
            break  # stack shape the grammar cannot produce; leave it alone
        after = pats.normalize(trial + [g])
        changed = True
    if not changed:
        return e
    push = tuple(after[len(base):])
    if not push or not _boundary_prefixes(after, pats) <= before:
        return e
    origin = ACCEPTANCE if not e.match_pop and len(push) == 1 else REDUCTION
    return replace(e, target=push[-1], push=push, origin=origin)


def aggregate_edges(d: DPDA, fold: bool = True) -> DPDA:
    """Fold default reductions, drop unreachable edges, merge parallel edges.

    Parallel edges share source, target, match condition and push and differ
    only in the terminal; they become one edge over the union of terminals.
    The edge count never grows.
    """
    pats = _Patterns(d.cycles)
    edges = [e for e in d.all_edges()]
    if fold:
        edges = [_fold(d, e, pats) for e in edges]

    # only states that can be the stack top ever have their edges consulted
    while True:
        tops = {d.initial} | {e.target for e in edges}
        kept = [e for e in edges if e.source in tops]
        if len(kept) == len(edges):
            break
        edges = kept

    merged: dict[tuple, Edge] = {}
    for e in edges:
        key = (e.source, e.target, e.match_pop, e.push)
        old = merged.get(key)
        if old is None:
            merged[key] = e
        else:
            origin = old.origin if old.origin == e.origin else REDUCTION
            merged[key] = replace(old, accepted=old.accepted | e.accepted, origin=origin)
    flags = dict(d.flags, aggregated=True)
    return replace(
        d, edges=group_edges(merged.values()), composites={}, flags=flags
    )


def _decide(index, after: list[int], y: int):
    """Edge taken on ``y`` when only ``after`` is known about the stack top.

    Returns the candidate, None if no edge can apply, or ``...`` if the
    answer depends on states below the known region.
    """
    for cand in index.get(after[-1], {}).get(y, ()):
        L, mb = cand[0], cand[1]
        if L == 0:
            return cand
        if L <= len(after):
            if after[-L:] == mb:
                return cand
        elif mb[L - len(after):] == after:
            return ...
    return None


def merge_edges(d: DPDA, max_tail: int = MAX_TAIL) -> DPDA:
    """Attach to each edge its forced continuation as a composite edge.

    A continuation is forced when the state reached allows exactly one
    terminal and not the end marker.  The ordinary edges stay in place;
    composites are only a shortcut for whole-sequence recognition.
    Applying the pass twice gives the same automaton.
    """
    index = d.index
    comps: dict[int, list[CompositeEdge]] = {}
    for e in d.all_edges():
        first = e.accepted & ~(1 << END)
        if not first:
            continue
        base = [] if e.match_pop else [e.source]
        after = base + list(e.push)
        tail = bytearray()
        while len(tail) < max_tail:
            allowed = list(index.get(after[-1], {}))
            if len(allowed) != 1 or allowed[0] == END:
                break
            y = allowed[0]
            cand = _decide(index, after, y)
            if cand is None or cand is ...:
                break
            L, _, push, _ = cand
            if L:
                del after[-L:]
            after.extend(push)
            tail.append(y)
        push = tuple(after[len(base):])
        if not tail or not push:
            continue
        comps.setdefault(e.source, []).append(
            CompositeEdge(e.source, push[-1], first, e.match_pop, bytes(tail), e.match_pop, push)
        )
    composites = {
        s: tuple(sorted(v, key=lambda c: (-len(c.via), c.via, c.first)))
        for s, v in sorted(comps.items())
    }
    return replace(d, composites=composites, flags=dict(d.flags, merged=True))
