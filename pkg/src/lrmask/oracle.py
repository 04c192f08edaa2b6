"""Naive ground truth for tests: a table-driven LR(1) parser and a sentence enumerator.

Nothing here is tuned for speed.  The parser keeps the textbook paired stack of
grammar symbols and states so that it shares no stack representation with the
pushdown automaton it is used to check.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Literal

from .errors import EnumerationBudgetExceeded
from .grammar import END, Grammar
from .lr1 import Accept, ParseTables, Reduce, Shift

MAX_ENUM_LEN = 16


@dataclass
class ParseOutcome:
    verdict: Literal["accept", "reject"]
    reject_position: int | None = None
    trace: list[str] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"


def oracle_parse(t: ParseTables, data: bytes, keep_trace: bool = False) -> ParseOutcome:
    g = t.grammar
    stack: list = [t.initial]  # s0 X1 s1 X2 s2 ...
    trace: list[str] = []
    pos = 0
    while True:
        a = data[pos] if pos < len(data) else END
        act = t.action.get((stack[-1], a))
        if act is None:
            return ParseOutcome("reject", pos, trace)
        if isinstance(act, Shift):
            stack += [a, act.state]
            pos += 1
            if keep_trace:
                trace.append(f"shift {act.state}")
        elif isinstance(act, Reduce):
            prod = g.productions[act.prod]
            if prod.rhs:
                del stack[-2 * len(prod.rhs):]
            nxt = t.goto[stack[-1], prod.lhs]
            stack += [prod.lhs, nxt]
            if keep_trace:
                trace.append(f"reduce {prod}")
        else:
            assert act is Accept
            if keep_trace:
                trace.append("accept")
            return ParseOutcome("accept", None, trace)


def _min_lengths(g: Grammar) -> dict:
    inf = float("inf")
    best = {nt: inf for nt in g.nonterminals}
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            n = sum(1 if isinstance(s, int) else best[s] for s in p.rhs)
            if n < best[p.lhs]:
                best[p.lhs] = n
                changed = True
    return best


def enumerate_sentences(
    g: Grammar, max_len: int, frontier_limit: int = 2_000_000
) -> set[bytes]:
    """All sentences of L(g) of length <= max_len, by breadth-first leftmost derivation."""
    if max_len > MAX_ENUM_LEN:
        raise ValueError(f"max_len must be <= {MAX_ENUM_LEN}")
    minlen = _min_lengths(g)

    def lower_bound(form) -> float:
        return sum(1 if isinstance(s, int) else minlen[s] for s in form)

    start = (g.start,)
    seen = {start}
    queue = deque([start])
    out: set[bytes] = set()
    while queue:
        form = queue.popleft()
        i = next((k for k, s in enumerate(form) if isinstance(s, str)), None)
        if i is None:
            out.add(bytes(form))
            continue
        for pid in g.productions_for(form[i]):
            new = form[:i] + g.productions[pid].rhs + form[i + 1 :]
            if new in seen or lower_bound(new) > max_len:
                continue
            seen.add(new)
            queue.append(new)
            if len(seen) > frontier_limit:
                raise EnumerationBudgetExceeded(
                    f"more than {frontier_limit} sentential forms while enumerating"
                )
    return out


def viable_prefixes(sentences) -> set[bytes]:
    """Prefix closure of a sentence set."""
    out = set()
    for s in sentences:
        for i in range(len(s) + 1):
            out.add(s[:i])
    return out


def random_sentence(g: Grammar, rng, max_depth: int = 8) -> bytes:
    """Random member of L(g) by top-down derivation; beyond ``max_depth`` the
    alternative with the shortest minimal yield is always chosen."""
    minlen = _min_lengths(g)

    def cost(pid):
        return sum(1 if isinstance(s, int) else minlen[s] for s in g.productions[pid].rhs)

    out = bytearray()
    work: list = [(g.start, 0)]
    while work:
        sym, depth = work.pop()
        if isinstance(sym, int):
            out.append(sym)
            continue
        alts = [p for p in g.productions_for(sym) if cost(p) < float("inf")]
        if depth >= max_depth:
            best = min(cost(p) for p in alts)
            alts = [p for p in alts if cost(p) == best]
        pid = rng.choice(alts)
        for s in reversed(g.productions[pid].rhs):
            work.append((s, depth + 1))
    return bytes(out)
