"""LR(1) transition graph -> deterministic pushdown automaton.

Every DPDA edge consumes exactly one terminal.  An edge carries a *match
condition* (state ids compared against the stack top, top-first, then
popped) and a *push* sequence (bottom-first).  Chains of reductions that an
LR(1) parser would perform before shifting a terminal are precomputed into a
single edge, so the runtime never explores paths.

The stack alphabet is the set of LR(1) state ids; the stack top is always the
current state.  Several edges may leave the same state on the same terminal;
they are ordered by decreasing match length and the first whose condition
holds is taken (longest match).

Shift cycles whose repetitions are unwound by a single reduction chain are
collapsed on the stack: pushing ``s1`` on top of ``s1 .. sn`` (one full
traversal) pops the traversal first.  The rewrite is only applied to cycles
for which it provably does not change the accepted language, which keeps the
set of reduction edges finite and the stack bounded inside such cycles.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

from .errors import DivergentReduction, OverlappingCycles
from .grammar import END
from .lr1 import Accept, Compiled, Reduce, Shift, TransitionGraph

ACCEPTANCE = "acceptance"
REDUCTION = "reduction"
CYCLE_BACK = "cycle_back"
ORIGINS = (ACCEPTANCE, REDUCTION, CYCLE_BACK)

ALL_TERMINALS = (1 << 257) - 1


def terminal_mask(terminals: Iterable[int]) -> int:
    m = 0
    for t in terminals:
        m |= 1 << t
    return m


def mask_terminals(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


@dataclass(frozen=True)
class Edge:
    """Prefix-conditioned edge."""

    source: int
    target: int
    accepted: int  # bit t set for byte t; bit 256 is the end marker
    match_pop: tuple[int, ...]  # top-first
    push: tuple[int, ...]  # bottom-first
    origin: str = REDUCTION

    def accepts(self, t: int) -> bool:
        return bool(self.accepted >> t & 1)

    @property
    def terminals(self) -> list[int]:
        return mask_terminals(self.accepted)

    def sort_key(self):
        return (-len(self.match_pop), self.match_pop, self.accepted, self.push, self.target)


@dataclass(frozen=True)
class CompositeEdge:
    """Edge followed by its forced continuation, taken as one transition.

    ``via`` is the match condition of the ordinary edge this extends; the
    composite applies only when that edge wins longest-match arbitration and
    the input continues with ``tail``.  ``match_pop``/``push`` are the stack
    effect of running the component edges in order.
    """

    source: int
    target: int
    first: int
    via: tuple[int, ...]
    tail: bytes
    match_pop: tuple[int, ...]
    push: tuple[int, ...]


@dataclass
class DPDA:
    num_states: int
    initial: int
    accept_state: int
    edges: dict[int, tuple[Edge, ...]]
    cycles: tuple[tuple[int, ...], ...] = ()
    composites: dict[int, tuple[CompositeEdge, ...]] = field(default_factory=dict)
    # reduce-only states: state -> (pop count, exposed state -> goto target)
    default_reductions: dict[int, tuple[int, dict[int, int]]] = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    grammar_hash: str = ""

    @property
    def initial_stack(self) -> tuple[int, ...]:
        return (self.initial,)

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.edges.values())

    def all_edges(self) -> Iterator[Edge]:
        for s in sorted(self.edges):
            yield from self.edges[s]

    @cached_property
    def index(self) -> dict[int, dict[int, tuple]]:
        """state -> terminal -> candidates ``(len, match bottom-first, push, target)``."""
        table: dict[int, dict[int, list]] = {}
        for s, edges in self.edges.items():
            per: dict[int, list] = {}
            for e in edges:
                cand = (len(e.match_pop), list(reversed(e.match_pop)), e.push, e.target)
                for t in mask_terminals(e.accepted):
                    per.setdefault(t, []).append(cand)
            table[s] = {
                t: tuple(sorted(c, key=lambda c: -c[0])) for t, c in per.items()
            }
        return table

    @cached_property
    def composite_index(self) -> dict[tuple[int, int, tuple], tuple]:
        """(state, terminal, winning edge condition) -> ``(tail, len, push)``."""
        table = {}
        for s, comps in self.composites.items():
            for c in comps:
                for t in mask_terminals(c.first):
                    table[s, t, c.via] = (c.tail, len(c.match_pop), c.push)
        return table

    def structure(self):
        """Hashable summary used for structural equality checks."""
        return (
            self.num_states,
            self.initial,
            self.accept_state,
            tuple((s, self.edges[s]) for s in sorted(self.edges)),
            self.cycles,
            tuple((s, self.composites[s]) for s in sorted(self.composites)),
            tuple(sorted((s, k, tuple(sorted(g.items()))) for s, (k, g) in self.default_reductions.items())),
        )


# -- cycle patterns --------------------------------------------------------------

def _pattern(cycle: Sequence[int]) -> tuple[int, ...]:
    return tuple(cycle) + (cycle[0],)


def _canonical_cycle(cycle: Sequence[int]) -> tuple[int, ...]:
    n = len(cycle)
    return min(tuple(cycle[i:]) + tuple(cycle[:i]) for i in range(n))


def _contains(seq: Sequence[int], pat: Sequence[int]) -> bool:
    n = len(pat)
    return any(tuple(seq[i : i + n]) == tuple(pat) for i in range(len(seq) - n + 1))


class _Patterns:
    def __init__(self, cycles: Iterable[Sequence[int]]):
        self.cycles = [tuple(c) for c in cycles]
        self.patterns = [_pattern(c) for c in self.cycles]
        self.by_first: dict[int, list[tuple[int, ...]]] = {}
        for p in self.patterns:
            self.by_first.setdefault(p[0], []).append(p)

    def __bool__(self):
        return bool(self.patterns)

    def starts_with(self, seq: Sequence[int]) -> bool:
        for p in self.by_first.get(seq[0], ()) if seq else ():
            if tuple(seq[: len(p)]) == p:
                return True
        return False

    def normalize(self, seq: list[int]) -> list[int]:
        """Collapse every ``s1 .. sn s1`` occurrence into ``s1``."""
        if not self.patterns:
            return seq
        changed = True
        while changed:
            changed = False
            for i, s in enumerate(seq):
                for p in self.by_first.get(s, ()):
                    if tuple(seq[i : i + len(p)]) == p:
                        seq = seq[:i] + seq[i + len(p) - 1 :]
                        changed = True
                        break
                if changed:
                    break
        return seq

    def free(self, seq: Sequence[int]) -> bool:
        return not any(_contains(seq, p) for p in self.patterns)


# -- the builder -------------------------------------------------------------------

def default_budget(compiled: Compiled) -> int:
    return 100 * len(compiled.graph.states) * (len(compiled.grammar.terminals) + 1)


class _Builder:
    def __init__(self, compiled: Compiled, budget: int | None = None):
        self.c = compiled
        self.tg: TransitionGraph = compiled.graph
        self.action = compiled.tables.action
        self.goto = compiled.tables.goto
        g = compiled.grammar
        self.rhs_len = [len(p.rhs) for p in g.productions]
        self.lhs = [p.lhs for p in g.productions]
        self.preds = self.tg.predecessors
        self.budget = budget if budget is not None else default_budget(compiled)
        self.work = 0
        self._lookaheads: dict[int, list[int]] | None = None

    # terminals (plus $) with a reduce action, per state
    @property
    def reduce_lookaheads(self) -> dict[int, list[int]]:
        if self._lookaheads is None:
            out: dict[int, list[int]] = {}
            for (s, a), act in self.action.items():
                if isinstance(act, Reduce) or act is Accept:
                    out.setdefault(s, []).append(a)
            self._lookaheads = {s: sorted(v) for s, v in out.items()}
        return self._lookaheads

    def _is_path(self, seq: Sequence[int]) -> bool:
        return all(a in self.preds.get(b, ()) for a, b in zip(seq, seq[1:]))

    # -- reduction chains ------------------------------------------------------

    def chains(self, s: int, a: int, pats: _Patterns, candidates: set | None):
        """Yield ``(match_pop, push, target)`` for every stack context of (s, a).

        Walks the reduce chain an LR(1) parser would run on lookahead ``a``,
        extending the examined stack region backwards through predecessor
        states whenever a reduction pops deeper than what is known.
        """
        action, goto, rhs_len, lhs = self.action, self.goto, self.rhs_len, self.lhs
        branches = [([s], [s])]  # (examined, top-first), (working stack, bottom-first)
        while branches:
            orig, cur = branches.pop()
            while True:
                act = action.get((cur[-1], a))
                if act is None:
                    break
                if type(act) is Shift:
                    yield orig, pats.normalize(cur + [act.state]), act.state
                    break
                if act is Accept:
                    yield orig, cur, cur[-1]
                    break
                k = rhs_len[act.prod]
                alive = True
                while len(cur) < k + 1:
                    options = []
                    rev = list(reversed(orig))
                    for q in self.preds.get(orig[-1], ()):
                        seq = [q] + rev
                        if pats.starts_with(seq):
                            continue  # never on a normalized stack
                        if candidates is not None:
                            cyc = _closed_walk(seq)
                            if cyc is not None and candidates.add_if_new(cyc):
                                continue  # resolve the candidate before going deeper
                        options.append(q)
                    if not options:
                        alive = False
                        break
                    for q in options[1:]:
                        branches.append((orig + [q], [q] + cur))
                    orig = orig + [options[0]]
                    cur = [options[0]] + cur
                if not alive:
                    break
                if k:
                    del cur[-k:]
                g = goto.get((cur[-1], lhs[act.prod]))
                if g is None:
                    break
                cur.append(g)
                cur = pats.normalize(cur)
                self.work += 1
                if self.work > self.budget:
                    raise DivergentReduction(
                        f"reduction-edge generation exceeded the budget of {self.budget} "
                        f"steps (state {s}, lookahead {a}); an unbounded reduction "
                        "chain was not resolved by cycle handling"
                    )

    def straddle_variants(self, source, match, push, pats: _Patterns):
        """Base edge plus variants that also collapse a traversal lying
        partly below the examined region (longest match picks them)."""
        out = [(tuple(match), tuple(push))]
        if not pats:
            return out
        seen = {out[0]}
        todo = [(list(match), list(push))]
        while todo:
            m, p = todo.pop()
            for pat in pats.patterns:
                n = len(pat) - 1
                for j in range(1, n + 1):
                    rest = pat[j:]
                    if len(p) < len(rest) or tuple(p[: len(rest)]) != rest:
                        continue
                    need = list(pat[:j])
                    if not m and need[-1] != source:
                        continue
                    m2 = m + need[::-1]
                    region = m2[::-1]
                    if not self._is_path(region) or not pats.free(region):
                        continue
                    p2 = pats.normalize(need + p)
                    key = (tuple(m2), tuple(p2))
                    if key not in seen:
                        seen.add(key)
                        out.append(key)
                        todo.append((m2, p2))
        return out

    def reduction_edges(self, pats: _Patterns) -> list[Edge]:
        edges: dict[tuple, Edge] = {}
        for s, las in sorted(self.reduce_lookaheads.items()):
            for a in las:
                for orig, cur, target in self.chains(s, a, pats, None):
                    for m, p in self.straddle_variants(s, orig, cur, pats):
                        m, p = _trim(s, m, p)
                        key = (s, a, m)
                        e = Edge(s, target, 1 << a, m, p, REDUCTION)
                        old = edges.get(key)
                        if old is not None and old != e:
                            # same condition reached twice: keep the first, the
                            # determinism validator reports genuine clashes
                            continue
                        edges[key] = e
        return list(edges.values())

    # -- cycle soundness -------------------------------------------------------

    def collapse_is_sound(self, cycle: tuple[int, ...]) -> bool:
        """True if ``α s1..sn s1`` and ``α s1`` accept the same continuations
        for every α, i.e. every reduction that pops below the kept ``s1``
        unwinds the extra traversal without shifting and resynchronises."""
        n = len(cycle)
        s1 = cycle[0]
        pat = _pattern(cycle)
        acc = self.c.grammar.accept_production
        maxk = max(self.rhs_len)
        frontier = [[s1]]
        for m in range(maxk):
            for path in frontier:
                t = path[-1]
                for p, a in self.tg.reductions.get(t, ()):
                    if p == acc:
                        continue
                    k = self.rhs_len[p]
                    if k < m + 1:
                        continue
                    if not self._resyncs(cycle, k - m - 1, self.lhs[p], a):
                        return False
            nxt = []
            for path in frontier:
                for _, t2 in self.tg.successors.get(path[-1], ()):
                    cand = path + [t2]
                    if not _contains(cand, pat):
                        nxt.append(cand)
            frontier = nxt
            if not frontier:
                break
        return True

    def _resyncs(self, cycle, d, pending, a) -> bool:
        n = len(cycle)
        if d >= n:
            return False
        known = list(cycle[: n - d])
        wanted = pending
        for _ in range(10_000):
            g = self.goto.get((known[-1], pending))
            if g is None:
                return False
            known.append(g)
            act = self.action.get((g, a))
            if type(act) is not Reduce:
                return False
            k = self.rhs_len[act.prod]
            if k < len(known):
                if k:
                    del known[-k:]
                pending = self.lhs[act.prod]
                continue
            # the long stack must land exactly where the short one did,
            # reducing to the same nonterminal
            return k - len(known) == d and self.lhs[act.prod] == wanted
        return False


class _Candidates:
    def __init__(self, known: set):
        self.known = known
        self.found: dict[tuple, tuple] = {}

    def add_if_new(self, walk: tuple[int, ...]) -> bool:
        key = _canonical_cycle(walk)
        if key in self.known:
            return False
        self.found.setdefault(key, walk)
        return True


def _closed_walk(seq: Sequence[int]) -> tuple[int, ...] | None:
    """``seq[0] .. seq[n-1]`` if ``seq[n] == seq[0]`` for the smallest such n."""
    q = seq[0]
    for i in range(1, len(seq)):
        if seq[i] == q:
            return tuple(seq[:i])
    return None


def _trim(source, m, p):
    # popping and re-pushing only the source state is a no-op
    if m == (source,) and p and p[0] == source and len(p) > 1:
        return (), p[1:]
    return m, p


# -- public operations ------------------------------------------------------------

def detect_cycles(
    compiled: Compiled, conservative: bool = False, budget: int | None = None
) -> list[tuple[int, ...]]:
    """Shift cycles that unbounded reduction chains run through.

    Candidates are the closed walks met while following reduction chains
    backwards.  A candidate is reported when collapsing one traversal on the
    stack is language-preserving; ``conservative`` reports every candidate.
    """
    b = _Builder(compiled, budget)
    accepted: dict[tuple, tuple] = {}
    rejected: set = set()
    while True:
        cands = _Candidates(set(accepted) | rejected)
        pats = _Patterns(accepted.values())
        b.work = 0
        for s, las in sorted(b.reduce_lookaheads.items()):
            for a in las:
                for _ in b.chains(s, a, pats, cands):
                    pass
        if not cands.found:
            break
        for key, walk in sorted(cands.found.items()):
            chosen = None
            for rot in _rotations(walk, b.tg):
                if conservative or b.collapse_is_sound(rot):
                    chosen = rot
                    break
            if chosen is None:
                rejected.add(key)
            else:
                accepted[key] = chosen
    cycles = sorted(accepted.values())
    _check_overlaps(cycles)
    return cycles


def _rotations(walk, tg: TransitionGraph):
    n = len(walk)
    rots = [tuple(walk[i:]) + tuple(walk[:i]) for i in range(n)]
    # prefer a back-edge that is a terminal transition (a DPDA edge of its own)
    return sorted(rots, key=lambda r: (not isinstance(tg.accessing_symbol.get(r[0]), int), r))


def _check_overlaps(cycles):
    pats = [_pattern(c) for c in cycles]
    for i, p in enumerate(pats):
        for j, q in enumerate(pats):
            if i != j and (p[-2], p[-1]) == (q[-2], q[-1]) and _contains(q, p):
                raise OverlappingCycles(
                    f"cycles {cycles[i]} and {cycles[j]} share back-edge "
                    f"{p[-2]}->{p[-1]} with nested pop sequences"
                )


def add_acceptance_edges(compiled: Compiled) -> list[Edge]:
    """One push edge per terminal transition of the LR(1) graph."""
    out = []
    for (s, x), t in sorted(compiled.graph.transitions.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        if isinstance(x, int):
            out.append(Edge(s, t, 1 << x, (), (t,), ACCEPTANCE))
    return out


def apply_cycle_backedges(compiled: Compiled, cycles) -> list[Edge]:
    """CycleBack edges for cycles closed by a terminal transition.

    For the cycle ``s1 .. sn`` with back-edge ``sn -X-> s1`` the edge matches
    and pops ``sn .. s1`` and pushes ``s1``.  The plain acceptance edge stays
    as the fallback when the stack does not hold a full traversal.  Cycles
    closed by a nonterminal transition are collapsed inside reduction edges.
    """
    _check_overlaps(list(cycles))
    out = []
    tg = compiled.graph
    for cyc in cycles:
        s1, sn = cyc[0], cyc[-1]
        x = tg.accessing_symbol.get(s1)
        if isinstance(x, int) and tg.transitions.get((sn, x)) == s1:
            out.append(Edge(sn, s1, 1 << x, tuple(reversed(cyc)), (s1,), CYCLE_BACK))
    return out


def generate_reduction_edges(
    compiled: Compiled, cycles=(), budget: int | None = None
) -> list[Edge]:
    """Reduce chains merged with the following shift (or accept) into single edges."""
    b = _Builder(compiled, budget)
    return b.reduction_edges(_Patterns(cycles))


def build_dpda(
    compiled: Compiled,
    conservative_cycles: bool = False,
    budget: int | None = None,
) -> DPDA:
    cycles = detect_cycles(compiled, conservative_cycles, budget)
    edges = add_acceptance_edges(compiled)
    edges += apply_cycle_backedges(compiled, cycles)
    edges += generate_reduction_edges(compiled, cycles, budget)
    tg = compiled.graph
    d = DPDA(
        num_states=len(tg.states),
        initial=0,
        accept_state=tg.accept_state,
        edges=group_edges(edges),
        cycles=tuple(cycles),
        default_reductions=reduce_only_states(compiled),
        flags={"conservative_cycles": conservative_cycles},
        grammar_hash=grammar_digest(compiled.grammar),
    )
    return d


def reduce_only_states(compiled: Compiled) -> dict[int, tuple[int, dict[int, int]]]:
    """States whose only action, whatever the lookahead, is one reduction."""
    g = compiled.grammar
    acc = g.accept_production
    out = {}
    for sid, items in enumerate(compiled.graph.states):
        prods = {it.prod for it in items}
        if len(prods) != 1:
            continue
        (p,) = prods
        k = len(g.productions[p].rhs)
        if p == acc or any(it.dot != k for it in items):
            continue
        lhs = g.productions[p].lhs
        gotos = {e: t for (e, x), t in compiled.tables.goto.items() if x == lhs}
        out[sid] = (k, gotos)
    return out


def group_edges(edges: Iterable[Edge]) -> dict[int, tuple[Edge, ...]]:
    by: dict[int, list[Edge]] = {}
    for e in edges:
        by.setdefault(e.source, []).append(e)
    return {s: tuple(sorted(v, key=Edge.sort_key)) for s, v in sorted(by.items())}


def grammar_digest(g) -> str:
    from .grammar import format_grammar

    return hashlib.sha256(format_grammar(g).encode("utf-8")).hexdigest()


# -- validation ---------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    state: int
    terminal: int | None
    kind: str
    detail: str

    def __str__(self):
        t = "-" if self.terminal is None else ("$" if self.terminal == END else self.terminal)
        return f"state {self.state}, terminal {t}: {self.kind}: {self.detail}"


def validate_determinism(d: DPDA, graph: TransitionGraph | None = None) -> list[Violation]:
    """Static determinism and stack-compatibility checks; empty list means valid."""
    out: list[Violation] = []
    for s, edges in sorted(d.edges.items()):
        lens = [len(e.match_pop) for e in edges]
        if lens != sorted(lens, reverse=True):
            out.append(Violation(s, None, "order", "edges not sorted by decreasing match length"))
        per: dict[tuple[int, tuple], Edge] = {}
        for e in edges:
            if e.source != s:
                out.append(Violation(s, None, "source", f"edge filed under {s} has source {e.source}"))
            if e.match_pop and e.match_pop[0] != s:
                out.append(Violation(s, None, "match", f"condition {e.match_pop} does not start at the source"))
            if not e.push:
                if e.match_pop or e.target != s:
                    out.append(Violation(s, None, "push", "empty push must be a no-op"))
            elif e.push[-1] != e.target:
                out.append(Violation(s, None, "push", f"push {e.push} does not end at target {e.target}"))
            if e.accepted == 0:
                out.append(Violation(s, None, "accepted", "edge accepts nothing"))
            if graph is not None:
                out.extend(_compatibility(s, e, graph))
            for t in mask_terminals(e.accepted):
                key = (t, e.match_pop)
                other = per.get(key)
                if other is not None and other != e:
                    out.append(
                        Violation(s, t, "duplicate", f"two edges share condition {e.match_pop}")
                    )
                per[key] = e
    return out


def _compatibility(s, e: Edge, tg: TransitionGraph) -> list[Violation]:
    preds = tg.predecessors
    region = list(reversed(e.match_pop))
    bad = []
    if any(a not in preds.get(b, ()) for a, b in zip(region, region[1:])):
        bad.append("match condition is not a graph path")
    if any(a not in preds.get(b, ()) for a, b in zip(e.push, e.push[1:])):
        bad.append("push sequence is not a graph path")
    if e.push:
        if e.match_pop:
            if e.push[0] != e.match_pop[-1]:
                bad.append("push does not restart at the deepest matched state")
        elif s not in preds.get(e.push[0], ()):
            bad.append("push does not continue from the source")
    return [Violation(s, None, "stack", b) for b in bad]


def applicable_edges(d: DPDA, stack: Sequence[int], t: int) -> list[Edge]:
    """All edges at the stack top whose condition holds (before arbitration)."""
    out = []
    for e in d.edges.get(stack[-1], ()):
        L = len(e.match_pop)
        if e.accepts(t) and L <= len(stack) and tuple(stack[len(stack) - L :][::-1]) == e.match_pop:
            out.append(e)
    return out
