"""Canonical LR(1) collection, transition graph and ACTION/GOTO tables."""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Union

from .errors import NotLR1Conflict, StateExplosion
from .grammar import END, EPSILON, FirstSets, Grammar, Symbol, symbol_name

DEFAULT_MAX_STATES = 1_000_000


class LR1Item(NamedTuple):
    prod: int
    dot: int
    lookahead: int

    def show(self, g: Grammar) -> str:
        p = g.productions[self.prod]
        syms = [symbol_name(s) for s in p.rhs]
        syms.insert(self.dot, "·")
        return f"[{p.lhs} -> {' '.join(syms)}, {symbol_name(self.lookahead)}]"


ItemSet = frozenset  # of LR1Item


def canonical_order(items: Iterable[LR1Item]) -> list[LR1Item]:
    return sorted(items)


class _Closer:
    """Closure/goto with per-grammar precomputation shared across calls."""

    def __init__(self, g: Grammar, f: FirstSets):
        self.g = g
        self.rhs = [p.rhs for p in g.productions]
        # FIRST of the tail after position i of each production
        self.tail_first: dict[tuple[int, int], tuple[frozenset, bool]] = {}
        for pid, rhs in enumerate(self.rhs):
            for i in range(len(rhs) + 1):
                s = f.of_sequence(rhs[i:])
                nullable = EPSILON in s
                s.discard(EPSILON)
                self.tail_first[pid, i] = (frozenset(s), nullable)

    def close(self, items: Iterable[tuple[int, int, int]]) -> ItemSet:
        la: dict[tuple[int, int], set] = defaultdict(set)
        for p, d, a in items:
            la[p, d].add(a)
        work = list(la)
        rhs_all = self.rhs
        prods_for = self.g.productions_for
        while work:
            core = work.pop()
            p, d = core
            rhs = rhs_all[p]
            if d >= len(rhs):
                continue
            nxt = rhs[d]
            if not isinstance(nxt, str):
                continue
            first, nullable = self.tail_first[p, d + 1]
            new = set(first)
            if nullable:
                new |= la[core]
            for q in prods_for(nxt):
                tgt = la[q, 0]
                if not new <= tgt:
                    tgt |= new
                    work.append((q, 0))
        return frozenset(
            LR1Item(p, d, a) for (p, d), las in la.items() for a in las
        )

    def kernel_after(self, items: Iterable[LR1Item], x: Symbol) -> frozenset:
        rhs_all = self.rhs
        return frozenset(
            LR1Item(it.prod, it.dot + 1, it.lookahead)
            for it in items
            if it.dot < len(rhs_all[it.prod]) and rhs_all[it.prod][it.dot] == x
        )


def closure(items: Iterable[LR1Item], g: Grammar, f: FirstSets) -> ItemSet:
    """Smallest item set containing ``items`` and closed under prediction."""
    return _Closer(g, f).close(items)


def goto_set(items: ItemSet, x: Symbol, g: Grammar, f: FirstSets) -> ItemSet:
    closer = _Closer(g, f)
    kernel = closer.kernel_after(items, x)
    return closer.close(kernel) if kernel else frozenset()


@dataclass
class TransitionGraph:
    grammar: Grammar
    states: list[ItemSet]
    transitions: dict[tuple[int, Symbol], int]
    reductions: dict[int, frozenset] = field(default_factory=dict)

    @cached_property
    def accessing_symbol(self) -> dict[int, Symbol]:
        return {t: x for (_, x), t in self.transitions.items()}

    @cached_property
    def predecessors(self) -> dict[int, tuple[int, ...]]:
        preds: dict[int, list[int]] = defaultdict(list)
        for (s, _), t in self.transitions.items():
            preds[t].append(s)
        return {t: tuple(sorted(v)) for t, v in preds.items()}

    @cached_property
    def successors(self) -> dict[int, list[tuple[Symbol, int]]]:
        out: dict[int, list[tuple[Symbol, int]]] = defaultdict(list)
        for (s, x), t in self.transitions.items():
            out[s].append((x, t))
        return out

    @cached_property
    def accept_state(self) -> int:
        acc = self.grammar.accept_production
        for sid, items in enumerate(self.states):
            if LR1Item(acc, 1, END) in items:
                return sid
        raise ValueError("no state contains the accepting item")

    def describe_state(self, sid: int) -> str:
        return "\n".join(it.show(self.grammar) for it in canonical_order(self.states[sid]))


def build_canonical_collection(
    g: Grammar, f: FirstSets, max_states: int = DEFAULT_MAX_STATES
) -> TransitionGraph:
    """Breadth-first worklist over GOTO starting from closure({[S' -> ·S, $]})."""
    if g.augmented_start is None:
        raise ValueError("grammar must be augmented first")
    closer = _Closer(g, f)
    order = {sym: i for i, sym in enumerate(g.symbol_order())}
    start_kernel = frozenset({LR1Item(g.accept_production, 0, END)})
    states = [closer.close(start_kernel)]
    by_kernel = {start_kernel: 0}
    transitions: dict[tuple[int, Symbol], int] = {}
    queue = deque([0])
    rhs_all = closer.rhs
    while queue:
        sid = queue.popleft()
        groups: dict[Symbol, list[LR1Item]] = defaultdict(list)
        for it in states[sid]:
            rhs = rhs_all[it.prod]
            if it.dot < len(rhs):
                groups[rhs[it.dot]].append(LR1Item(it.prod, it.dot + 1, it.lookahead))
        for sym in sorted(groups, key=order.__getitem__):
            kernel = frozenset(groups[sym])
            tid = by_kernel.get(kernel)
            if tid is None:
                tid = len(states)
                if tid >= max_states:
                    raise StateExplosion(f"more than {max_states} LR(1) states")
                states.append(closer.close(kernel))
                by_kernel[kernel] = tid
                queue.append(tid)
            transitions[sid, sym] = tid
    reductions = {}
    for sid, items in enumerate(states):
        done = frozenset(
            (it.prod, it.lookahead) for it in items if it.dot == len(rhs_all[it.prod])
        )
        if done:
            reductions[sid] = done
    return TransitionGraph(g, states, transitions, reductions)


class Shift(NamedTuple):
    state: int

    def __str__(self):
        return f"shift {self.state}"


class Reduce(NamedTuple):
    prod: int

    def __str__(self):
        return f"reduce {self.prod}"


class AcceptAction(NamedTuple):
    def __str__(self):
        return "accept"


Accept = AcceptAction()
Action = Union[Shift, Reduce, AcceptAction]


@dataclass
class ParseTables:
    grammar: Grammar
    action: dict[tuple[int, int], Action]
    goto: dict[tuple[int, str], int]
    initial: int = 0


def build_tables(tg: TransitionGraph, g: Grammar) -> ParseTables:
    action: dict[tuple[int, int], Action] = {}
    goto: dict[tuple[int, str], int] = {}
    acc = g.accept_production

    def put(key, entry):
        old = action.get(key)
        if old is not None and old != entry:
            raise NotLR1Conflict(key[0], key[1], (old, entry))
        action[key] = entry

    for (s, x), t in sorted(tg.transitions.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        if isinstance(x, int):
            put((s, x), Shift(t))
        else:
            goto[s, x] = t
    for s, reds in sorted(tg.reductions.items()):
        for p, a in sorted(reds):
            put((s, a), Accept if p == acc else Reduce(p))
    return ParseTables(g, action, goto)


@dataclass
class Compiled:
    """Grammar plus everything derived from it up to the parse tables."""

    grammar: Grammar
    first: FirstSets
    graph: TransitionGraph
    tables: ParseTables


def compile_lr1(g: Grammar, max_states: int = DEFAULT_MAX_STATES) -> Compiled:
    from .grammar import augment, first_sets

    if g.augmented_start is None:
        g = augment(g)
    f = first_sets(g)
    tg = build_canonical_collection(g, f, max_states)
    return Compiled(g, f, tg, build_tables(tg, g))
