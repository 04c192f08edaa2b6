"""Grammar text to optimized automaton in one call."""

from __future__ import annotations

from .dpda import DPDA, build_dpda
from .grammar import parse_grammar
from .lr1 import DEFAULT_MAX_STATES, Compiled, compile_lr1
from .optimize import aggregate_edges, merge_edges


def compile_grammar(
    text: str,
    aggregate: bool = True,
    merge: bool = True,
    conservative_cycles: bool = False,
    budget: int | None = None,
    max_states: int = DEFAULT_MAX_STATES,
) -> tuple[Compiled, DPDA]:
    compiled = compile_lr1(parse_grammar(text), max_states)
    d = build_dpda(compiled, conservative_cycles=conservative_cycles, budget=budget)
    if aggregate:
        d = aggregate_edges(d)
    if merge:
        d = merge_edges(d)
    return compiled, d
