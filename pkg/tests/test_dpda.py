import itertools

import pytest

from lrmask.dpda import (
    ACCEPTANCE,
    CYCLE_BACK,
    DPDA,
    REDUCTION,
    Edge,
    _Patterns,
    add_acceptance_edges,
    applicable_edges,
    apply_cycle_backedges,
    build_dpda,
    default_budget,
    detect_cycles,
    generate_reduction_edges,
    group_edges,
    validate_determinism,
)
from lrmask.errors import DivergentReduction, OverlappingCycles
from lrmask.grammar import END
from lrmask.lr1 import Shift
from lrmask.oracle import oracle_parse, random_sentence
from lrmask.runtime import init_config, run, step

from conftest import FIXTURE_NAMES, compiled_fixture, compiled_text, fixture_dpda, state_with

A, LP, RP, X = ord("a"), ord("("), ord(")"), ord("x")


def test_list_r_cycle_is_the_x_self_loop():
    c = compiled_fixture("G_LIST_R")
    s = c.graph.transitions[0, X]
    assert c.graph.transitions[s, X] == s
    assert detect_cycles(c) == [(s,)]


def test_acyclic_grammar_has_no_cycles():
    assert detect_cycles(compiled_text('S -> "a"')) == []


def test_paren_open_loop_is_not_a_reduction_cycle():
    # every reduction pops a fixed number of states, so the ( loop never
    # changes the depth of a merged chain
    assert detect_cycles(compiled_fixture("G_PAREN")) == []


def test_paren_conservative_mode_collapses_the_loop():
    c = compiled_fixture("G_PAREN")
    cycles = detect_cycles(c, conservative=True)
    loop = c.graph.transitions[c.graph.transitions[0, LP], LP]
    assert cycles == [(loop,)]
    # unsound by design: the nesting count is forgotten
    d = build_dpda(c, conservative_cycles=True)
    assert run(d, b"(((a))").accepted
    assert not oracle_parse(c.tables, b"(((a))").accepted


def test_list_r_backedge():
    c = compiled_fixture("G_LIST_R")
    (cyc,) = detect_cycles(c)
    (s,) = cyc
    assert apply_cycle_backedges(c, [cyc]) == [Edge(s, s, 1 << X, (s,), (s,), CYCLE_BACK)]


def test_no_cycles_no_backedges():
    assert apply_cycle_backedges(compiled_fixture("G_PAREN"), []) == []


def test_two_disjoint_cycles():
    c = compiled_fixture("G_TWO_LISTS")
    cycles = detect_cycles(c)
    assert len(cycles) == 2
    edges = apply_cycle_backedges(c, cycles)
    assert len(edges) == 2
    loops = {e.source for e in edges}
    assert len(loops) == 2
    for e in edges:
        assert e.match_pop == (e.source,) and e.push == (e.source,)
    assert {e.accepted for e in edges} == {1 << X, 1 << ord("y")}


def test_overlapping_cycles_rejected():
    with pytest.raises(OverlappingCycles):
        apply_cycle_backedges(compiled_fixture("G_LIST_R"), [(1, 2), (1, 2, 3, 1, 2)])


def test_paren_acceptance_edge():
    c = compiled_fixture("G_PAREN")
    edges = add_acceptance_edges(c)
    k = c.graph.transitions[0, LP]
    assert Edge(0, k, 1 << LP, (), (k,), ACCEPTANCE) in edges
    # the state [S -> a ·, $] has no terminal transitions
    assert not [e for e in edges if e.source == state_with(c, '[S -> "a" ·, $]')]


def test_expr_acceptance_edges_match_shift_cells():
    c = compiled_fixture("G_EXPR")
    edges = add_acceptance_edges(c)
    shifts = {(s, a, act.state) for (s, a), act in c.tables.action.items() if isinstance(act, Shift)}
    got = [(e.source, e.terminals[0], e.target) for e in edges]
    assert len(got) == len(set(got)) == len(shifts)
    assert set(got) == shifts
    assert all(e.match_pop == () and e.push == (e.target,) for e in edges)


def test_paren_reduction_edge_replaces_reduce_then_shift():
    c = compiled_fixture("G_PAREN")
    s = state_with(c, '[S -> "a" ·, ")"]')
    edges = [e for e in generate_reduction_edges(c) if e.source == s and e.accepts(RP)]
    opened = state_with(c, '[S -> "(" · S ")", $]')
    nested = state_with(c, '[S -> "(" · S ")", ")"]')
    want = {
        # pop the a-state (exposing the open state), push goto on S, then the ) shift
        Edge(s, state_with(c, '[S -> "(" S ")" ·, $]'), 1 << RP, (s, opened),
             (opened, state_with(c, '[S -> "(" S · ")", $]'), state_with(c, '[S -> "(" S ")" ·, $]')), REDUCTION),
        Edge(s, state_with(c, '[S -> "(" S ")" ·, ")"]'), 1 << RP, (s, nested),
             (nested, state_with(c, '[S -> "(" S · ")", ")"]'), state_with(c, '[S -> "(" S ")" ·, ")"]')), REDUCTION),
    }
    assert set(edges) == want


def test_paren_reduction_edge_to_accept():
    c = compiled_fixture("G_PAREN")
    s = state_with(c, '[S -> "a" ·, $]')
    (e,) = [e for e in generate_reduction_edges(c) if e.source == s]
    assert e.accepted == 1 << END and e.target == c.graph.accept_state
    assert e.match_pop == (s, 0) and e.push == (0, c.graph.accept_state)


def test_state_without_completed_items_has_no_reduction_edges():
    c = compiled_fixture("G_PAREN")
    sources = {e.source for e in generate_reduction_edges(c)}
    for sid in range(len(c.graph.states)):
        if sid not in c.graph.reductions:
            assert sid not in sources


def test_naive_merge_diverges_without_cycle_handling():
    with pytest.raises(DivergentReduction):
        generate_reduction_edges(compiled_fixture("G_LIST_R"), cycles=())


def test_budget_is_enforced():
    with pytest.raises(DivergentReduction):
        build_dpda(compiled_fixture("G_JSON"), budget=10)


def test_count_sensitive_grammar_is_reported():
    # A is right recursive before "y"; B nests "x" .. "w" before "z": the x loop
    # is shared, so its count matters on one path and not on the other
    c = compiled_text('S -> A "y" | B "z"\nA -> "x" A | "x"\nB -> "x" B "w" | "x"')
    with pytest.raises(DivergentReduction):
        build_dpda(c)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_dpda_is_valid(name):
    c = compiled_fixture(name)
    d = fixture_dpda(name)
    assert validate_determinism(d, c.graph) == []
    assert d.edge_count < default_budget(c)
    for e in d.all_edges():
        assert e.accepted and not e.accepted >> 257
        if e.origin == ACCEPTANCE:
            assert e.match_pop == () and e.push == (e.target,)
        if e.origin == CYCLE_BACK:
            assert e.push == (e.match_pop[-1],) and e.match_pop[0] == e.source


def test_duplicate_condition_is_one_violation():
    e1 = Edge(0, 1, 1 << A, (), (1,), ACCEPTANCE)
    e2 = Edge(0, 2, 1 << A, (), (2,), ACCEPTANCE)
    d = DPDA(3, 0, 2, group_edges([e1, e2]))
    bad = validate_determinism(d)
    assert len(bad) == 1 and bad[0].kind == "duplicate"


def test_incompatible_stack_effect_is_reported():
    c = compiled_fixture("G_PAREN")
    # pushes a state that is not a successor of the source
    e = Edge(0, 7, 1 << A, (), (7,), REDUCTION)
    d = DPDA(10, 0, 1, group_edges([e]))
    bad = validate_determinism(d, c.graph)
    assert [v.kind for v in bad] == ["stack"]


@pytest.mark.parametrize("name", ["G_PAREN", "G_LIST_L", "G_LIST_R", "G_TWO_LISTS"])
def test_language_equivalence_small(name):
    c = compiled_fixture(name)
    d = fixture_dpda(name)
    alphabet = sorted(c.grammar.terminals)
    for n in range(7):
        for w in itertools.product(alphabet, repeat=n):
            w = bytes(w)
            o, r = oracle_parse(c.tables, w), run(d, w)
            assert (o.accepted, o.reject_position) == (r.accepted, r.reject_offset), w


@pytest.mark.parametrize("name", ["G_EXPR", "G_DIGITS", "G_JSON"])
def test_language_equivalence_sampled(name, rng):
    c = compiled_fixture(name)
    d = fixture_dpda(name)
    alphabet = sorted(c.grammar.terminals)
    for _ in range(1500):
        w = bytearray(random_sentence(c.grammar, rng))
        if rng.random() < 0.6 and w:
            w[rng.randrange(len(w))] = rng.choice(alphabet)
        o, r = oracle_parse(c.tables, bytes(w)), run(d, bytes(w))
        assert (o.accepted, o.reject_position) == (r.accepted, r.reject_offset), bytes(w)


def test_list_r_stack_is_bounded():
    d = fixture_dpda("G_LIST_R")
    depths = {n: run(d, b"x" * n).max_depth for n in (1, 4, 16, 64)}
    assert set(depths.values()) == {depths[4]}
    assert all(run(d, b"x" * n).accepted for n in (1, 4, 16, 64))


def test_list_l_stack_is_bounded():
    d = fixture_dpda("G_LIST_L")
    assert run(d, b"x" + b",x" * 64).max_depth == run(d, b"x" + b",x" * 4).max_depth


@pytest.mark.parametrize("name", ["G_JSON", "G_TWO_LISTS", "G_LIST_R"])
def test_runtime_stack_stays_collapsed(name, rng):
    c = compiled_fixture(name)
    d = fixture_dpda(name)
    pats = _Patterns(d.cycles)
    for _ in range(300):
        cfg = init_config(d)
        for b in random_sentence(c.grammar, rng):
            cfg = step(d, cfg, b)
            assert cfg.alive and pats.free(cfg.stack)
            assert cfg.stack[-1] == cfg.state


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_longest_match_has_unique_winner(name, rng):
    c = compiled_fixture(name)
    d = fixture_dpda(name)
    symbols = sorted(c.grammar.terminals) + [END]
    for _ in range(200):
        cfg = init_config(d)
        for b in random_sentence(c.grammar, rng)[: rng.randint(0, 12)]:
            cfg = step(d, cfg, b)
        t = rng.choice(symbols)
        hits = applicable_edges(d, cfg.stack, t)
        if hits:
            longest = max(len(e.match_pop) for e in hits)
            assert sum(len(e.match_pop) == longest for e in hits) == 1
