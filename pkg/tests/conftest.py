import functools
import random

import pytest

from lrmask.dpda import build_dpda
from lrmask.fixtures import load_fixture
from lrmask.grammar import parse_grammar
from lrmask.lr1 import compile_lr1
from lrmask.optimize import aggregate_edges, merge_edges

FIXTURE_NAMES = ["G_PAREN", "G_LIST_L", "G_LIST_R", "G_EXPR", "G_DIGITS", "G_TWO_LISTS", "G_JSON"]


@functools.lru_cache(maxsize=None)
def compiled_fixture(name):
    return compile_lr1(load_fixture(name))


@functools.lru_cache(maxsize=None)
def compiled_text(text):
    return compile_lr1(parse_grammar(text))


@functools.lru_cache(maxsize=None)
def fixture_dpda(name, aggregate=False, merge=False):
    d = build_dpda(compiled_fixture(name))
    if aggregate:
        d = aggregate_edges(d)
    if merge:
        d = merge_edges(d)
    return d


def state_with(c, text):
    """Id of the unique state whose printed items include ``text``."""
    hits = [
        sid for sid in range(len(c.graph.states))
        if text in c.graph.describe_state(sid).splitlines()
    ]
    assert len(hits) == 1, (text, hits)
    return hits[0]


@pytest.fixture
def rng():
    return random.Random(1234)


# one line per acceptance criterion, printed after the test session
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
