"""Grammars shipped with the package."""

from importlib import resources

from .grammar import Grammar, parse_grammar

FIXTURES = {
    "G_PAREN": "paren.bnf",
    "G_LIST_L": "list_left.bnf",
    "G_LIST_R": "list_right.bnf",
    "G_EXPR": "expr.bnf",
    "G_JSON": "json.bnf",
    "G_DIGITS": "digits.bnf",
    "G_TWO_LISTS": "two_lists.bnf",
    "G_AMBIGUOUS": "ambiguous.bnf",
}


def fixture_path(name: str):
    return resources.files(__package__).joinpath("grammars", FIXTURES.get(name, name))


def fixture_text(name: str) -> str:
    return fixture_path(name).read_text(encoding="utf-8")


def load_fixture(name: str) -> Grammar:
    return parse_grammar(fixture_text(name))
