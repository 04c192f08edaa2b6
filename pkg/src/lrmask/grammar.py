"""Textual BNF grammars: parsing, validation, augmentation and FIRST sets.

Grammar files hold one rule per line::

    # comment
    S -> "(" S ")" | "a"
    A -> | "x"          # empty alternative is epsilon

Quoted terminals are byte strings; ``\\xNN``, ``\\"`` and ``\\\\`` escapes are
recognised.  A multi-byte literal is desugared into consecutive byte
terminals, so at the automaton level every terminal is one byte (0-255).
The end marker ``$`` is :data:`END` (256) and never appears in a rule body.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from .errors import AlreadyAugmented, EmptyGrammar, MalformedGrammar, UndefinedSymbol

END = 256
EPSILON = None

Symbol = Union[int, str]  # byte terminal or nonterminal name


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: tuple[Symbol, ...]

    def __str__(self) -> str:
        body = " ".join(symbol_name(s) for s in self.rhs) or "ε"
        return f"{self.lhs} -> {body}"


@dataclass(frozen=True)
class Grammar:
    nonterminals: tuple[str, ...]
    terminals: frozenset[int]
    productions: tuple[Production, ...]
    start: str
    augmented_start: str | None = None
    _by_lhs: Mapping[str, tuple[int, ...]] = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self):
        index: dict[str, list[int]] = {n: [] for n in self.nonterminals}
        for pid, prod in enumerate(self.productions):
            index.setdefault(prod.lhs, []).append(pid)
        object.__setattr__(
            self, "_by_lhs", {k: tuple(v) for k, v in index.items()}
        )

    def productions_for(self, lhs: str) -> tuple[int, ...]:
        return self._by_lhs.get(lhs, ())

    def is_terminal(self, sym: Symbol) -> bool:
        return isinstance(sym, int)

    @property
    def accept_production(self) -> int | None:
        if self.augmented_start is None:
            return None
        return self.productions_for(self.augmented_start)[0]

    def symbol_order(self) -> list[Symbol]:
        """Symbols in order of first appearance in the rule list."""
        seen: dict[Symbol, None] = {}
        for prod in self.productions:
            seen.setdefault(prod.lhs, None)
            for s in prod.rhs:
                seen.setdefault(s, None)
        return list(seen)


def symbol_name(sym: Symbol) -> str:
    if isinstance(sym, str):
        return sym
    if sym == END:
        return "$"
    return '"' + _escape_byte(sym) + '"'


def _escape_byte(b: int) -> str:
    if b == 0x22:
        return '\\"'
    if b == 0x5C:
        return "\\\\"
    if 0x20 <= b < 0x7F:
        return chr(b)
    return f"\\x{b:02x}"


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#.*)
  | (?P<arrow>->)
  | (?P<bar>\|)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<string>")
    """,
    re.VERBOSE,
)


def _read_string(line: str, pos: int, lineno: int) -> tuple[bytes, int]:
    """Read a quoted literal starting just after the opening quote."""
    out = bytearray()
    i = pos
    while i < len(line):
        ch = line[i]
        if ch == '"':
            return bytes(out), i + 1
        if ch == "\\":
            nxt = line[i + 1 : i + 2]
            if nxt == '"' or nxt == "\\":
                out.append(ord(nxt))
                i += 2
                continue
            if nxt == "x":
                digits = line[i + 2 : i + 4]
                if len(digits) == 2 and all(c in "0123456789abcdefABCDEF" for c in digits):
                    out.append(int(digits, 16))
                    i += 4
                    continue
                raise MalformedGrammar("bad \\x escape", lineno, i + 1)
            raise MalformedGrammar(f"unknown escape \\{nxt}", lineno, i + 1)
        out.extend(ch.encode("utf-8"))
        i += 1
    raise MalformedGrammar("unterminated string", lineno, pos)


def parse_grammar(text: str) -> Grammar:
    """Parse grammar source text into a validated, un-augmented grammar."""
    rules: list[tuple[str, list[list[Symbol]], int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens: list[tuple[str, object, int]] = []
        pos = 0
        while pos < len(line):
            m = _TOKEN.match(line, pos)
            if m is None:
                raise MalformedGrammar(f"unexpected character {line[pos]!r}", lineno, pos + 1)
            kind = m.lastgroup
            if kind == "string":
                value, pos = _read_string(line, m.end(), lineno)
                tokens.append(("string", value, m.start() + 1))
                continue
            if kind not in ("ws", "comment"):
                tokens.append((kind, m.group(), m.start() + 1))
            pos = m.end()
        if not tokens:
            continue
        if tokens[0][0] != "ident":
            raise MalformedGrammar("rule must start with a nonterminal", lineno, tokens[0][2])
        if len(tokens) < 2 or tokens[1][0] != "arrow":
            col = tokens[1][2] if len(tokens) > 1 else len(line) + 1
            raise MalformedGrammar("expected '->'", lineno, col)
        alts: list[list[Symbol]] = [[]]
        for kind, value, col in tokens[2:]:
            if kind == "bar":
                alts.append([])
            elif kind == "ident":
                alts[-1].append(value)
            elif kind == "string":
                alts[-1].extend(value)
            else:
                raise MalformedGrammar(f"unexpected {value!r}", lineno, col)
        rules.append((tokens[0][1], alts, lineno))

    if not rules:
        raise EmptyGrammar("grammar has no rules")

    nonterminals: dict[str, int] = {}
    for lhs, _, lineno in rules:
        nonterminals.setdefault(lhs, lineno)
    productions = []
    terminals: set[int] = set()
    for lhs, alts, lineno in rules:
        for alt in alts:
            for sym in alt:
                if isinstance(sym, str):
                    if sym not in nonterminals:
                        raise UndefinedSymbol(sym, lineno)
                else:
                    terminals.add(sym)
            productions.append(Production(lhs, tuple(alt)))
    return Grammar(
        nonterminals=tuple(nonterminals),
        terminals=frozenset(terminals),
        productions=tuple(productions),
        start=rules[0][0],
    )


def format_grammar(g: Grammar) -> str:
    """Pretty-print ``g`` in the same dialect :func:`parse_grammar` reads.

    Consecutive productions of one nonterminal share a line; production
    order, and so production ids, survive a round trip.
    """
    lines: list[tuple[str, list[str]]] = []
    for prod in g.productions:
        parts: list[str] = []
        run: list[int] = []
        for sym in prod.rhs:
            if isinstance(sym, int):
                run.append(sym)
                continue
            if run:
                parts.append('"' + "".join(map(_escape_byte, run)) + '"')
                run = []
            parts.append(sym)
        if run:
            parts.append('"' + "".join(map(_escape_byte, run)) + '"')
        if lines and lines[-1][0] == prod.lhs:
            lines[-1][1].append(" ".join(parts))
        else:
            lines.append((prod.lhs, [" ".join(parts)]))
    return "".join(f"{lhs} -> " + " | ".join(alts) + "\n" for lhs, alts in lines)


def augment(g: Grammar) -> Grammar:
    """Add a fresh start symbol ``S'`` and the production ``S' -> S`` (appended last)."""
    if g.augmented_start is not None:
        raise AlreadyAugmented("grammar is already augmented")
    fresh = g.start + "'"
    while fresh in g.nonterminals:
        fresh += "'"
    return Grammar(
        nonterminals=g.nonterminals + (fresh,),
        terminals=g.terminals,
        productions=g.productions + (Production(fresh, (g.start,)),),
        start=g.start,
        augmented_start=fresh,
    )


# -- FIRST sets ----------------------------------------------------------------

class FirstSets(dict):
    """Mapping symbol -> frozenset of terminals, possibly containing EPSILON."""

    def of_sequence(self, seq: Iterable[Symbol]) -> set:
        out: set = set()
        for sym in seq:
            f = self[sym]
            out |= f - {EPSILON}
            if EPSILON not in f:
                return out
        out.add(EPSILON)
        return out


def first_sets(g: Grammar) -> FirstSets:
    first: dict[Symbol, set] = {t: {t} for t in g.terminals}
    first[END] = {END}
    for nt in g.nonterminals:
        first[nt] = set()
    changed = True
    while changed:
        changed = False
        for prod in g.productions:
            target = first[prod.lhs]
            before = len(target)
            nullable = True
            for sym in prod.rhs:
                f = first[sym]
                target |= f - {EPSILON}
                if EPSILON not in f:
                    nullable = False
                    break
            if nullable:
                target.add(EPSILON)
            if len(target) != before:
                changed = True
    return FirstSets({k: frozenset(v) for k, v in first.items()})
