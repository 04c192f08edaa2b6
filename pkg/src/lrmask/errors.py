"""Exception hierarchy shared by the compiler pipeline and the runtime."""


class LRMaskError(Exception):
    """Base class for every error raised by this package."""


class GrammarError(LRMaskError):
    """A grammar could not be accepted (CLI exit status 2)."""


class MalformedGrammar(GrammarError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UndefinedSymbol(GrammarError):
    def __init__(self, name: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"undefined nonterminal {name!r}{where}")
        self.name = name
        self.line = line


class EmptyGrammar(GrammarError):
    pass


class AlreadyAugmented(GrammarError):
    pass


class NotLR1Conflict(GrammarError):
    """Two actions compete for one ACTION cell."""

    def __init__(self, state: int, lookahead, entries):
        self.state = state
        self.lookahead = lookahead
        self.entries = tuple(entries)
        shown = ", ".join(str(e) for e in self.entries)
        super().__init__(
            f"NotLR1Conflict in state {state} on {_show_terminal(lookahead)}: {shown}"
        )


class BudgetError(LRMaskError):
    """A construction budget was exhausted (CLI exit status 3)."""


class StateExplosion(BudgetError):
    pass


class DivergentReduction(BudgetError):
    pass


class OverlappingCycles(BudgetError):
    pass


class DeterminismViolation(BudgetError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(
            f"{len(self.violations)} determinism violation(s): "
            + "; ".join(str(v) for v in self.violations[:5])
        )


class EnumerationBudgetExceeded(LRMaskError):
    pass


class SteppedDeadConfig(LRMaskError):
    pass


class VocabularyError(LRMaskError):
    pass


class EmptyToken(VocabularyError):
    pass


class DuplicateToken(VocabularyError):
    pass


class CorruptAutomaton(LRMaskError):
    """Automaton file fails the magic/version/structure checks (exit 4)."""


def _show_terminal(t) -> str:
    if t == 256:
        return "$"
    if isinstance(t, int):
        ch = chr(t)
        return repr(ch) if ch.isprintable() else f"\\x{t:02x}"
    return str(t)
