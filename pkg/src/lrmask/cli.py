"""Command-line entry point.

Exit status: 0 ok, 1 input rejected, 2 grammar error, 3 budget or
validation failure, 4 corrupt automaton or vocabulary file, 64 usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .dpda import DPDA, mask_terminals, validate_determinism
from .errors import (
    BudgetError,
    CorruptAutomaton,
    DeterminismViolation,
    GrammarError,
    VocabularyError,
)
from .grammar import symbol_name
from .pipeline import compile_grammar
from .runtime import TokenTrie, advance, compute_mask, decode_token, init_config, load_vocabulary, run
from .serialize import load, save

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_GRAMMAR = 2
EXIT_BUDGET = 3
EXIT_CORRUPT = 4
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_automaton(path) -> DPDA:
    try:
        return load(path)
    except OSError as exc:
        raise CorruptAutomaton(f"cannot read {path}: {exc.strerror}") from None


def _load_vocab(path) -> list[bytes]:
    try:
        return load_vocabulary(path)
    except OSError as exc:
        raise VocabularyError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise VocabularyError(f"{path} is not valid JSON: {exc}") from None


def cmd_compile(args) -> int:
    try:
        text = Path(args.grammar).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {args.grammar}: {exc.strerror}") from None
    t0 = time.perf_counter()
    compiled, d = compile_grammar(
        text,
        aggregate=not args.no_aggregate,
        merge=not args.no_merge,
        conservative_cycles=args.conservative_cycles,
        budget=args.budget,
    )
    bad = validate_determinism(d, compiled.graph)
    if bad:
        raise DeterminismViolation(bad)
    elapsed = time.perf_counter() - t0
    out = args.output or str(Path(args.grammar).with_suffix(".dpda"))
    save(d, out)
    print(
        f"{out}: {d.num_states} states, {d.edge_count} edges, "
        f"{sum(len(v) for v in d.composites.values())} composite edges, "
        f"{len(d.cycles)} cycles, {elapsed:.2f}s"
    )
    return EXIT_OK


def cmd_check(args) -> int:
    d = _load_automaton(args.automaton)
    data = decode_token(args.input)
    r = run(d, data)
    if r.accepted:
        print("accept")
        return EXIT_OK
    print(f"reject at offset {r.reject_offset}")
    return EXIT_REJECT


def cmd_mask(args) -> int:
    d = _load_automaton(args.automaton)
    trie = TokenTrie(_load_vocab(args.vocab))
    c, bad = advance(d, init_config(d), decode_token(args.prefix))
    if bad is not None:
        print(f"dead prefix at offset {bad}")
        return EXIT_REJECT
    print(compute_mask(d, c, trie).to_hex())
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import format_report, run_benchmark, synthetic_vocabulary

    batches = args.batch or [1, 64]
    if any(b < 1 for b in batches) or args.steps < 1:
        raise UsageError("batch sizes and --steps must be positive")
    d = _load_automaton(args.automaton)
    if args.vocab:
        tokens = _load_vocab(args.vocab)
    else:
        tokens = synthetic_vocabulary(d, args.vocab_size, args.seed)
    results = [
        run_benchmark(d, tokens, b, args.steps, args.seed, naive=not args.no_naive)
        for b in batches
    ]
    print(format_report(results))
    return EXIT_OK


def _dot_label(e) -> str:
    ts = mask_terminals(e.accepted)
    shown = " ".join(symbol_name(t) for t in ts[:6]) + (" ..." if len(ts) > 6 else "")
    shown = shown.replace("\\", "\\\\").replace('"', '\\"')
    return f"{{{shown}}} pop {list(e.match_pop)} push {list(e.push)}"


def to_dot(d: DPDA) -> str:
    lines = ["digraph dpda {", "  rankdir=LR;", '  node [shape=circle];']
    for s in range(d.num_states):
        shape = "doublecircle" if s == d.accept_state else "circle"
        lines.append(f'  {s} [label="{s}", shape={shape}];')
    for e in d.all_edges():
        style = ', style=dashed' if e.origin != "acceptance" else ""
        lines.append(f'  {e.source} -> {e.target} [label="{_dot_label(e)}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_export_dot(args) -> int:
    d = _load_automaton(args.automaton)
    Path(args.out).write_text(to_dot(d), encoding="utf-8")
    print(f"{args.out}: {d.num_states} nodes, {d.edge_count} edges")
    return EXIT_OK


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lrmask", description="LR(1) grammars to deterministic pushdown automata and token masks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("compile", help="compile a grammar file into an automaton file")
    c.add_argument("grammar")
    c.add_argument("-o", "--output", help="automaton file (default: grammar name with .dpda)")
    c.add_argument("--no-aggregate", action="store_true", help="skip edge aggregation")
    c.add_argument("--no-merge", action="store_true", help="skip composite edges")
    c.add_argument("--conservative-cycles", action="store_true",
                   help="collapse every candidate cycle (may change the language)")
    c.add_argument("--budget", type=_int, default=None, help="reduction-chain work budget")
    c.set_defaults(func=cmd_compile)

    k = sub.add_parser("check", help="run an input through an automaton")
    k.add_argument("automaton")
    k.add_argument("input", help=r"input text; \xNN escapes allowed")
    k.set_defaults(func=cmd_check)

    m = sub.add_parser("mask", help="print the token mask after a prefix as hex")
    m.add_argument("automaton")
    m.add_argument("vocab", help="JSON array of token strings")
    m.add_argument("prefix", nargs="?", default="")
    m.set_defaults(func=cmd_mask)

    b = sub.add_parser("bench", help="time trie and per-token mask computation")
    b.add_argument("automaton")
    b.add_argument("vocab", nargs="?", help="vocabulary file (default: synthetic)")
    b.add_argument("--batch", type=_int, action="append", help="batch size (repeatable; default 1 and 64)")
    b.add_argument("--steps", type=_int, default=64)
    b.add_argument("--seed", type=_int, default=0)
    b.add_argument("--vocab-size", type=_int, default=32000)
    b.add_argument("--no-naive", action="store_true", help="time only the trie path")
    b.set_defaults(func=cmd_bench)

    x = sub.add_parser("export-dot", help="write the automaton as a Graphviz graph")
    x.add_argument("automaton")
    x.add_argument("out")
    x.set_defaults(func=cmd_export_dot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GrammarError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GRAMMAR
    except BudgetError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (CorruptAutomaton, VocabularyError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CORRUPT


if __name__ == "__main__":
    sys.exit(main())
