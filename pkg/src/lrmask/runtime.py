"""Per-sequence execution of a DPDA and vocabulary-wide token masks.

A :class:`RuntimeConfig` is owned by one decoded sequence.  The DPDA and the
:class:`TokenTrie` are read-only after construction and can be shared by any
number of sequences (and threads).
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dpda import DPDA
from .errors import DuplicateToken, EmptyToken, SteppedDeadConfig, VocabularyError
from .grammar import END

_NO_EDGES: dict = {}

# bulk acceptance (see _free_bytes) is tried only when the stack top allows
# at least this many bytes, and gives up past this many configurations
FREE_MIN_BYTES = 16
FREE_MAX_CONFIGS = 64


class Status(str, enum.Enum):
    ALIVE = "alive"
    DEAD = "dead"
    ACCEPTED = "accepted"


@dataclass(frozen=True)
class RuntimeConfig:
    state: int
    stack: tuple[int, ...]
    status: Status = Status.ALIVE

    @property
    def alive(self) -> bool:
        return self.status is Status.ALIVE


def init_config(d: DPDA) -> RuntimeConfig:
    return RuntimeConfig(d.initial, d.initial_stack, Status.ALIVE)


def _apply(index, stack: list, t: int):
    """Take the longest-match edge for ``t`` in place; return an undo record or None."""
    cands = index.get(stack[-1], _NO_EDGES).get(t)
    if not cands:
        return None
    for L, mb, push, _ in cands:
        if L == 0:
            popped = None
            break
        if L <= len(stack) and stack[-L:] == mb:
            popped = stack[-L:]
            del stack[-L:]
            break
    else:
        return None
    stack.extend(push)
    return popped, len(push)


def _undo(stack: list, rec) -> None:
    popped, npush = rec
    if npush:
        del stack[-npush:]
    if popped:
        stack.extend(popped)


def step(d: DPDA, c: RuntimeConfig, t: int) -> RuntimeConfig:
    """Consume one terminal (a byte, or END for the end marker)."""
    if c.status is not Status.ALIVE:
        raise SteppedDeadConfig(f"cannot step a {c.status.value} configuration")
    stack = list(c.stack)
    if _apply(d.index, stack, t) is None:
        return RuntimeConfig(c.state, c.stack, Status.DEAD)
    status = Status.ACCEPTED if t == END else Status.ALIVE
    return RuntimeConfig(stack[-1], tuple(stack), status)


def advance(d: DPDA, c: RuntimeConfig, data: bytes) -> tuple[RuntimeConfig, int | None]:
    """Feed ``data`` byte by byte; return the final config and the offset of
    the first rejected byte (None if every byte was consumed)."""
    if c.status is not Status.ALIVE:
        raise SteppedDeadConfig(f"cannot step a {c.status.value} configuration")
    stack = list(c.stack)
    index = d.index
    for i, b in enumerate(data):
        if _apply(index, stack, b) is None:
            return RuntimeConfig(stack[-1], tuple(stack), Status.DEAD), i
    return RuntimeConfig(stack[-1], tuple(stack), Status.ALIVE), None


def accepts_end(d: DPDA, c: RuntimeConfig) -> bool:
    return c.alive and bool(d.index.get(c.state, _NO_EDGES).get(END)) and step(d, c, END).status is Status.ACCEPTED


def allowed_terminals(d: DPDA, c: RuntimeConfig) -> set[int]:
    """Terminals (END included) on which ``step`` does not die."""
    if not c.alive:
        return set()
    stack = list(c.stack)
    out = set()
    for t, cands in d.index.get(c.state, _NO_EDGES).items():
        # each candidate condition is tested independently of the others
        for L, mb, _, _ in cands:
            if L == 0 or (L <= len(stack) and stack[-L:] == mb):
                out.add(t)
                break
    return out


@dataclass
class RunResult:
    accepted: bool
    reject_offset: int | None
    steps: int
    max_depth: int


def run(d: DPDA, data: bytes, use_composites: bool = True) -> RunResult:
    """Recognise ``data`` followed by the end marker."""
    stack = [d.initial]
    index = d.index
    comp = d.composite_index if use_composites and d.composites else None
    i = steps = 0
    depth = 1
    n = len(data)
    while i < n:
        b = data[i]
        winner = None
        for cand in index.get(stack[-1], _NO_EDGES).get(b, ()):
            L = cand[0]
            if L == 0 or (L <= len(stack) and stack[-L:] == cand[1]):
                winner = cand
                break
        if winner is None:
            return RunResult(False, i, steps, depth)
        jump = comp.get((stack[-1], b, tuple(reversed(winner[1])))) if comp else None
        if jump is not None and data[i + 1 : i + 1 + len(jump[0])] == jump[0]:
            tail, L, push = jump
            i += 1 + len(tail)
        else:
            L, push = winner[0], winner[2]
            i += 1
        if L:
            del stack[-L:]
        stack.extend(push)
        steps += 1
        if len(stack) > depth:
            depth = len(stack)
    if _apply(index, stack, END) is None:
        return RunResult(False, n, steps, depth)
    return RunResult(True, None, steps + 1, depth)


# -- vocabulary -----------------------------------------------------------------

class TokenTrie:
    """Byte trie over a token vocabulary; node 0 is the root (empty string)."""

    def __init__(self, tokens: Sequence[bytes]):
        children: list[dict[int, int]] = [{}]
        token_at = [-1]
        for tid, tok in enumerate(tokens):
            if not tok:
                raise EmptyToken(f"token {tid} is empty")
            node = 0
            for b in tok:
                nxt = children[node].get(b)
                if nxt is None:
                    nxt = len(children)
                    children[node][b] = nxt
                    children.append({})
                    token_at.append(-1)
                node = nxt
            if token_at[node] >= 0:
                raise DuplicateToken(f"tokens {token_at[node]} and {tid} are both {tok!r}")
            token_at[node] = tid
        self.tokens = list(tokens)
        self.vocab_size = len(tokens)
        self.eos_id = len(tokens)
        self.token_at = token_at
        self.children = [tuple(sorted(c.items())) for c in children]
        self.child_maps = children
        # tokens of every subtree form the run order[lo[n]:hi[n]]; sub[n] is
        # the set of bytes on edges below n, as a bit set
        n = len(children)
        lo, hi, sub = [0] * n, [0] * n, [0] * n
        order: list[int] = []

        def visit(node):
            lo[node] = len(order)
            if token_at[node] >= 0:
                order.append(token_at[node])
            bset = 0
            for b, child in self.children[node]:
                visit(child)
                bset |= (1 << b) | sub[child]
            sub[node] = bset
            hi[node] = len(order)

        visit(0)
        self.lo, self.hi, self.sub = lo, hi, sub
        self.order = np.asarray(order, dtype=np.int64)

    @property
    def node_count(self) -> int:
        return len(self.children)


def compile_vocabulary(tokens: Iterable[bytes]) -> TokenTrie:
    return TokenTrie(list(tokens))


_ESCAPE = re.compile(rb"\\x([0-9a-fA-F]{2})|\\\\")


def decode_token(text: str) -> bytes:
    raw = text.encode("utf-8")
    return _ESCAPE.sub(lambda m: bytes([int(m.group(1), 16)]) if m.group(1) else b"\\", raw)


def encode_token(tok: bytes) -> str:
    out = []
    for b in tok:
        if b == 0x5C:
            out.append("\\\\")
        elif 0x20 <= b < 0x7F:
            out.append(chr(b))
        else:
            out.append(f"\\x{b:02x}")
    return "".join(out)


def load_vocabulary(path) -> list[bytes]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not all(isinstance(x, str) for x in data):
        raise VocabularyError("vocabulary file must hold a JSON array of strings")
    return [decode_token(x) for x in data]


def save_vocabulary(tokens: Sequence[bytes], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([encode_token(t) for t in tokens], fh, indent=0)
        fh.write("\n")


# -- masks --------------------------------------------------------------------------

class TokenMask:
    """V + 1 bits: one per token id, the last one for end-of-sequence."""

    __slots__ = ("bits",)

    def __init__(self, bits: np.ndarray):
        self.bits = bits

    @classmethod
    def empty(cls, vocab_size: int) -> "TokenMask":
        return cls(np.zeros(vocab_size + 1, dtype=bool))

    @property
    def vocab_size(self) -> int:
        return len(self.bits) - 1

    @property
    def eos(self) -> bool:
        return bool(self.bits[-1])

    def allowed(self) -> list[int]:
        return np.flatnonzero(self.bits[:-1]).tolist()

    def __contains__(self, tid: int) -> bool:
        return bool(self.bits[tid])

    def __eq__(self, other) -> bool:
        return isinstance(other, TokenMask) and np.array_equal(self.bits, other.bits)

    def __repr__(self) -> str:
        return f"TokenMask(allowed={self.allowed()[:16]}, eos={self.eos})"

    def to_hex(self) -> str:
        """Lowercase hex; least-significant bit is token 0, the top bit is EOS."""
        packed = np.packbits(self.bits, bitorder="little").tobytes()
        width = (len(self.bits) + 3) // 4
        return format(int.from_bytes(packed, "little"), "x").zfill(width)

    @classmethod
    def from_hex(cls, text: str, vocab_size: int) -> "TokenMask":
        n = vocab_size + 1
        value = int(text, 16)
        raw = value.to_bytes((n + 7) // 8, "little")
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:n]
        return cls(bits.astype(bool))


def _allowed_bytes(index, stack: list) -> int:
    out = 0
    for t, cands in index.get(stack[-1], _NO_EDGES).items():
        if t == END:
            continue
        for L, mb, _, _ in cands:
            if L == 0 or (L <= len(stack) and stack[-L:] == mb):
                out |= 1 << t
                break
    return out


def _free_bytes(index, stack: list) -> int:
    """A byte set F such that every string over F is alive from ``stack``.

    Starts from the bytes allowed at ``stack`` and explores the
    configurations reachable with F.  A configuration that refuses part of F
    removes from F the byte that led to it (or, at the start, the refused
    bytes), and the exploration restarts.  Inside a string literal this ends
    with the character class, the closing quote having been dropped.
    Returns 0 if the exploration grows past FREE_MAX_CONFIGS.
    """
    free = _allowed_bytes(index, stack)
    while free:
        seen = {tuple(stack)}
        todo = [(list(stack), None)]
        shrunk = False
        while todo:
            st, via = todo.pop()
            allowed = _allowed_bytes(index, st)
            if free & ~allowed:
                free = free & allowed if via is None else free & ~(1 << via)
                shrunk = True
                break
            for b in range(256):
                if not free >> b & 1:
                    continue
                nxt = list(st)
                _apply(index, nxt, b)
                key = tuple(nxt)
                if key not in seen:
                    if len(seen) >= FREE_MAX_CONFIGS:
                        return 0
                    seen.add(key)
                    todo.append((nxt, b))
        if not shrunk:
            return free
    return 0


def compute_mask(d: DPDA, c: RuntimeConfig, trie: TokenTrie) -> TokenMask:
    """Walk the trie depth-first, stepping the automaton once per trie edge.

    A dead step prunes the whole subtree.  Stack changes are undone on the
    way back up, so the input configuration is never modified.  When the
    start configuration has a large free byte set (see _free_bytes), a
    subtree reached through free bytes whose own bytes are all free is
    accepted in one go without stepping through it.
    """
    mask = TokenMask.empty(trie.vocab_size)
    if not c.alive:
        return mask
    bits = mask.bits
    index = d.index
    children = trie.children
    lookup = trie.child_maps
    token_at = trie.token_at
    stack = list(c.stack)
    free = 0
    if len(index.get(stack[-1], _NO_EDGES)) >= FREE_MIN_BYTES:
        free = _free_bytes(index, stack)
    sub, lo, hi, order = trie.sub, trie.lo, trie.hi, trie.order

    def walk(node: int, inside: bool) -> None:
        out = index.get(stack[-1], _NO_EDGES)
        kids = children[node]
        if len(out) < len(kids):
            # few bytes can move the automaton: probe the trie for those
            get = lookup[node].get
            pairs = [(b, get(b)) for b in sorted(out)]
        else:
            pairs = kids
        for b, child in pairs:
            if child is None:
                continue
            in_free = inside and free >> b & 1
            if in_free and not sub[child] & ~free:
                bits[order[lo[child] : hi[child]]] = True
                continue
            cands = out.get(b)
            if not cands:
                continue
            for L, mb, push, _ in cands:
                if L == 0:
                    popped = None
                    break
                if L <= len(stack) and stack[-L:] == mb:
                    popped = stack[-L:]
                    del stack[-L:]
                    break
            else:
                continue
            stack.extend(push)
            tid = token_at[child]
            if tid >= 0:
                bits[tid] = True
            if children[child]:
                walk(child, in_free)
            if push:
                del stack[-len(push):]
            if popped:
                stack.extend(popped)

    walk(0, bool(free))
    bits[-1] = _apply(index, list(c.stack), END) is not None
    return mask


def naive_mask(d: DPDA, c: RuntimeConfig, tokens: Sequence[bytes]) -> TokenMask:
    """Reference: simulate every token independently from ``c``."""
    mask = TokenMask.empty(len(tokens))
    if not c.alive:
        return mask
    index = d.index
    for tid, tok in enumerate(tokens):
        stack = list(c.stack)
        for b in tok:
            if _apply(index, stack, b) is None:
                break
        else:
            mask.bits[tid] = True
    mask.bits[-1] = _apply(index, list(c.stack), END) is not None
    return mask


def compute_masks(d: DPDA, configs: Sequence[RuntimeConfig], trie: TokenTrie) -> list[TokenMask]:
    """Masks for a batch of independent sequences sharing one DPDA and trie."""
    return [compute_mask(d, c, trie) for c in configs]
