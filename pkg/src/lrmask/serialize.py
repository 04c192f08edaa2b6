"""On-disk form of a compiled automaton.

The file starts with the 8-byte line ``LRMDPDA\\n`` followed by one JSON
document.  Keys are sorted and separators fixed, so the same automaton
always serializes to the same bytes.
"""

from __future__ import annotations

import json

from .dpda import ORIGINS, DPDA, CompositeEdge, Edge, group_edges
from .errors import CorruptAutomaton

MAGIC = b"LRMDPDA\n"
FORMAT_VERSION = 1


def _hex(mask: int) -> str:
    return format(mask, "x")


def to_dict(d: DPDA) -> dict:
    return {
        "version": FORMAT_VERSION,
        "grammar_hash": d.grammar_hash,
        "num_states": d.num_states,
        "initial": d.initial,
        "accept_state": d.accept_state,
        "flags": dict(sorted(d.flags.items())),
        "cycles": [list(c) for c in d.cycles],
        "edges": [
            [e.source, e.target, _hex(e.accepted), list(e.match_pop), list(e.push), e.origin]
            for e in d.all_edges()
        ],
        "composites": [
            [c.source, c.target, _hex(c.first), list(c.via), c.tail.hex(), list(c.match_pop), list(c.push)]
            for s in sorted(d.composites)
            for c in d.composites[s]
        ],
        "default_reductions": [
            [s, k, sorted([e, t] for e, t in gotos.items())]
            for s, (k, gotos) in sorted(d.default_reductions.items())
        ],
    }


def dumps(d: DPDA) -> bytes:
    body = json.dumps(to_dict(d), sort_keys=True, separators=(",", ":"))
    return MAGIC + body.encode("ascii") + b"\n"


def _ints(x, n_states, what):
    if not isinstance(x, list) or not all(isinstance(v, int) and 0 <= v < n_states for v in x):
        raise CorruptAutomaton(f"bad state list in {what}")
    return tuple(x)


def loads(data: bytes) -> DPDA:
    if not data.startswith(MAGIC):
        raise CorruptAutomaton("missing magic header")
    try:
        doc = json.loads(data[len(MAGIC):].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptAutomaton(f"unreadable body: {exc}") from None
    if not isinstance(doc, dict):
        raise CorruptAutomaton("body is not an object")
    if doc.get("version") != FORMAT_VERSION:
        raise CorruptAutomaton(f"unsupported format version {doc.get('version')!r}")
    try:
        n = doc["num_states"]
        if not isinstance(n, int) or n <= 0:
            raise CorruptAutomaton("bad state count")
        (initial, accept) = _ints([doc["initial"], doc["accept_state"]], n, "header")
        edges = []
        for src, tgt, acc, m, p, origin in doc["edges"]:
            src, tgt = _ints([src, tgt], n, "edge")
            if origin not in ORIGINS:
                raise CorruptAutomaton(f"unknown edge origin {origin!r}")
            mask = int(acc, 16)
            if mask <= 0 or mask >> 257:
                raise CorruptAutomaton("accepted set out of range")
            edges.append(Edge(src, tgt, mask, _ints(m, n, "edge"), _ints(p, n, "edge"), origin))
        comps: dict[int, list] = {}
        for src, tgt, first, via, tail, m, p in doc["composites"]:
            src, tgt = _ints([src, tgt], n, "composite")
            comps.setdefault(src, []).append(
                CompositeEdge(src, tgt, int(first, 16), _ints(via, n, "composite"),
                              bytes.fromhex(tail), _ints(m, n, "composite"), _ints(p, n, "composite"))
            )
        defaults = {}
        for s, k, gotos in doc["default_reductions"]:
            defaults[s] = (k, {e: t for e, t in gotos})
        cycles = tuple(_ints(c, n, "cycle") for c in doc["cycles"])
        flags = doc["flags"]
        digest = doc["grammar_hash"]
    except CorruptAutomaton:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptAutomaton(f"malformed automaton: {exc!r}") from None
    return DPDA(
        num_states=n,
        initial=initial,
        accept_state=accept,
        edges=group_edges(edges),
        cycles=cycles,
        composites={s: tuple(v) for s, v in sorted(comps.items())},
        default_reductions=defaults,
        flags=flags,
        grammar_hash=digest,
    )


def save(d: DPDA, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(d))


def load(path) -> DPDA:
    with open(path, "rb") as fh:
        return loads(fh.read())
