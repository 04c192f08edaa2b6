"""CPU microbenchmark of per-step mask computation: trie walk vs per-token simulation."""

from __future__ import annotations

import random
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .dpda import DPDA
from .grammar import END
from .runtime import (
    RuntimeConfig,
    TokenTrie,
    advance,
    compute_mask,
    init_config,
    naive_mask,
    step,
)


def _moves(d: DPDA, stack) -> list[list[int]]:
    """Allowed terminals grouped by the edge that would take them."""
    groups: dict[tuple, list[int]] = {}
    for t, cands in sorted(d.index.get(stack[-1], {}).items()):
        for L, mb, push, _ in cands:
            if L == 0 or (L <= len(stack) and list(stack[-L:]) == mb):
                groups.setdefault((L, tuple(mb), push), []).append(t)
                break
    return list(groups.values())


def random_walk(d: DPDA, rng: random.Random, length: int, min_length: int = 0) -> bytes:
    """A viable prefix of up to ``length`` bytes (a sentence if the walk
    picks the end marker, which it does not before ``min_length`` bytes).

    Each step first picks one of the applicable edges uniformly, so a class
    like "any digit" counts as one choice and the walk does not get stuck
    inside long numbers or strings.  The byte within the class follows a
    Zipf law over byte order, which gives text a skewed, word-like
    distribution instead of uniform noise.
    """
    c = init_config(d)
    out = bytearray()
    while len(out) < length:
        groups = _moves(d, c.stack)
        if len(out) < min_length:
            groups = [g for g in groups if g != [END]]
        if not groups:
            break
        group = rng.choice(groups)
        b = rng.choices(group, weights=[1 / (i + 1) for i in range(len(group))])[0]
        if b == END:
            break
        c = step(d, c, b)
        out.append(b)
    return bytes(out)


_SYLLABLES = [
    c + v for c in ["", "b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "th", "st", "w"]
    for v in ["a", "e", "i", "o", "u", "ou", "ea", "er", "in", "on", "an", "ing"]
]
_PUNCT = [",", ".", ";", ":", "!", "?", "(", ")", "'", "\n", " -", "\n\n"]


def _lexicon(rng: random.Random, n: int) -> list[str]:
    words = set()
    while len(words) < n:
        words.add("".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(1, 4))))
    return sorted(words)


def _prose(rng: random.Random, lexicon: list[str], weights: list[float], n_words: int) -> bytes:
    out = []
    cap = True
    for _ in range(n_words):
        w = rng.choices(lexicon, weights)[0]
        out.append(" " + (w.capitalize() if cap else w))
        cap = False
        r = rng.random()
        if r < 0.12:
            p = rng.choice(_PUNCT)
            out.append(p)
            cap = p in (".", "!", "?", "\n\n")
        elif r < 0.15:
            out.append(" " + str(rng.randint(0, 2000)))
    return "".join(out).encode("utf-8")


def synthetic_vocabulary(
    d: DPDA, size: int, seed: int = 0, max_token_len: int = 8, grammar_share: float = 0.3
) -> list[bytes]:
    """BPE-flavoured vocabulary: all 256 single bytes, then the most frequent
    substrings of a random corpus.

    Like the vocabulary of a general-purpose language model, the corpus is
    mostly prose (pseudo-words with a Zipfian frequency, capitals,
    punctuation, numbers) with a ``grammar_share`` of text from the
    automaton's own language.  The result depends only on the automaton,
    ``size`` and ``seed``.
    """
    rng = random.Random(seed)
    lexicon = _lexicon(rng, 4000)
    weights = [1 / (i + 1) for i in range(len(lexicon))]
    counts: Counter = Counter()
    target = max(20_000, size * 12)
    done = {"grammar": 0, "prose": 0}
    while sum(done.values()) < target:
        if done["grammar"] < grammar_share * target:
            text = random_walk(d, rng, 96)
            done["grammar"] += max(1, len(text))
        else:
            text = _prose(rng, lexicon, weights, 40)
            done["prose"] += len(text)
        for n in range(2, max_token_len + 1):
            for i in range(len(text) - n + 1):
                counts[text[i : i + n]] += 1
    tokens = [bytes([b]) for b in range(256)]
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    tokens += [tok for tok, _ in ranked[: max(0, size - 256)]]
    while len(tokens) < size:
        # corpus too small for the requested size: pad with random byte strings
        tok = bytes(rng.randrange(256) for _ in range(rng.randint(2, max_token_len)))
        if tok not in counts:
            counts[tok] = 0
            tokens.append(tok)
    return tokens[:size]


@dataclass
class Timing:
    samples: list[float] = field(default_factory=list)

    def add(self, seconds: float) -> None:
        self.samples.append(seconds)

    def summary(self) -> dict:
        a = np.asarray(self.samples) * 1e3
        return {
            "mean_ms": float(a.mean()),
            "p50_ms": float(np.percentile(a, 50)),
            "p99_ms": float(np.percentile(a, 99)),
        }


@dataclass
class BenchResult:
    batch: int
    steps: int
    vocab_size: int
    trie: Timing
    naive: Timing | None
    prefixes: list[bytes]


def run_benchmark(
    d: DPDA,
    tokens: list[bytes],
    batch: int,
    steps: int,
    seed: int = 0,
    naive: bool = True,
) -> BenchResult:
    """Decode ``batch`` sequences for ``steps`` steps, timing the mask of the
    whole batch at every step.

    Each sequence follows a random sentence drawn with the seeded generator
    and advances by 1-4 bytes per step; a finished sentence is replaced by a
    fresh one.  The configurations visited therefore depend on the seed
    only, not on the vocabulary, so runs over different vocabularies time
    the same work.
    """
    if batch < 1 or steps < 1:
        raise ValueError("batch and steps must be positive")
    rng = random.Random(seed)
    trie = TokenTrie(tokens)
    texts = [random_walk(d, rng, 256, 48) for _ in range(batch)]
    pos = [0] * batch
    configs: list[RuntimeConfig] = [init_config(d) for _ in range(batch)]
    seen: list[bytes] = []
    t_trie, t_naive = Timing(), Timing() if naive else None
    for _ in range(steps):
        t0 = time.perf_counter()
        for c in configs:
            compute_mask(d, c, trie)
        t_trie.add(time.perf_counter() - t0)
        if naive:
            t0 = time.perf_counter()
            for c in configs:
                naive_mask(d, c, tokens)
            t_naive.add(time.perf_counter() - t0)
        for i in range(batch):
            if pos[i] >= len(texts[i]):
                texts[i] = random_walk(d, rng, 256, 48)
                pos[i] = 0
                configs[i] = init_config(d)
                continue
            n = rng.randint(1, 4)
            chunk = texts[i][pos[i] : pos[i] + n]
            configs[i], bad = advance(d, configs[i], chunk)
            assert bad is None
            pos[i] += len(chunk)
        seen.extend(t[:p] for t, p in zip(texts, pos))
    return BenchResult(batch, steps, len(tokens), t_trie, t_naive, seen)


def format_report(results: list[BenchResult]) -> str:
    lines = [
        f"{'batch':>6} {'vocab':>7} {'steps':>6}  {'trie mean':>10} {'p50':>9} {'p99':>9}"
        f"  {'naive mean':>10} {'p50':>9} {'p99':>9}  (ms per step)"
    ]
    for r in results:
        t = r.trie.summary()
        row = f"{r.batch:>6} {r.vocab_size:>7} {r.steps:>6}  {t['mean_ms']:>10.3f} {t['p50_ms']:>9.3f} {t['p99_ms']:>9.3f}"
        if r.naive is not None:
            n = r.naive.summary()
            row += f"  {n['mean_ms']:>10.3f} {n['p50_ms']:>9.3f} {n['p99_ms']:>9.3f}"
        lines.append(row)
    return "\n".join(lines)


def loglog_slope(sizes, latencies) -> float:
    """Least-squares exponent k of latency ~ size**k."""
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.asarray(latencies, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
