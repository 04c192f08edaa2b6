"""Acceptance criteria, one test each.

Every test records a single ``criterion N: PASS|FAIL ...`` line that is
printed in the terminal summary together with the measured numbers.
"""

import itertools
import random
import subprocess
import sys
import time

import pytest

from lrmask.bench import loglog_slope, random_walk, run_benchmark, synthetic_vocabulary
from lrmask.dpda import applicable_edges, build_dpda, generate_reduction_edges, validate_determinism
from lrmask.errors import DivergentReduction
from lrmask.fixtures import fixture_path
from lrmask.grammar import END
from lrmask.oracle import oracle_parse, random_sentence
from lrmask.runtime import TokenTrie, advance, compute_mask, init_config, naive_mask, run

from conftest import ACCEPTANCE, FIXTURE_NAMES, compiled_fixture, fixture_dpda

VARIANTS = [(True, True), (False, True), (True, False), (False, False)]


def record(n, ok, detail):
    ACCEPTANCE.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def variant_name(agg, merge):
    return f"aggregate={'on' if agg else 'off'} merge={'on' if merge else 'off'}"


# -- checks shared by criteria 1-3 and 6 ------------------------------------------

def exhaustive_mismatches(name, agg, merge, max_len=8):
    c = compiled_fixture(name)
    d = fixture_dpda(name, agg, merge)
    alphabet = sorted(c.grammar.terminals)
    checked = bad = 0
    for n in range(max_len + 1):
        for tup in itertools.product(alphabet, repeat=n):
            s = bytes(tup)
            got, want = run(d, s), oracle_parse(c.tables, s)
            checked += 1
            bad += got.accepted != want.accepted
    return checked, bad


def mutate(rng, s, alphabet):
    s = bytearray(s)
    for _ in range(rng.randint(1, 3)):
        op = rng.randrange(3)
        pos = rng.randint(0, len(s))
        b = rng.choice(alphabet) if rng.random() < 0.8 else rng.randrange(256)
        if op == 0:
            s.insert(pos, b)
        elif op == 1 and s:
            del s[min(pos, len(s) - 1)]
        elif s:
            s[min(pos, len(s) - 1)] = b
    return bytes(s)


def random_bytes(rng, alphabet):
    # mostly grammar bytes, so that rejections happen past offset 0 too
    return bytes(
        rng.choice(alphabet) if rng.random() < 0.9 else rng.randrange(256)
        for _ in range(rng.randint(0, 24))
    )


def sampled_mismatches(name, agg, merge, n=10_000, seed=0):
    c = compiled_fixture(name)
    d = fixture_dpda(name, agg, merge)
    rng = random.Random(seed)
    alphabet = sorted(c.grammar.terminals)
    verdict = offset = rejected = 0
    for i in range(n):
        if i % 2 == 0:
            s = mutate(rng, random_sentence(c.grammar, rng, max_depth=6), alphabet)
        else:
            s = random_bytes(rng, alphabet)
        got, want = run(d, s), oracle_parse(c.tables, s)
        if got.accepted != want.accepted:
            verdict += 1
        elif not got.accepted:
            rejected += 1
            offset += got.reject_offset != want.reject_position
    return verdict, offset, rejected


def random_vocabulary(rng, alphabet, size=1000):
    toks = set()
    while len(toks) < size:
        toks.add(bytes(
            rng.choice(alphabet) if rng.random() < 0.85 else rng.randrange(256)
            for _ in range(rng.randint(1, 5))
        ))
    return sorted(toks)


def mask_mismatches(name, agg, merge, n=200, seed=0):
    c = compiled_fixture(name)
    d = fixture_dpda(name, agg, merge)
    rng = random.Random(seed)
    tokens = random_vocabulary(rng, sorted(c.grammar.terminals))
    trie = TokenTrie(tokens)
    bad = 0
    for _ in range(n):
        cfg, dead = advance(d, init_config(d), random_walk(d, rng, rng.randint(0, 40)))
        assert dead is None and cfg.alive
        bad += compute_mask(d, cfg, trie) != naive_mask(d, cfg, tokens)
    return bad


# -- criteria -------------------------------------------------------------------

def test_criterion_1_exhaustive_oracle_equivalence():
    t0 = time.perf_counter()
    parts = []
    ok = True
    for name in ["G_PAREN", "G_LIST_L"]:
        checked, bad = exhaustive_mismatches(name, True, True)
        parts.append(f"{name} {checked} strings {bad} mismatches")
        ok &= bad == 0
    record(1, ok, "; ".join(parts) + f" ({time.perf_counter() - t0:.1f}s)")


def test_criterion_2_sampled_oracle_equivalence():
    t0 = time.perf_counter()
    parts = []
    ok = True
    for name in ["G_EXPR", "G_LIST_R", "G_JSON"]:
        verdict, offset, rejected = sampled_mismatches(name, True, True)
        parts.append(f"{name} verdict {verdict} offset {offset} mismatches ({rejected} rejections)")
        ok &= verdict == 0 and offset == 0
    record(2, ok, "; ".join(parts) + f" ({time.perf_counter() - t0:.1f}s)")


def test_criterion_3_mask_correctness():
    bad = {name: mask_mismatches(name, True, True) for name in FIXTURE_NAMES}
    record(3, not any(bad.values()), f"200 configs x {len(bad)} grammars, mismatching masks {bad}")


def test_criterion_4_determinism():
    violations = {}
    for name in FIXTURE_NAMES:
        for agg, merge in VARIANTS:
            violations[name, agg, merge] = len(validate_determinism(fixture_dpda(name, agg, merge), compiled_fixture(name).graph))
    rng = random.Random(4)
    probes = worst = 0
    per = 10_000 // len(FIXTURE_NAMES) + 1
    for name in FIXTURE_NAMES:
        d = fixture_dpda(name, True, True)
        symbols = sorted(compiled_fixture(name).grammar.terminals) + [END, 0xFF]
        for _ in range(per):
            cfg, _ = advance(d, init_config(d), random_walk(d, rng, rng.randint(0, 40)))
            hits = applicable_edges(d, cfg.stack, rng.choice(symbols))
            if hits:
                longest = max(len(e.match_pop) for e in hits)
                worst = max(worst, sum(len(e.match_pop) == longest for e in hits))
            probes += 1
    total = sum(violations.values())
    record(4, total == 0 and worst <= 1 and probes >= 10_000,
           f"{total} static violations over {len(violations)} automata; "
           f"{probes} probes, max applicable edges after arbitration {worst}")


def test_criterion_5_cycle_handling():
    built = {}
    for name in ["G_LIST_R", "G_LIST_L"]:
        d = build_dpda(compiled_fixture(name))
        built[name] = d.edge_count
    try:
        generate_reduction_edges(compiled_fixture("G_LIST_R"), cycles=())
        naive = "terminated"
    except DivergentReduction:
        naive = "diverged (budget exceeded)"
    depths = {}
    for agg, merge in VARIANTS:
        d = fixture_dpda("G_LIST_R", agg, merge)
        r4, r64 = run(d, b"x" * 4), run(d, b"x" * 64)
        assert r4.accepted and r64.accepted
        depths[agg, merge] = (r4.max_depth, r64.max_depth)
    ok = all(a == b for a, b in depths.values())
    record(5, ok, f"edges {built}; naive merge on G_LIST_R {naive}; "
                  f"max depth x^4 vs x^64 {sorted(set(depths.values()))}")


def test_criterion_6_optimization_soundness():
    parts = []
    ok = True
    for agg, merge in VARIANTS[1:]:
        e = sum(exhaustive_mismatches(n, agg, merge)[1] for n in ["G_PAREN", "G_LIST_L"])
        s = sum(sum(sampled_mismatches(n, agg, merge)[:2]) for n in ["G_EXPR", "G_LIST_R", "G_JSON"])
        m = sum(mask_mismatches(n, agg, merge) for n in FIXTURE_NAMES)
        parts.append(f"[{variant_name(agg, merge)}] {e}/{s}/{m}")
        ok &= e == s == m == 0
    before = fixture_dpda("G_DIGITS").edge_count
    after = fixture_dpda("G_DIGITS", True, False).edge_count
    ok &= after < before
    record(6, ok, "mismatches (exhaustive/sampled/mask) " + " ".join(parts)
                  + f"; G_DIGITS edges {before} -> {after}")


def test_criterion_7_preprocessing_time(tmp_path):
    out = tmp_path / "json.dpda"
    t0 = time.perf_counter()
    r = subprocess.run(
        [sys.executable, "-m", "lrmask.cli", "compile", str(fixture_path("G_JSON")), "-o", str(out)],
        capture_output=True, text=True,
    )
    elapsed = time.perf_counter() - t0
    assert r.returncode == 0, r.stderr
    record(7, elapsed < 10, f"compile G_JSON {elapsed:.2f}s wall ({r.stdout.strip()})")


@pytest.fixture(scope="module")
def json_vocabularies():
    d = fixture_dpda("G_JSON", True, True)
    return d, {n: synthetic_vocabulary(d, n, seed=0) for n in (8000, 16000, 32000)}


def test_criterion_8_performance(json_vocabularies):
    d, vocabs = json_vocabularies
    v32 = vocabs[32000]
    lines = []
    ok = True
    for batch, steps in [(1, 64), (64, 4)]:
        r = run_benchmark(d, v32, batch, steps, seed=0)
        t, n = r.trie.summary()["mean_ms"], r.naive.summary()["mean_ms"]
        lines.append(f"batch {batch}: trie {t:.2f} ms, naive {n:.2f} ms per step")
        ok &= t <= n
    means = []
    for size, tokens in vocabs.items():
        runs = [run_benchmark(d, tokens, 1, 128, seed=0, naive=False) for _ in range(5)]
        means.append(min(r.trie.summary()["mean_ms"] for r in runs))
    slope = loglog_slope(list(vocabs), means)
    ok &= slope < 1
    lines.append("trie ms at 8k/16k/32k " + "/".join(f"{m:.2f}" for m in means) + f", log-log slope {slope:.2f}")
    record(8, ok, "; ".join(lines))
