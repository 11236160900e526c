"""Exhaustive checks on tiny fields and hash instances, runnable from the CLI."""

from __future__ import annotations

import itertools
from collections import Counter

import numpy as np

from .gf2 import FieldSpec
from .hashes import HashParams, SeedPair, hash_h_prime
from .mac import mac_tag, mac_verify
from .source import JointSpec, avg_min_entropy, product_table


def field_axioms(m: int) -> bool:
    f = FieldSpec.default(m)
    els = range(1 << m)
    for a, b in itertools.product(els, repeat=2):
        if f.mul(a, b) != f.mul(b, a) or f.mul(a, 0) != 0:
            return False
    for a, b, c in itertools.product(els, repeat=3):
        if f.mul(f.mul(a, b), c) != f.mul(a, f.mul(b, c)):
            return False
        if f.mul(a, b ^ c) != f.mul(a, b) ^ f.mul(a, c):
            return False
    return all(any(f.mul(a, b) == 1 for b in els) for a in els if a)


def extractor_strongly_universal(n: int = 4, l: int = 2) -> bool:
    """Every distinct nonzero pair hits every output pair on exactly |S'|/2^2l seeds."""
    hp = HashParams(n, n // 2, l)
    seeds = [SeedPair(a, b, 1, 0) for a in range(1 << n) for b in range(1 << n)]
    want = len(seeds) >> (2 * l)
    for x1, x2 in itertools.permutations(range(1, 1 << n), 2):
        counts = Counter((hash_h_prime(x1, s, hp), hash_h_prime(x2, s, hp)) for s in seeds)
        if len(counts) != 1 << (2 * l) or set(counts.values()) != {want}:
            return False
    return True


def mac_correct(n: int) -> bool:
    for t in range(0, n // 2 + 1):
        hp = HashParams(n, t, 0)
        for s2pp, s1pp, s2, s1 in itertools.product(
            range(1 << n), range(1 << n), range(1, 1 << (n - t), 2), range(1 << t)
        ):
            msg = SeedPair(s2pp, s1pp, s2, s1)
            for x in range(1 << n):
                if not mac_verify(x, msg, mac_tag(x, msg, hp), hp):
                    return False
    return True


def product_min_entropy(n: int = 3, specs: int = 10, seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    for _ in range(specs):
        spec = JointSpec(rng.dirichlet(np.ones(8)).reshape(2, 2, 2))
        pxz = product_table(spec.pmf.sum(axis=1), n)
        brute = -np.log2(pxz.max(axis=0).sum())
        if abs(brute - n * avg_min_entropy(spec)) > 1e-9:
            return False
    return True


def run_all() -> list[tuple[str, bool]]:
    return [
        ("field axioms GF(2^3)", field_axioms(3)),
        ("field axioms GF(2^4)", field_axioms(4)),
        ("extractor strong universality n=4 l=2", extractor_strongly_universal()),
        ("MAC correctness n=4 (all t)", mac_correct(4)),
        ("product rule for average min-entropy n<=3", product_min_entropy()),
    ]

