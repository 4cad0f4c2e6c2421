"""Shared test utilities: independent oracles and a retry policy.

Stochastic checks follow the suite-wide policy: run with a fixed seed, and
on failure retry exactly once with a seed derived from the first. A test
that fails both attempts fails outright. Deterministic checks never retry.
"""

from __future__ import annotations

import itertools
import random

from graphlb import derive_seed, load_edge_list
from graphlb.graphs import Graph


def retry_once(body, seed: int, label: str = "retry"):
    """Run body(seed); on AssertionError run once more with a derived seed."""
    try:
        return body(seed)
    except AssertionError:
        return body(derive_seed(seed, label))


def random_small_graph(rng: random.Random, n_max: int = 12) -> Graph:
    """Arbitrary undirected graph on 4..n_max vertices, any density."""
    n = rng.randint(4, n_max)
    p = rng.uniform(0.05, 0.7)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if rng.random() < p]
    text = f"{n} {len(edges)}\n" + "".join(f"{i} {j}\n" for i, j in edges)
    return load_edge_list(text)


def closed_neighborhoods(g: Graph) -> list[set[int]]:
    return [{v, *map(int, g.neighbors(v))} for v in range(g.n)]


def oracle_com(g: Graph, subset) -> int:
    nbh = closed_neighborhoods(g)
    covered: set[int] = set()
    for v in subset:
        covered |= nbh[v]
    return g.n - len(covered)


def oracle_dis_all_sizes(g: Graph, k: int) -> int:
    """Max of com over every subset of size >= k, by direct enumeration."""
    nbh = closed_neighborhoods(g)
    best = 0
    for size in range(k, g.n + 1):
        for subset in itertools.combinations(range(g.n), size):
            covered: set[int] = set()
            for v in subset:
                covered |= nbh[v]
            best = max(best, g.n - len(covered))
    return best


def oracle_dis_size_k(g: Graph, k: int) -> tuple[int, tuple[int, ...]]:
    """Max of com over size-k subsets with the lex-first maximizing witness."""
    nbh = closed_neighborhoods(g)
    best, best_witness = -1, None
    for subset in itertools.combinations(range(g.n), k):
        covered: set[int] = set()
        for v in subset:
            covered |= nbh[v]
        val = g.n - len(covered)
        if val > best:
            best, best_witness = val, subset
    return best, best_witness
