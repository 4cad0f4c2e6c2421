"""Graph families for topology-constrained load balancing.

All graphs are simple and undirected, with 0-based contiguous vertex ids and
adjacency stored in CSR form (``indptr``/``indices``) with each neighbor list
sorted ascending.  Generators are pure functions of their parameters and seed.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import graph_rng

__all__ = [
    "Graph",
    "gen_clique",
    "gen_erdos_renyi",
    "gen_erased_regular",
    "gen_rgg_torus",
    "gen_complete_bipartite",
    "gen_ring",
    "gen_toric_grid",
    "gen_isolated",
    "closed_neighborhood",
    "load_edge_list",
    "save_edge_list",
    "rgg_radius",
    "validate_graph",
    "bipartite_part_size",
]

# SeedSequence tags, one per seeded family
_TAG_ERDOS_RENYI = 1
_TAG_ERASED_REGULAR = 2
_TAG_RGG = 3


@dataclass
class Graph:
    """Simple undirected graph in CSR form."""

    n: int
    indptr: np.ndarray  # int64, length n+1
    indices: np.ndarray  # int32, sorted within each vertex slice
    label: str = ""

    @property
    def n_vertices(self) -> int:
        return self.n

    @property
    def m_edges(self) -> int:
        return self.indices.size // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    @property
    def adjacency(self) -> list[np.ndarray]:
        return [self.neighbors(v) for v in range(self.n)]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def degree_min(self) -> int:
        return int(self.degrees.min()) if self.n else 0

    def is_clique(self) -> bool:
        return self.m_edges == self.n * (self.n - 1) // 2

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.n).tobytes())
        h.update(np.ascontiguousarray(self.indptr, np.int64).tobytes())
        h.update(np.ascontiguousarray(self.indices, np.int32).tobytes())
        return h.hexdigest()

    def edge_array(self) -> np.ndarray:
        """(m, 2) int array of edges with u < v, sorted lexicographically."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        keep = src < self.indices
        return np.column_stack([src[keep], self.indices[keep].astype(np.int64)])


def _from_half_edges(n: int, src: np.ndarray, dst: np.ndarray, label: str) -> Graph:
    """Build CSR from one array of directed half-edges per direction.

    ``src``/``dst`` hold each undirected edge once with src < dst, src sorted
    ascending and dst ascending within equal src; both directions are emitted
    and a stable counting argsort yields sorted neighbor lists.
    """
    vtx = np.concatenate([dst, src])
    nbr = np.concatenate([src, dst])
    order = np.argsort(vtx, kind="stable")
    indices = nbr[order].astype(np.int32, copy=False)
    counts = np.bincount(vtx, minlength=n)
    indptr = np.zeros(n + 1, np.int64)
    np.cumsum(counts, out=indptr[1:])
    return Graph(n, indptr, indices, label)


def _from_edge_set(n: int, edges: np.ndarray, label: str) -> Graph:
    """Build from an (m, 2) array of unordered edges, deduplicated, u != v."""
    if edges.size == 0:
        return Graph(n, np.zeros(n + 1, np.int64), np.empty(0, np.int32), label)
    lo = np.minimum(edges[:, 0], edges[:, 1]).astype(np.int64)
    hi = np.maximum(edges[:, 0], edges[:, 1]).astype(np.int64)
    key = lo * n + hi
    key = np.unique(key)
    return _from_half_edges(n, key // n, key % n, label)


def gen_clique(n: int) -> Graph:
    """Complete graph on n vertices."""
    if n < 1:
        raise ValueError("clique needs n >= 1")
    if n == 1:
        return Graph(1, np.zeros(2, np.int64), np.empty(0, np.int32), "clique(n=1)")
    indptr = np.arange(n + 1, dtype=np.int64) * (n - 1)
    indices = np.empty(n * (n - 1), np.int32)
    base = np.arange(n, dtype=np.int32)
    for v in range(n):
        indices[indptr[v]:indptr[v] + v] = base[:v]
        indices[indptr[v] + v:indptr[v + 1]] = base[v + 1:]
    return Graph(n, indptr, indices, f"clique(n={n})")


def gen_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """Each unordered pair present independently with probability p."""
    if n < 1:
        raise ValueError("need n >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("need 0 <= p <= 1")
    label = f"erdos_renyi(n={n},p={p:g},seed={seed})"
    if p == 1.0:
        g = gen_clique(n)
        g.label = label
        return g
    rng = graph_rng(seed, _TAG_ERDOS_RENYI)
    rows: list[np.ndarray] = []
    lens = np.zeros(n, np.int64)
    if p > 0.0:
        for u in range(n - 1):
            m = n - 1 - u
            hit = np.flatnonzero(rng.random(m) < p)
            if hit.size:
                vs = (hit + (u + 1)).astype(np.int64)
                rows.append(vs)
                lens[u] = vs.size
    if not rows:
        return Graph(n, np.zeros(n + 1, np.int64), np.empty(0, np.int32), label)
    dst = np.concatenate(rows)
    src = np.repeat(np.arange(n, dtype=np.int64), lens)
    return _from_half_edges(n, src, dst, label)


def gen_erased_regular(n: int, d: int, seed: int) -> Graph:
    """Uniform half-edge pairing with self-loops and multi-edges erased.

    Each vertex gets d half-edges; half-edges are processed in vertex-major
    order, each unpaired one being matched to a uniformly random remaining
    half-edge.  Degrees are therefore at most d.
    """
    if n < 1 or d < 0 or d >= n:
        raise ValueError("need n >= 1 and 0 <= d < n")
    if (n * d) % 2 != 0:
        raise ValueError("n * d must be even")
    label = f"erased_regular(n={n},d={d},seed={seed})"
    if d == 0:
        return Graph(n, np.zeros(n + 1, np.int64), np.empty(0, np.int32), label)
    rng = graph_rng(seed, _TAG_ERASED_REGULAR)
    nh = n * d
    partner = np.full(nh, -1, np.int64)
    remaining = np.arange(nh, dtype=np.int64)
    where = np.arange(nh, dtype=np.int64)
    count = nh

    def _remove(h: int) -> None:
        nonlocal count
        pos = where[h]
        last = remaining[count - 1]
        remaining[pos] = last
        where[last] = pos
        count -= 1

    for i in range(nh):
        if partner[i] >= 0:
            continue
        _remove(i)
        j = remaining[int(rng.integers(count))]
        _remove(j)
        partner[i] = j
        partner[j] = i
    he = np.arange(nh, dtype=np.int64)
    mask = he < partner
    u = he[mask] // d
    v = partner[he[mask]] // d
    keep = u != v
    edges = np.column_stack([u[keep], v[keep]])
    return _from_edge_set(n, edges, label)


def rgg_radius(n: int, c: float) -> float:
    """Connection radius giving target average degree c on the unit torus."""
    return math.sqrt(c / (math.pi * n))


def gen_rgg_torus(n: int, radius: float, seed: int) -> Graph:
    """Random geometric graph on the unit torus.

    Vertices are uniform points in [0,1)^2; an edge joins pairs whose torus
    distance (minimum over the nine periodic shifts) is below ``radius``.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if not 0.0 <= radius <= 0.5:
        raise ValueError("need 0 <= radius <= 0.5")
    rng = graph_rng(seed, _TAG_RGG)
    pos = rng.random((n, 2))
    label = f"rgg_torus(n={n},r={radius:g},seed={seed})"
    g = rgg_from_positions(pos, radius)
    g.label = label
    return g


def rgg_from_positions(pos: np.ndarray, radius: float) -> Graph:
    """Geometric graph from explicit positions, nine-shift torus metric."""
    n = pos.shape[0]
    r2 = radius * radius
    shifts = [(sx, sy) for sx in (-1.0, 0.0, 1.0) for sy in (-1.0, 0.0, 1.0)]
    rows_u: list[np.ndarray] = []
    rows_v: list[np.ndarray] = []
    block = 512
    for s in range(0, n, block):
        e = min(s + block, n)
        dx = pos[s:e, 0][:, None] - pos[None, :, 0]
        dy = pos[s:e, 1][:, None] - pos[None, :, 1]
        best = np.full(dx.shape, np.inf)
        for sx, sy in shifts:
            d2 = (dx + sx) ** 2 + (dy + sy) ** 2
            np.minimum(best, d2, out=best)
        ui, vi = np.nonzero(best < r2)
        ui = ui + s
        keep = ui < vi
        rows_u.append(ui[keep])
        rows_v.append(vi[keep])
    u = np.concatenate(rows_u)
    v = np.concatenate(rows_v)
    return _from_half_edges(n, u.astype(np.int64), v.astype(np.int64),
                            f"rgg_positions(n={n},r={radius:g})")


def bipartite_part_size(n: int, c: float) -> int:
    """Size of part A in the complete bipartite family."""
    return math.ceil(c * n - 1e-9)


def gen_complete_bipartite(n: int, c: float) -> Graph:
    """Complete bipartite graph; part A is the first ceil(c*n) vertex ids."""
    if not 0.0 < c < 1.0:
        raise ValueError("need 0 < c < 1")
    na = bipartite_part_size(n, c)
    if na < 1 or na >= n:
        raise ValueError("degenerate part sizes")
    nb = n - na
    a = np.repeat(np.arange(na, dtype=np.int64), nb)
    b = np.tile(np.arange(na, n, dtype=np.int64), na)
    return _from_half_edges(n, a, b, f"complete_bipartite(n={n},c={c:g},nA={na})")


def gen_ring(n: int) -> Graph:
    """Cycle on n >= 3 vertices; all degrees 2."""
    if n < 3:
        raise ValueError("ring needs n >= 3")
    u = np.arange(n, dtype=np.int64)
    v = (u + 1) % n
    return _from_edge_set(n, np.column_stack([u, v]), f"ring(n={n})")


def gen_toric_grid(w: int, h: int) -> Graph:
    """w x h grid with periodic boundary; all degrees 4, 2wh edges."""
    if w < 3 or h < 3:
        raise ValueError("toric grid needs w, h >= 3")
    ids = np.arange(w * h, dtype=np.int64).reshape(h, w)
    right = np.column_stack([ids.ravel(), np.roll(ids, -1, axis=1).ravel()])
    down = np.column_stack([ids.ravel(), np.roll(ids, -1, axis=0).ravel()])
    return _from_edge_set(w * h, np.vstack([right, down]), f"toric_grid(w={w},h={h})")


def gen_isolated(n: int) -> Graph:
    """n vertices, no edges."""
    if n < 1:
        raise ValueError("need n >= 1")
    return Graph(n, np.zeros(n + 1, np.int64), np.empty(0, np.int32), f"isolated(n={n})")


def closed_neighborhood(g: Graph, v: int) -> np.ndarray:
    """Sorted array {v} union neighbors(v)."""
    if not 0 <= v < g.n:
        raise ValueError(f"vertex {v} out of range")
    return np.sort(np.append(g.neighbors(v), np.int32(v)))


def save_edge_list(g: Graph) -> str:
    """Canonical text form: header "N M" then one "u v" line per edge."""
    lines = [f"{g.n} {g.m_edges}"]
    for u, v in g.edge_array():
        lines.append(f"{u} {v}")
    return "\n".join(lines) + "\n"


def load_edge_list(text: str) -> Graph:
    """Parse the edge-list format; applies symmetric closure, rejects junk."""
    lines = [ln for ln in (s.strip() for s in text.splitlines()) if ln]
    if not lines:
        raise ValueError("empty edge list")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"malformed header: {lines[0]!r}")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError as exc:
        raise ValueError(f"malformed header: {lines[0]!r}") from exc
    if n < 1 or m < 0:
        raise ValueError("header out of range")
    if len(lines) - 1 != m:
        raise ValueError(f"expected {m} edge lines, found {len(lines) - 1}")
    seen: set[tuple[int, int]] = set()
    eu = np.empty(m, np.int64)
    ev = np.empty(m, np.int64)
    for i, ln in enumerate(lines[1:]):
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"malformed edge line: {ln!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"malformed edge line: {ln!r}") from exc
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"vertex id out of range: {ln!r}")
        if u == v:
            raise ValueError(f"self-loop: {ln!r}")
        key = (u, v) if u < v else (v, u)
        if key in seen:
            raise ValueError(f"duplicate edge: {ln!r}")
        seen.add(key)
        eu[i], ev[i] = key
    g = _from_edge_set(n, np.column_stack([eu, ev]), f"edge_list(n={n},m={m})")
    return g


def validate_graph(g: Graph) -> None:
    """Raise ValueError when the CSR invariants do not hold."""
    def check(ok: bool, msg: str) -> None:
        if not ok:
            raise ValueError(f"invalid graph: {msg}")

    check(g.indptr.shape == (g.n + 1,), "indptr length")
    check(g.indptr[0] == 0 and g.indptr[-1] == g.indices.size, "indptr ends")
    check(bool(np.all(np.diff(g.indptr) >= 0)), "indptr not monotone")
    if g.indices.size:
        check(int(g.indices.min()) >= 0 and int(g.indices.max()) < g.n,
              "neighbor id out of range")
    edge_keys = set()
    for v in range(g.n):
        nb = g.neighbors(v)
        check(bool(np.all(np.diff(nb) > 0)),
              f"unsorted or duplicate neighbors at {v}")
        check(v not in nb, f"self-loop at {v}")
        for u in nb:
            edge_keys.add((min(v, int(u)), max(v, int(u))))
    # symmetry: every edge counted exactly twice
    check(2 * len(edge_keys) == g.indices.size, "asymmetric adjacency")
