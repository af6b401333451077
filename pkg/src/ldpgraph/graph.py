"""Graph representation, ingestion, sampling, projection and exact counts.

The ground-truth graph is stored in CSR form (``indptr``/``indices``) with
every neighbor list sorted. Counting functions here are exact and serve as
the truth column of experiments.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .mech import Stream, RandomSource

INT128_MAX = (1 << 127) - 1


class EdgeListParseError(ValueError):
    def __init__(self, path, lineno: int, line: str):
        super().__init__(f"{path}:{lineno}: malformed edge line {line!r}")
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class NeighborList:
    """Row ``owner`` of the adjacency matrix, as sorted neighbor indices."""

    owner: int
    n: int
    bits: np.ndarray

    def __post_init__(self):
        b = np.unique(np.asarray(self.bits, dtype=np.int64))
        object.__setattr__(self, "bits", b)
        if b.size and (b[0] < 0 or b[-1] >= self.n):
            raise ValueError("neighbor index out of range")
        if np.any(b == self.owner):
            raise ValueError("neighbor list contains its owner")

    @classmethod
    def _trusted(cls, owner: int, n: int, bits: np.ndarray) -> "NeighborList":
        # rows handed out by Graph already satisfy the invariants
        obj = object.__new__(cls)
        object.__setattr__(obj, "owner", owner)
        object.__setattr__(obj, "n", n)
        object.__setattr__(obj, "bits", bits)
        return obj

    @property
    def degree(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NeighborList):
            return NotImplemented
        return (self.owner, self.n) == (other.owner, other.n) and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash((self.owner, self.n, self.bits.tobytes()))

    def to_dense(self) -> np.ndarray:
        row = np.zeros(self.n, dtype=np.uint8)
        row[self.bits] = 1
        return row

    @classmethod
    def from_dense(cls, owner: int, row: Sequence[int]) -> "NeighborList":
        row = np.asarray(row)
        return cls(owner, row.size, np.flatnonzero(row).astype(np.int64))


@dataclass(frozen=True)
class SubgraphClassCounts:
    """Numbers of node triples spanning 3, 2, 1 and 0 edges."""

    m3: int
    m2: int
    m1: int
    m0: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.m3, self.m2, self.m1, self.m0)


class Graph:
    """Immutable undirected simple graph on nodes ``0..n-1``."""

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray):
        self.n = int(n)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        """Build from an ``(m, 2)`` array of node pairs.

        Self-loops are dropped, duplicates and reversed duplicates merged.
        """
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValueError("edge endpoint out of range")
        e = e[e[:, 0] != e[:, 1]]
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        keys = np.unique(lo * n + hi)
        lo, hi = np.divmod(keys, max(n, 1))
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(n, indptr, dst)

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n, np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        i, j = np.triu_indices(n, 1)
        return cls.from_edges(n, np.column_stack([i, j]))

    @property
    def edge_count(self) -> int:
        return int(self.indices.size // 2)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def adjacency(self) -> list[np.ndarray]:
        return [self.neighbors(i) for i in range(self.n)]

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def neighbor_list(self, i: int) -> NeighborList:
        return NeighborList._trusted(i, self.n, self.neighbors(i))

    def edges(self) -> np.ndarray:
        """Edges as an ``(m, 2)`` array with ``u < v``, sorted."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        mask = src < self.indices
        return np.column_stack([src[mask], self.indices[mask]])

    @cached_property
    def _edge_keys(self) -> np.ndarray:
        e = self.edges()
        return e[:, 0] * self.n + e[:, 1]

    def has_edges(self, u, v) -> np.ndarray:
        """Vectorized membership test for node pairs ``(u[m], v[m])``."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        keys = np.minimum(u, v) * self.n + np.maximum(u, v)
        ek = self._edge_keys
        if ek.size == 0:
            return np.zeros(keys.shape, dtype=bool)
        pos = np.searchsorted(ek, keys)
        pos = np.minimum(pos, ek.size - 1)
        return (ek[pos] == keys) & (u != v)

    def to_sparse(self) -> sp.csr_matrix:
        data = np.ones(self.indices.size, dtype=np.int64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edge_count={self.edge_count})"


@dataclass(frozen=True)
class LoadSummary:
    lines: int
    edges_read: int
    self_loops: int
    duplicates: int
    n: int
    edge_count: int

    @property
    def avg_degree(self) -> float:
        """Mean number of neighbors, 2|E|/n."""
        return 2 * self.edge_count / self.n if self.n else 0.0

    @property
    def edges_per_node(self) -> float:
        """|E|/n, the convention some dataset descriptions call average degree."""
        return self.edge_count / self.n if self.n else 0.0


_HEADER = re.compile(r"#\s*n=(\d+)\b")


def read_edge_list(path) -> tuple[Graph, LoadSummary]:
    """Parse a whitespace-separated edge list and report what was dropped.

    Node ids are remapped to ``0..n-1`` in order of first appearance. A node
    that only appears in a self-loop line still becomes an (isolated) node.
    A leading ``# n=N`` header (as written by :func:`write_edge_list`)
    declares nodes ``0..N-1`` up front, so isolated nodes and the original
    numbering survive a write/read roundtrip.
    """
    ids: dict[str, int] = {}
    src: list[int] = []
    dst: list[int] = []
    lines = loops = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                m = _HEADER.match(line)
                if m and not ids and lines == 0:
                    ids = {str(i): i for i in range(int(m.group(1)))}
                continue
            lines += 1
            parts = line.split()
            if len(parts) != 2:
                raise EdgeListParseError(path, lineno, line)
            try:
                u, v = (str(int(p)) for p in parts)
            except ValueError:
                raise EdgeListParseError(path, lineno, line) from None
            a = ids.setdefault(u, len(ids))
            b = ids.setdefault(v, len(ids))
            if a == b:
                loops += 1
                continue
            src.append(a)
            dst.append(b)
    n = len(ids)
    g = Graph.from_edges(n, np.column_stack([src, dst]) if src else np.zeros((0, 2)))
    summary = LoadSummary(
        lines=lines,
        edges_read=len(src),
        self_loops=loops,
        duplicates=len(src) - g.edge_count,
        n=n,
        edge_count=g.edge_count,
    )
    return g, summary


def load_edge_list(path) -> Graph:
    return read_edge_list(path)[0]


def write_edge_list(g: Graph, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={g.n} edges={g.edge_count}\n")
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")


def _pair_from_index(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # t enumerates pairs (i, j), j < i, row by row: t = i(i-1)/2 + j
    i = np.floor((1 + np.sqrt(1 + 8 * t.astype(np.float64))) / 2).astype(np.int64)
    # float sqrt can be off by one for large t
    i -= (i * (i - 1) // 2) > t
    i += ((i + 1) * i // 2) <= t
    j = t - i * (i - 1) // 2
    return i, j


def generate_er(n: int, alpha: float, seed: int) -> Graph:
    """Erdős–Rényi graph: every pair is an edge independently w.p. ``alpha``.

    Draws the edge count from Binomial(C(n,2), alpha) and then a uniform set of
    that many distinct pairs, which has the same law as independent coin flips
    but costs O(edges) instead of O(n^2).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    rng = np.random.default_rng(seed)
    pairs = n * (n - 1) // 2
    m = int(rng.binomial(pairs, alpha)) if pairs else 0
    if m == 0:
        return Graph.empty(n)
    t = rng.choice(pairs, size=m, replace=False)
    i, j = _pair_from_index(np.asarray(t, dtype=np.int64))
    return Graph.from_edges(n, np.column_stack([i, j]))


def induced_subgraph(g: Graph, nodes: Sequence[int]) -> Graph:
    """Subgraph induced by ``nodes``; node ``nodes[r]`` becomes ``r``."""
    nodes = np.asarray(nodes, dtype=np.int64)
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[nodes] = np.arange(nodes.size)
    e = g.edges()
    a, b = remap[e[:, 0]], remap[e[:, 1]]
    keep = (a >= 0) & (b >= 0)
    return Graph.from_edges(nodes.size, np.column_stack([a[keep], b[keep]]))


def sample_induced(g: Graph, n_sub: int, seed: int) -> Graph:
    """Uniformly sample ``n_sub`` distinct nodes and return their induced graph."""
    if n_sub > g.n or n_sub < 0:
        raise ValueError(f"cannot sample {n_sub} nodes from a graph with {g.n}")
    rng = np.random.default_rng(seed)
    nodes = rng.choice(g.n, size=n_sub, replace=False)
    return induced_subgraph(g, nodes)


def project_by_order(a: NeighborList, d_tilde: int, order: Sequence[int]) -> NeighborList:
    """Keep the first ``d_tilde`` neighbors of ``a`` met while walking ``order``."""
    if a.degree <= d_tilde:
        return a
    rank = np.empty(a.n, dtype=np.int64)
    rank[np.asarray(order)] = np.arange(a.n)
    kept = a.bits[np.argsort(rank[a.bits], kind="stable")[:d_tilde]]
    return NeighborList._trusted(a.owner, a.n, np.sort(kept))


def project(a: NeighborList, d_tilde: int, seed: int | Stream) -> NeighborList:
    """Graph projection: truncate ``a`` to at most ``d_tilde`` random neighbors.

    The permutation of all nodes is realized by giving every node ``j`` the
    priority ``stream.uniform_at(j)`` and ordering by priority; only the
    priorities of actual neighbors need to be computed.
    """
    if d_tilde < 0:
        raise ValueError(f"d_tilde must be non-negative, got {d_tilde}")
    if a.degree <= d_tilde:
        return a
    stream = seed if isinstance(seed, Stream) else RandomSource(seed).stream(0, "project", a.owner)
    prio = stream.uniforms_at(a.bits)
    kept = a.bits[np.argsort(prio, kind="stable")[:d_tilde]]
    return NeighborList._trusted(a.owner, a.n, np.sort(kept))


def project_graph(g: Graph, d_tilde: int, seed: int) -> Graph:
    """Symmetric degree-bounded projection by random edge insertion.

    Edges are visited in a random order and kept while both endpoints are
    still below ``d_tilde``. A graph whose max degree is already within the
    cap is returned unchanged.
    """
    if d_tilde < 0:
        raise ValueError(f"d_tilde must be non-negative, got {d_tilde}")
    if max_degree(g) <= d_tilde:
        return g
    e = g.edges()
    e = e[np.random.default_rng(seed).permutation(len(e))]
    deg = np.zeros(g.n, dtype=np.int64)
    keep = np.zeros(len(e), dtype=bool)
    for r, (u, v) in enumerate(e.tolist()):
        if deg[u] < d_tilde and deg[v] < d_tilde:
            deg[u] += 1
            deg[v] += 1
            keep[r] = True
    return Graph.from_edges(g.n, e[keep])


def count_triangles(g: Graph) -> int:
    """Exact triangle count.

    Sparse product of the strictly upper-triangular adjacency with itself,
    masked by the same matrix: each triangle ``i<j<k`` is hit once. The cost
    is the sum over nodes of (lower degree x upper degree), within O(sum d^2).
    """
    if g.edge_count == 0:
        return 0
    upper = sp.triu(g.to_sparse(), k=1, format="csr")
    paths = upper @ upper
    return int(paths.multiply(upper).sum())


def kstar_count(degrees: Iterable[int], k: int) -> int:
    """Sum of C(d, k) over ``degrees``, exact; raises past the int128 range."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    vals, counts = np.unique(np.fromiter(degrees, dtype=np.int64), return_counts=True)
    total = 0
    for d, c in zip(vals.tolist(), counts.tolist()):
        total += c * math.comb(d, k)
        if total > INT128_MAX:
            raise OverflowError(f"{k}-star count exceeds the 128-bit accumulator")
    return total


def count_kstars(g: Graph, k: int) -> int:
    return kstar_count(g.degrees, k)


def clustering_coefficient(triangles: float, two_stars: float) -> float:
    """3 * triangles / two_stars clamped to [0, 1]; 0 when two_stars <= 0."""
    if not two_stars > 0:
        return 0.0
    cc = 3.0 * float(triangles) / float(two_stars)
    if math.isnan(cc):
        return 0.0
    return min(1.0, max(0.0, cc))


def subgraph_classes(n: int, degrees, edge_count: int, triangles: int) -> SubgraphClassCounts:
    """Triple classes from triangles, degrees and edges via counting identities."""
    m3 = int(triangles)
    m2 = kstar_count(degrees, 2) - 3 * m3
    m1 = int(edge_count) * (n - 2) - 2 * m2 - 3 * m3 if n >= 2 else 0
    m0 = math.comb(n, 3) - m3 - m2 - m1
    return SubgraphClassCounts(m3, m2, m1, m0)


def count_subgraph_classes(g: Graph) -> SubgraphClassCounts:
    return subgraph_classes(g.n, g.degrees, g.edge_count, count_triangles(g))


def max_degree(g: Graph) -> int:
    return int(g.degrees.max()) if g.n else 0
