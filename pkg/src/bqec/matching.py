"""Shortest paths and exact minimum-weight perfect matching.

The matching routine is a primal-dual Edmonds blossom algorithm
(O(n^3)) working on integer weights so that every dual update is exact.
Real weights are quantized to a relative resolution of 2^-30 first.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

QUANT_BITS = 30


@dataclass
class WeightedGraph:
    """Undirected graph with nonnegative edge weights and per-edge payload."""

    vertex_count: int
    edges: list = field(default_factory=list)
    boundary: set = field(default_factory=set)

    def __post_init__(self):
        best: dict = {}
        for e in self.edges:
            u, v, w = int(e[0]), int(e[1]), float(e[2])
            tag = e[3] if len(e) > 3 else None
            if u == v:
                raise ValueError("self-loops are not allowed")
            if not (0 <= u < self.vertex_count and 0 <= v < self.vertex_count):
                raise ValueError("edge endpoint out of range")
            if not (w >= 0 and math.isfinite(w)):
                raise ValueError("edge weights must be finite and nonnegative")
            key = (min(u, v), max(u, v))
            if key not in best or w < best[key][2]:
                best[key] = (key[0], key[1], w, tag)
        self.edges = [best[k] for k in sorted(best)]
        self.adj = [[] for _ in range(self.vertex_count)]
        for idx, (u, v, w, _) in enumerate(self.edges):
            self.adj[u].append((v, w, idx))
            self.adj[v].append((u, w, idx))
        for nbrs in self.adj:
            nbrs.sort()
        self.boundary = set(self.boundary)

    def edge_between(self, u: int, v: int) -> int:
        for x, _, idx in self.adj[u]:
            if x == v:
                return idx
        raise KeyError((u, v))


def _dijkstra_lex(graph: WeightedGraph, src: int):
    """Shortest distances from ``src`` with the lexicographically smallest
    vertex sequence among equal-length paths."""
    n = graph.vertex_count
    dist = [math.inf] * n
    path: list = [None] * n
    heap = [(0.0, (src,))]
    done = [False] * n
    while heap:
        d, p = heapq.heappop(heap)
        u = p[-1]
        if done[u]:
            continue
        done[u] = True
        dist[u] = d
        path[u] = p
        for v, w, _ in graph.adj[u]:
            if not done[v]:
                nd = d + w
                if nd <= dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, p + (v,)))
    return dist, path


def all_pairs_min_paths(graph: WeightedGraph, sources: Iterable[int]):
    """Distance and path tables between every pair drawn from ``sources``.

    Returns ``(dist, paths)`` where ``dist[s][t]`` is the shortest distance
    (inf if disconnected) and ``paths[s][t]`` the chosen vertex sequence
    (None if disconnected)."""
    sources = sorted(set(int(s) for s in sources))
    dist: dict = {}
    paths: dict = {}
    for s in sources:
        d, p = _dijkstra_lex(graph, s)
        dist[s] = {t: d[t] for t in sources}
        paths[s] = {t: p[t] for t in sources}
    return dist, paths


def single_source_paths(graph: WeightedGraph, src: int):
    return _dijkstra_lex(graph, src)


# ------------------------------------------------------------ blossom core


class _Blossom:
    """Maximum-weight matching on integer weights (Galil's formulation)."""

    def __init__(self, n: int, edges: Sequence[tuple], maxcardinality: bool):
        self.n = n
        self.edges = [(int(i), int(j), int(w)) for i, j, w in edges]
        self.maxcard = maxcardinality
        m = len(self.edges)
        self.endpoint = [self.edges[p // 2][p % 2] for p in range(2 * m)]
        self.neighbend = [[] for _ in range(n)]
        for k, (i, j, _) in enumerate(self.edges):
            self.neighbend[i].append(2 * k + 1)
            self.neighbend[j].append(2 * k)
        maxw = max((w for _, _, w in self.edges), default=0)
        self.mate = [-1] * n
        self.label = [0] * (2 * n)
        self.labelend = [-1] * (2 * n)
        self.inblossom = list(range(n))
        self.parent = [-1] * (2 * n)
        self.childs: list = [None] * (2 * n)
        self.base = list(range(n)) + [-1] * n
        self.endps: list = [None] * (2 * n)
        self.bestedge = [-1] * (2 * n)
        self.bestlist: list = [None] * (2 * n)
        self.unused = list(range(n, 2 * n))
        # vertex duals start at the largest weight, blossom duals at zero
        self.dual = [maxw] * n + [0] * n
        self.allowed = [False] * m
        self.queue: list = []

    def slack(self, k):
        i, j, w = self.edges[k]
        return self.dual[i] + self.dual[j] - 2 * w

    def leaves(self, b):
        if b < self.n:
            yield b
            return
        for c in self.childs[b]:
            yield from self.leaves(c)

    def assign_label(self, w, t, p):
        b = self.inblossom[w]
        self.label[w] = self.label[b] = t
        self.labelend[w] = self.labelend[b] = p
        self.bestedge[w] = self.bestedge[b] = -1
        if t == 1:
            self.queue.extend(self.leaves(b))
        else:
            base = self.base[b]
            self.assign_label(self.endpoint[self.mate[base]], 1, self.mate[base] ^ 1)

    def scan_blossom(self, v, w):
        path = []
        base = -1
        while v != -1 or w != -1:
            b = self.inblossom[v]
            if self.label[b] & 4:
                base = self.base[b]
                break
            path.append(b)
            self.label[b] = 5
            if self.labelend[b] == -1:
                v = -1
            else:
                v = self.endpoint[self.labelend[b]]
                b = self.inblossom[v]
                v = self.endpoint[self.labelend[b]]
            if w != -1:
                v, w = w, v
        for b in path:
            self.label[b] = 1
        return base

    def add_blossom(self, base, k):
        v, w, _ = self.edges[k]
        bb = self.inblossom[base]
        bv = self.inblossom[v]
        bw = self.inblossom[w]
        b = self.unused.pop()
        self.base[b] = base
        self.parent[b] = -1
        self.parent[bb] = b
        path, endps = [], []
        while bv != bb:
            self.parent[bv] = b
            path.append(bv)
            endps.append(self.labelend[bv])
            v = self.endpoint[self.labelend[bv]]
            bv = self.inblossom[v]
        path.append(bb)
        path.reverse()
        endps.reverse()
        endps.append(2 * k)
        while bw != bb:
            self.parent[bw] = b
            path.append(bw)
            endps.append(self.labelend[bw] ^ 1)
            w = self.endpoint[self.labelend[bw]]
            bw = self.inblossom[w]
        self.childs[b] = path
        self.endps[b] = endps
        self.label[b] = 1
        self.labelend[b] = self.labelend[bb]
        self.dual[b] = 0
        for x in self.leaves(b):
            if self.label[self.inblossom[x]] == 2:
                self.queue.append(x)
            self.inblossom[x] = b
        best_to = [-1] * (2 * self.n)
        for sub in path:
            if self.bestlist[sub] is None:
                lists = [[p // 2 for p in self.neighbend[x]] for x in self.leaves(sub)]
            else:
                lists = [self.bestlist[sub]]
            for lst in lists:
                for kk in lst:
                    i, j, _ = self.edges[kk]
                    if self.inblossom[j] == b:
                        i, j = j, i
                    bj = self.inblossom[j]
                    if bj != b and self.label[bj] == 1 and (
                        best_to[bj] == -1 or self.slack(kk) < self.slack(best_to[bj])
                    ):
                        best_to[bj] = kk
            self.bestlist[sub] = None
            self.bestedge[sub] = -1
        self.bestlist[b] = [kk for kk in best_to if kk != -1]
        self.bestedge[b] = -1
        for kk in self.bestlist[b]:
            if self.bestedge[b] == -1 or self.slack(kk) < self.slack(self.bestedge[b]):
                self.bestedge[b] = kk

    def expand_blossom(self, b, endstage):
        for s in self.childs[b]:
            self.parent[s] = -1
            if s < self.n:
                self.inblossom[s] = s
            elif endstage and self.dual[s] == 0:
                self.expand_blossom(s, endstage)
            else:
                for x in self.leaves(s):
                    self.inblossom[x] = s
        if not endstage and self.label[b] == 2:
            childs, endps = self.childs[b], self.endps[b]
            entry = self.inblossom[self.endpoint[self.labelend[b] ^ 1]]
            j = childs.index(entry)
            if j & 1:
                j -= len(childs)
                jstep, trick = 1, 0
            else:
                jstep, trick = -1, 1
            p = self.labelend[b]
            while j != 0:
                self.label[self.endpoint[p ^ 1]] = 0
                self.label[self.endpoint[endps[j - trick] ^ trick ^ 1]] = 0
                self.assign_label(self.endpoint[p ^ 1], 2, p)
                self.allowed[endps[j - trick] // 2] = True
                j += jstep
                p = endps[j - trick] ^ trick
                self.allowed[p // 2] = True
                j += jstep
            bv = childs[j]
            self.label[self.endpoint[p ^ 1]] = self.label[bv] = 2
            self.labelend[self.endpoint[p ^ 1]] = self.labelend[bv] = p
            self.bestedge[bv] = -1
            j += jstep
            while childs[j] != entry:
                bv = childs[j]
                if self.label[bv] == 1:
                    j += jstep
                    continue
                hit = None
                for x in self.leaves(bv):
                    if self.label[x] != 0:
                        hit = x
                        break
                if hit is not None:
                    self.label[hit] = 0
                    self.label[self.endpoint[self.mate[self.base[bv]]]] = 0
                    self.assign_label(hit, 2, self.labelend[hit])
                j += jstep
        self.label[b] = self.labelend[b] = -1
        self.childs[b] = self.endps[b] = None
        self.base[b] = -1
        self.bestlist[b] = None
        self.bestedge[b] = -1
        self.unused.append(b)

    def augment_blossom(self, b, v):
        t = v
        while self.parent[t] != b:
            t = self.parent[t]
        if t >= self.n:
            self.augment_blossom(t, v)
        childs, endps = self.childs[b], self.endps[b]
        i = j = childs.index(t)
        if i & 1:
            j -= len(childs)
            jstep, trick = 1, 0
        else:
            jstep, trick = -1, 1
        while j != 0:
            j += jstep
            t = childs[j]
            p = endps[j - trick] ^ trick
            if t >= self.n:
                self.augment_blossom(t, self.endpoint[p])
            j += jstep
            t = childs[j]
            if t >= self.n:
                self.augment_blossom(t, self.endpoint[p ^ 1])
            self.mate[self.endpoint[p]] = p ^ 1
            self.mate[self.endpoint[p ^ 1]] = p
        self.childs[b] = childs[i:] + childs[:i]
        self.endps[b] = endps[i:] + endps[:i]
        self.base[b] = self.base[self.childs[b][0]]

    def augment_matching(self, k):
        v, w, _ = self.edges[k]
        for s, p in ((v, 2 * k + 1), (w, 2 * k)):
            while True:
                bs = self.inblossom[s]
                if bs >= self.n:
                    self.augment_blossom(bs, s)
                self.mate[s] = p
                if self.labelend[bs] == -1:
                    break
                t = self.endpoint[self.labelend[bs]]
                bt = self.inblossom[t]
                s = self.endpoint[self.labelend[bt]]
                j = self.endpoint[self.labelend[bt] ^ 1]
                if bt >= self.n:
                    self.augment_blossom(bt, j)
                self.mate[j] = self.labelend[bt]
                p = self.labelend[bt] ^ 1

    def _search(self):
        """Grow alternating trees until an augmentation or dual exhaustion."""
        n = self.n
        while True:
            while self.queue:
                v = self.queue.pop()
                for p in self.neighbend[v]:
                    k = p // 2
                    w = self.endpoint[p]
                    if self.inblossom[v] == self.inblossom[w]:
                        continue
                    kslack = None
                    if not self.allowed[k]:
                        kslack = self.slack(k)
                        if kslack <= 0:
                            self.allowed[k] = True
                    if self.allowed[k]:
                        lw = self.label[self.inblossom[w]]
                        if lw == 0:
                            self.assign_label(w, 2, p ^ 1)
                        elif lw == 1:
                            base = self.scan_blossom(v, w)
                            if base >= 0:
                                self.add_blossom(base, k)
                            else:
                                self.augment_matching(k)
                                return True
                        elif self.label[w] == 0:
                            self.label[w] = 2
                            self.labelend[w] = p ^ 1
                    elif self.label[self.inblossom[w]] == 1:
                        b = self.inblossom[v]
                        if self.bestedge[b] == -1 or kslack < self.slack(self.bestedge[b]):
                            self.bestedge[b] = k
                    elif self.label[w] == 0:
                        if self.bestedge[w] == -1 or kslack < self.slack(self.bestedge[w]):
                            self.bestedge[w] = k
            # dual adjustment
            dtype, delta, dedge, dblossom = -1, None, -1, -1
            if not self.maxcard:
                dtype, delta = 1, min(self.dual[:n])
            for v in range(n):
                if self.label[self.inblossom[v]] == 0 and self.bestedge[v] != -1:
                    d = self.slack(self.bestedge[v])
                    if dtype == -1 or d < delta:
                        dtype, delta, dedge = 2, d, self.bestedge[v]
            for b in range(2 * n):
                if self.parent[b] == -1 and self.label[b] == 1 and self.bestedge[b] != -1:
                    d = self.slack(self.bestedge[b]) // 2
                    if dtype == -1 or d < delta:
                        dtype, delta, dedge = 3, d, self.bestedge[b]
            for b in range(n, 2 * n):
                if (
                    self.base[b] >= 0
                    and self.parent[b] == -1
                    and self.label[b] == 2
                    and (dtype == -1 or self.dual[b] < delta)
                ):
                    dtype, delta, dblossom = 4, self.dual[b], b
            if dtype == -1:
                dtype, delta = 1, max(0, min(self.dual[:n]))
            for v in range(n):
                lb = self.label[self.inblossom[v]]
                if lb == 1:
                    self.dual[v] -= delta
                elif lb == 2:
                    self.dual[v] += delta
            for b in range(n, 2 * n):
                if self.base[b] >= 0 and self.parent[b] == -1:
                    if self.label[b] == 1:
                        self.dual[b] += delta
                    elif self.label[b] == 2:
                        self.dual[b] -= delta
            if dtype == 1:
                return False
            if dtype == 2:
                self.allowed[dedge] = True
                i, j, _ = self.edges[dedge]
                if self.label[self.inblossom[i]] == 0:
                    i, j = j, i
                self.queue.append(i)
            elif dtype == 3:
                self.allowed[dedge] = True
                i, j, _ = self.edges[dedge]
                self.queue.append(i)
            else:
                self.expand_blossom(dblossom, False)

    def solve(self):
        n = self.n
        if not self.edges:
            return [-1] * n
        for _ in range(n):
            self.label = [0] * (2 * n)
            self.bestedge = [-1] * (2 * n)
            for b in range(n, 2 * n):
                self.bestlist[b] = None
            self.allowed = [False] * len(self.edges)
            self.queue = []
            for v in range(n):
                if self.mate[v] == -1 and self.label[self.inblossom[v]] == 0:
                    self.assign_label(v, 1, -1)
            if not self._search():
                break
            for b in range(n, 2 * n):
                if self.parent[b] == -1 and self.base[b] >= 0 and self.label[b] == 1 and self.dual[b] == 0:
                    self.expand_blossom(b, True)
        return [self.endpoint[p] if p >= 0 else -1 for p in self.mate]


def max_weight_matching_int(n: int, edges: Sequence[tuple], maxcardinality: bool = False) -> list:
    """Mate array of a maximum-weight matching for integer edge weights.

    Weights are doubled internally so all dual variables remain integers."""
    doubled = [(i, j, 2 * int(w)) for i, j, w in edges]
    return _Blossom(n, doubled, maxcardinality).solve()


@dataclass(frozen=True)
class Matching:
    pairs: frozenset
    total_weight: float


def _quantize(weights: np.ndarray) -> np.ndarray:
    top = float(np.max(weights)) if weights.size else 0.0
    if top <= 0:
        return np.zeros(weights.shape, dtype=object)
    scale = 2.0**QUANT_BITS / top
    return np.vectorize(lambda x: int(round(x * scale)), otypes=[object])(weights)


def min_weight_perfect_matching(weights) -> Matching:
    """Exact minimum-weight perfect matching of a complete graph.

    ``weights`` is a symmetric (n x n) array with n even; infinite entries
    mark missing edges."""
    W = np.asarray(weights, dtype=float)
    n = W.shape[0]
    if W.shape != (n, n):
        raise ValueError("weights must be a square matrix")
    if n % 2:
        raise ValueError("perfect matching needs an even vertex count")
    if n == 0:
        return Matching(frozenset(), 0.0)
    iu, ju = np.triu_indices(n, 1)
    finite = np.isfinite(W[iu, ju])
    iu, ju = iu[finite], ju[finite]
    w = W[iu, ju]
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    q = _quantize(w)
    top = max(q.tolist(), default=0) + 1
    edges = [(int(i), int(j), top - int(x)) for i, j, x in zip(iu, ju, q)]
    mate = max_weight_matching_int(n, edges, maxcardinality=True)
    if any(m == -1 for m in mate):
        raise ValueError("graph has no perfect matching")
    pairs = frozenset((v, mate[v]) for v in range(n) if v < mate[v])
    return Matching(pairs, float(sum(W[i, j] for i, j in pairs)))


def decode_with_boundary(graph: WeightedGraph, highlighted: Sequence[int], boundary_vertex: int):
    """Match highlighted vertices to each other or to the boundary.

    Every highlighted vertex gets a private boundary clone joined to it by its
    boundary distance; clones are mutually joined at zero cost.  Returns the
    list of matched vertex pairs (boundary matches use ``boundary_vertex``)
    and the multiset of graph edge indices on the correction paths."""
    hl = sorted(set(int(v) for v in highlighted) - {boundary_vertex})
    m = len(hl)
    if m == 0:
        return [], []
    srcs = hl + [boundary_vertex]
    dist, paths = all_pairs_min_paths(graph, srcs)
    W = np.full((2 * m, 2 * m), np.inf)
    for a in range(m):
        for b in range(a + 1, m):
            W[a, b] = W[b, a] = dist[hl[a]][hl[b]]
        W[a, m + a] = W[m + a, a] = dist[hl[a]][boundary_vertex]
        for b in range(m):
            if a != b:
                W[m + a, m + b] = 0.0
    mt = min_weight_perfect_matching(W)
    pairs, used = [], []
    for a, b in sorted(mt.pairs):
        if a >= m:
            continue
        if b >= m:
            u, v = hl[a], boundary_vertex
        else:
            u, v = hl[a], hl[b]
        pairs.append((u, v))
        seq = paths[u][v]
        for x, y in zip(seq[:-1], seq[1:]):
            used.append(graph.edge_between(x, y))
    return pairs, used
