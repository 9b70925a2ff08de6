"""Topology generators, graph metrics, and spanning-tree helpers.

All generators return connected undirected graphs with nodes 0..n-1 and
neighbor lists sorted ascending. The sorted order is load-bearing:
breadth-first traversals and round-robin neighbor schedules both derive
their determinism from it.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass

FAMILIES = ("line", "ring", "grid", "binary_tree", "complete", "barbell", "gnp")

# all-pairs BFS is exact but quadratic; beyond this size fall back to
# per-family closed forms
EXACT_METRICS_MAX_N = 5000


class Topology:
    """Undirected graph: node count, sorted adjacency, family tag."""

    __slots__ = ("n", "neighbors", "family")

    def __init__(self, n: int, edges, family: str = "custom"):
        self.n = n
        self.family = family
        adj = [[] for _ in range(n)]
        seen = set()
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of range for n={n}")
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise ValueError(f"duplicate edge ({u},{v})")
            seen.add(key)
            adj[u].append(v)
            adj[v].append(u)
        self.neighbors = tuple(tuple(sorted(nb)) for nb in adj)

    @property
    def m(self) -> int:
        return sum(len(nb) for nb in self.neighbors) // 2

    def edges(self):
        for u in range(self.n):
            for v in self.neighbors[u]:
                if u < v:
                    yield (u, v)

    def degree(self, v: int) -> int:
        return len(self.neighbors[v])

    def max_degree(self) -> int:
        return max(len(nb) for nb in self.neighbors)

    def __repr__(self):
        return f"Topology({self.family}, n={self.n}, m={self.m})"


def generate(family: str, n: int, seed: int = 0, p: float | None = None) -> Topology:
    """Build a named topology. seed and p only matter for gnp."""
    if family == "line":
        if n < 2:
            raise ValueError("line needs n >= 2")
        return Topology(n, [(i, i + 1) for i in range(n - 1)], family)
    if family == "ring":
        if n < 3:
            raise ValueError("ring needs n >= 3")
        return Topology(n, [(i, (i + 1) % n) for i in range(n)], family)
    if family == "grid":
        s = math.isqrt(n)
        if s * s != n or s < 2:
            raise ValueError("grid needs a perfect square n >= 4")
        edges = []
        for r in range(s):
            for c in range(s):
                v = r * s + c
                if c + 1 < s:
                    edges.append((v, v + 1))
                if r + 1 < s:
                    edges.append((v, v + s))
        return Topology(n, edges, family)
    if family == "binary_tree":
        if n < 2:
            raise ValueError("binary_tree needs n >= 2")
        edges = []
        for v in range(1, n):
            edges.append(((v - 1) // 2, v))
        return Topology(n, edges, family)
    if family == "complete":
        if n < 2:
            raise ValueError("complete needs n >= 2")
        return Topology(n, [(u, v) for u in range(n) for v in range(u + 1, n)], family)
    if family == "barbell":
        if n < 4 or n % 2:
            raise ValueError("barbell needs even n >= 4")
        h = n // 2
        edges = [(u, v) for u in range(h) for v in range(u + 1, h)]
        edges += [(u, v) for u in range(h, n) for v in range(u + 1, n)]
        # bridge joins the lowest-indexed node of each clique
        edges.append((0, h))
        return Topology(n, edges, family)
    if family == "gnp":
        return _generate_gnp(n, seed, p)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def _generate_gnp(n, seed, p):
    if n < 2:
        raise ValueError("gnp needs n >= 2")
    if p is None:
        # comfortably above the ~ln(n)/n connectivity threshold
        p = min(1.0, 2.0 * math.log(n) / n)
    if not 0 < p <= 1:
        raise ValueError("gnp needs 0 < p <= 1")
    rng = random.Random(seed)
    for _ in range(100):
        edges = [(u, v) for u in range(n) for v in range(u + 1, n)
                 if rng.random() < p]
        g = Topology(n, edges, "gnp")
        if is_connected(g):
            return g
    raise RuntimeError(f"gnp(n={n}, p={p:.4f}) failed to produce a connected graph "
                       "in 100 attempts; raise p")


def is_connected(g: Topology) -> bool:
    if g.n == 0:
        return True
    seen = bytearray(g.n)
    seen[0] = 1
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for v in g.neighbors[u]:
            if not seen[v]:
                seen[v] = 1
                count += 1
                queue.append(v)
    return count == g.n


@dataclass(frozen=True)
class GraphMetrics:
    max_degree: int
    diameter: int
    # max over ordered node pairs of the summed degrees along the
    # breadth-first shortest path between them
    max_path_degree_sum: int


def metrics(g: Topology) -> GraphMetrics:
    """Exact metrics via an all-pairs BFS sweep (closed forms past the cap).

    The degree-sum metric uses the canonical BFS-first shortest path:
    FIFO traversal with neighbors expanded in ascending order, each node
    adopting its first discoverer as parent.
    """
    if g.n > EXACT_METRICS_MAX_N:
        return GraphMetrics(g.max_degree(), _closed_form_diameter(g), -1)
    deg = [len(nb) for nb in g.neighbors]
    diameter = 0
    best_ds = 0
    dist = [0] * g.n
    ds = [0] * g.n
    for root in range(g.n):
        seen = bytearray(g.n)
        seen[root] = 1
        dist[root] = 0
        ds[root] = deg[root]
        reached = 1
        queue = deque([root])
        while queue:
            u = queue.popleft()
            du = dist[u]
            su = ds[u]
            for v in g.neighbors[u]:
                if not seen[v]:
                    seen[v] = 1
                    dist[v] = du + 1
                    ds[v] = su + deg[v]
                    reached += 1
                    queue.append(v)
            if dist[u] > diameter:
                diameter = dist[u]
            if su > best_ds:
                best_ds = su
        if reached != g.n:
            raise ValueError("graph is disconnected; metrics undefined")
    return GraphMetrics(max(deg), diameter, best_ds)


def _closed_form_diameter(g: Topology) -> int:
    n = g.n
    if g.family == "line":
        return n - 1
    if g.family == "ring":
        return n // 2
    if g.family == "grid":
        return 2 * (math.isqrt(n) - 1)
    if g.family == "complete":
        return 1
    if g.family == "barbell":
        return 3
    if g.family == "binary_tree":
        # trees admit an exact linear-time diameter
        a = _farthest(g, 0)
        b = _farthest(g, a)
        return _bfs_dist(g, a)[b]
    raise ValueError(f"no closed-form diameter for family {g.family!r} at n={n}; "
                     f"exact metrics stop at n={EXACT_METRICS_MAX_N}")


def _bfs_dist(g: Topology, root: int):
    dist = [-1] * g.n
    dist[root] = 0
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in g.neighbors[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def _farthest(g: Topology, root: int) -> int:
    dist = _bfs_dist(g, root)
    return max(range(g.n), key=lambda v: (dist[v], -v))


@dataclass(frozen=True)
class SpanningTree:
    """Rooted spanning tree as a parent array (parent[root] == -1)."""

    root: int
    parent: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.parent)

    def depths(self) -> list[int]:
        depth = [-1] * self.n
        depth[self.root] = 0
        children = self.children()
        queue = deque([self.root])
        while queue:
            u = queue.popleft()
            for v in children[u]:
                depth[v] = depth[u] + 1
                queue.append(v)
        return depth

    def max_depth(self) -> int:
        return max(self.depths())

    def children(self) -> list[list[int]]:
        ch = [[] for _ in range(self.n)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                ch[p].append(v)
        return ch

    def diameter(self) -> int:
        g = self.as_topology()
        a = _farthest(g, self.root)
        b = _farthest(g, a)
        return _bfs_dist(g, a)[b]

    def as_topology(self) -> Topology:
        edges = [(v, p) for v, p in enumerate(self.parent) if p >= 0]
        return Topology(self.n, edges, "tree")

    def validate(self):
        if not 0 <= self.root < self.n:
            raise ValueError("root out of range")
        if self.parent[self.root] != -1:
            raise ValueError("root must have parent -1")
        if sum(p == -1 for p in self.parent) != 1:
            raise ValueError("exactly one root expected")
        if -1 in self.depths():
            raise ValueError("tree does not reach every node")


def bfs_tree(g: Topology, root: int) -> SpanningTree:
    """Breadth-first spanning tree; ascending neighbor order makes it canonical."""
    parent = [-2] * g.n
    parent[root] = -1
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in g.neighbors[u]:
            if parent[v] == -2:
                parent[v] = u
                queue.append(v)
    if -2 in parent:
        raise ValueError("graph is disconnected; no spanning tree")
    return SpanningTree(root, tuple(parent))


# --- edge-list serialization -------------------------------------------

def to_edge_list(g: Topology) -> str:
    """Serialize as a header line "n m" plus one "u v" line per edge."""
    lines = [f"{g.n} {g.m}"]
    lines.extend(f"{u} {v}" for u, v in g.edges())
    return "\n".join(lines) + "\n"


def from_edge_list(text: str, family: str = "custom") -> Topology:
    lines = [ln for ln in (s.strip() for s in text.splitlines()) if ln]
    if not lines:
        raise ValueError("empty edge list")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"bad header {lines[0]!r}; expected 'n m'")
    n, m = int(head[0]), int(head[1])
    if len(lines) - 1 != m:
        raise ValueError(f"header promises {m} edges, found {len(lines) - 1}")
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return Topology(n, edges, family)
