"""Topology generator and metric tests.

Diameter is cross-checked against an in-test Floyd-Warshall; the
path-degree-sum metric against a naive parent-walk reimplementation.
"""

import random
from collections import deque

import pytest

from gossipnet.graph import (
    FAMILIES,
    GraphMetrics,
    SpanningTree,
    Topology,
    bfs_tree,
    from_edge_list,
    generate,
    is_connected,
    metrics,
    to_edge_list,
)


def fw_diameter(g):
    n = g.n
    inf = float("inf")
    dist = [[inf] * n for _ in range(n)]
    for u in range(n):
        dist[u][u] = 0
        for v in g.neighbors[u]:
            dist[u][v] = 1
    for w in range(n):
        dw = dist[w]
        for u in range(n):
            du = dist[u]
            duw = du[w]
            for v in range(n):
                if duw + dw[v] < du[v]:
                    du[v] = duw + dw[v]
    return max(max(row) for row in dist)


def naive_degree_sum(g):
    """Walk parent chains of a plain BFS tree per root; keep the max sum."""
    best = 0
    for root in range(g.n):
        parent = {root: None}
        order = deque([root])
        while order:
            u = order.popleft()
            for v in g.neighbors[u]:
                if v not in parent:
                    parent[v] = u
                    order.append(v)
        for v in range(g.n):
            s = 0
            node = v
            while node is not None:
                s += len(g.neighbors[node])
                node = parent[node]
            best = max(best, s)
    return best


SMALL = [
    ("line", 10), ("ring", 10), ("ring", 9), ("grid", 16),
    ("binary_tree", 15), ("binary_tree", 12), ("complete", 7),
    ("barbell", 8), ("gnp", 14),
]


def test_family_edge_counts():
    assert generate("line", 10).m == 9
    assert generate("ring", 10).m == 10
    assert generate("grid", 16).m == 24
    assert generate("binary_tree", 15).m == 14
    assert generate("complete", 7).m == 21
    assert generate("barbell", 8).m == 13


def test_metrics_known_values():
    assert metrics(generate("line", 10)) == GraphMetrics(2, 9, 18)
    assert metrics(generate("ring", 10)) == GraphMetrics(2, 5, 12)
    mg = metrics(generate("grid", 16))
    assert (mg.max_degree, mg.diameter) == (4, 6)
    mb = metrics(generate("binary_tree", 15))
    assert (mb.max_degree, mb.diameter) == (3, 6)
    assert metrics(generate("complete", 7)) == GraphMetrics(6, 1, 12)
    assert metrics(generate("barbell", 8)) == GraphMetrics(4, 3, 14)


def test_diameter_matches_floyd_warshall():
    for family, n in SMALL:
        g = generate(family, n, seed=3)
        assert metrics(g).diameter == fw_diameter(g), (family, n)
    for seed in range(5):
        g = generate("gnp", 18, seed=seed)
        assert metrics(g).diameter == fw_diameter(g)


def test_degree_sum_matches_naive_walk():
    for family, n in SMALL:
        g = generate(family, n, seed=5)
        assert metrics(g).max_path_degree_sum == naive_degree_sum(g), (family, n)


def test_degree_sum_at_most_3n():
    cases = [("line", 40), ("ring", 40), ("grid", 36), ("grid", 64),
             ("binary_tree", 31), ("complete", 24), ("barbell", 20),
             ("gnp", 48)]
    for family, n in cases:
        g = generate(family, n, seed=9)
        assert metrics(g).max_path_degree_sum <= 3 * n, (family, n)


def test_degree_bound_on_diameter():
    # connected graphs satisfy max_degree^(diameter+2) >= n
    for family, n in SMALL:
        g = generate(family, n, seed=2)
        mt = metrics(g)
        assert mt.max_degree ** (mt.diameter + 2) >= n, (family, n)


def test_neighbors_sorted_ascending():
    for family, n in SMALL:
        g = generate(family, n, seed=1)
        for nb in g.neighbors:
            assert list(nb) == sorted(nb)


def test_gnp_deterministic_and_connected():
    a = generate("gnp", 30, seed=11)
    b = generate("gnp", 30, seed=11)
    assert a.neighbors == b.neighbors
    assert is_connected(a)
    c = generate("gnp", 30, seed=12)
    assert c.neighbors != a.neighbors


def test_generator_validation():
    with pytest.raises(ValueError):
        generate("grid", 12)
    with pytest.raises(ValueError):
        generate("barbell", 9)
    with pytest.raises(ValueError):
        generate("ring", 2)
    with pytest.raises(ValueError):
        generate("mesh", 8)
    with pytest.raises(ValueError):
        Topology(4, [(0, 0)])
    with pytest.raises(ValueError):
        Topology(4, [(0, 1), (1, 0)])
    with pytest.raises(ValueError):
        Topology(4, [(0, 5)])


def test_disconnected_rejected():
    g = Topology(4, [(0, 1), (2, 3)])
    assert not is_connected(g)
    with pytest.raises(ValueError):
        metrics(g)
    with pytest.raises(ValueError):
        bfs_tree(g, 0)


def test_edge_list_roundtrip():
    for family, n in SMALL:
        g = generate(family, n, seed=4)
        text = to_edge_list(g)
        g2 = from_edge_list(text, family)
        assert g2.n == g.n
        assert g2.neighbors == g.neighbors
        head = text.splitlines()[0].split()
        assert int(head[0]) == g.n and int(head[1]) == g.m


def test_edge_list_parse_errors():
    with pytest.raises(ValueError):
        from_edge_list("")
    with pytest.raises(ValueError):
        from_edge_list("3\n0 1\n")
    with pytest.raises(ValueError):
        from_edge_list("3 2\n0 1\n")  # count mismatch
    with pytest.raises(ValueError):
        from_edge_list("3 1\n0 3\n")  # out of range


def test_bfs_tree_canonical_and_consistent():
    for family, n in SMALL:
        g = generate(family, n, seed=6)
        t = bfs_tree(g, 0)
        t.validate()
        assert t.parent == bfs_tree(g, 0).parent
        # tree depths equal true BFS distances
        dist = {0: 0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in g.neighbors[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        depths = t.depths()
        for v in range(g.n):
            assert depths[v] == dist[v]
        # first-discoverer parent: parent is one hop closer to the root
        for v in range(g.n):
            if v != 0:
                assert dist[t.parent[v]] == dist[v] - 1


def test_tree_diameter_matches_floyd_warshall():
    for family, n in [("line", 12), ("binary_tree", 15), ("grid", 16), ("gnp", 15)]:
        g = generate(family, n, seed=8)
        t = bfs_tree(g, 0)
        assert t.diameter() == fw_diameter(t.as_topology())


def test_spanning_tree_structure():
    t = SpanningTree(0, (-1, 0, 0, 1, 1))
    t.validate()
    assert t.children()[0] == [1, 2]
    assert t.children()[1] == [3, 4]
    assert t.max_depth() == 2
    assert t.diameter() == 3
    bad = SpanningTree(0, (-1, 0, -1, 1, 1))
    with pytest.raises(ValueError):
        bad.validate()


def test_barbell_bridge_placement():
    g = generate("barbell", 12)
    assert 6 in g.neighbors[0]
    assert g.degree(0) == 6 and g.degree(6) == 6
    for v in (1, 2, 3, 4, 5):
        assert g.degree(v) == 5


def test_all_families_listed():
    for family in FAMILIES:
        n = 16 if family != "binary_tree" else 15
        g = generate(family, n, seed=0)
        assert is_connected(g)
