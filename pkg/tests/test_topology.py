from collections import Counter, deque
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decsim.errors import DataFormatError, ParameterError
from decsim.topology import (BAParams, Graph, centrality, connected_components,
                             generate_ba, load_edge_list, percolation_curve,
                             save_edge_list, write_percolation_csv)

from conftest import random_graph


# ---------------------------------------------------------------- oracles

def enumerate_shortest_paths(g: Graph, s: int, t: int) -> list[tuple[int, ...]]:
    """All shortest s-t paths, by BFS layering plus DFS back-walk."""
    dist = {s: 0}
    queue = deque([s])
    while queue:
        v = queue.popleft()
        for w in g.adjacency[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    if t not in dist:
        return []
    paths = []

    def walk(node, acc):
        if node == s:
            paths.append(tuple(reversed(acc + [s])))
            return
        for prev in g.adjacency[node]:
            if dist.get(prev, -1) == dist[node] - 1:
                walk(prev, acc + [node])

    walk(t, [])
    return paths


def brute_force_betweenness(g: Graph) -> list[float]:
    """Pair-normalised betweenness via explicit path enumeration."""
    n = g.node_count
    raw = [0.0] * n
    for s, t in combinations(range(n), 2):
        paths = enumerate_shortest_paths(g, s, t)
        if not paths:
            continue
        through = Counter()
        for path in paths:
            for v in path[1:-1]:
                through[v] += 1
        for v, cnt in through.items():
            raw[v] += cnt / len(paths)
    if n <= 2:
        return [0.0] * n
    norm = (n - 1) * (n - 2) / 2.0
    return [r / norm for r in raw]


# ---------------------------------------------------------------- graph type

def test_graph_rejects_self_loops_and_bad_ids():
    with pytest.raises(ParameterError):
        Graph.from_edges(3, [(0, 0)])
    with pytest.raises(ParameterError):
        Graph.from_edges(3, [(0, 5)])


def test_graph_symmetric_adjacency():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 0)])
    for u in range(4):
        for v in g.adjacency[u]:
            assert u in g.adjacency[v]


def test_duplicate_edges_collapse():
    g = Graph.from_edges(3, [(0, 1), (1, 0), (0, 1)])
    assert g.edge_count == 1


# ---------------------------------------------------------------- generator

def test_ba_params_validation():
    with pytest.raises(ParameterError):
        BAParams(n=3, m=3, seed=0)
    with pytest.raises(ParameterError):
        BAParams(n=3, m=0, seed=0)


def test_ba_basic_shape():
    g = generate_ba(BAParams(n=100, m=2, seed=11))
    assert g.node_count == 100
    assert g.edge_count == 2 * 98  # m*(n-m)
    assert len(connected_components(g)) == 1
    # nodes added after the seed phase keep at least m links
    for node in range(2, 100):
        assert g.degree(node) >= 2


def test_ba_three_nodes_attaches_to_both_seeds():
    g = generate_ba(BAParams(n=3, m=2, seed=5))
    assert g.edge_count == 2
    assert g.degree(2) == 2


def test_ba_deterministic():
    a = generate_ba(BAParams(n=60, m=2, seed=42))
    b = generate_ba(BAParams(n=60, m=2, seed=42))
    assert a.edges == b.edges
    c = generate_ba(BAParams(n=60, m=2, seed=43))
    assert a.edges != c.edges


def test_ba_heavy_tail_degrees():
    # preferential attachment should produce hubs far above the minimum degree
    max_degrees = []
    for seed in range(50):
        g = generate_ba(BAParams(n=1000, m=2, seed=seed))
        max_degrees.append(max(g.degree(i) for i in range(g.node_count)))
    assert np.median(max_degrees) > 10 * 2


# ---------------------------------------------------------------- centrality

def test_degree_centrality_path(path3):
    cm = centrality(path3, "degree")
    assert cm.score[1] == 1.0
    assert cm.score[0] == 0.5


def test_betweenness_star(star6):
    cm = centrality(star6, "betweenness")
    assert cm.score[0] == pytest.approx(1.0)
    assert all(s == 0.0 for s in cm.score[1:])


def test_effective_size_triangle(triangle):
    cm = centrality(triangle, "structural_hole")
    assert all(s == pytest.approx(1.0) for s in cm.score)  # 2 - 2*1/2


def test_effective_size_isolated_node():
    g = Graph.from_edges(3, [(0, 1)])
    cm = centrality(g, "structural_hole")
    assert cm.score[2] == 0.0


def test_unknown_kind_rejected(triangle):
    with pytest.raises(ParameterError):
        centrality(triangle, "pagerank")


def test_betweenness_matches_path_enumeration_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(60):
        g = random_graph(rng, int(rng.integers(2, 9)))
        got = centrality(g, "betweenness").score
        want = brute_force_betweenness(g)
        assert np.allclose(got, want, atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=2, max_value=8), st.integers(min_value=0, max_value=2**31 - 1))
def test_effective_size_bounds(n, seed):
    g = random_graph(np.random.default_rng(seed), n)
    scores = centrality(g, "structural_hole").score
    for i in range(n):
        deg = g.degree(i)
        assert 0.0 <= scores[i] <= deg + 1e-12
        neighbour_edges = sum(
            1 for a, b in combinations(g.adjacency[i], 2) if (min(a, b), max(a, b)) in g.edges)
        if deg and neighbour_edges == 0:
            assert scores[i] == pytest.approx(deg)


# ---------------------------------------------------------------- components

def test_components_partition_and_order():
    g = Graph.from_edges(5, [(0, 1), (2, 3)])
    comps = connected_components(g)
    assert comps == [{0, 1}, {2, 3}, {4}]


def test_components_connected_graph(triangle):
    assert connected_components(triangle) == [{0, 1, 2}]


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=2**31 - 1))
def test_components_are_a_partition(n, seed):
    g = random_graph(np.random.default_rng(seed), n, p=0.25)
    comps = connected_components(g)
    combined = [v for comp in comps for v in comp]
    assert sorted(combined) == list(range(n))
    assert len(combined) == len(set(combined))


def test_ba_minus_structural_holes_fragments():
    # at this scale removing the top brokers must leave singletons behind
    hits = 0
    for seed in range(10):
        g = generate_ba(BAParams(n=100, m=2, seed=seed))
        top10 = centrality(g, "structural_hole").ranked()[:10]
        survivors = [v for v in range(100) if v not in set(top10)]
        sub = Graph.from_edges(
            100, [(u, v) for u, v in g.edges if u not in set(top10) and v not in set(top10)])
        comps = [c for c in connected_components(sub) if c & set(survivors)]
        sizes = sorted((len(c) for c in comps), reverse=True)
        if 1 in sizes:
            hits += 1
    assert hits >= 8


# ---------------------------------------------------------------- percolation

def test_percolation_zero_removal_phi_one(triangle):
    points = percolation_curve(triangle, "degree", 1.0)
    assert points[0].removed_fraction == 0.0
    assert points[0].phi == 1.0


def test_percolation_star_centre_first():
    g = Graph.from_edges(10, [(0, i) for i in range(1, 10)])
    points = percolation_curve(g, "degree", 0.1)
    after_one = points[1]
    assert after_one.removed_fraction == pytest.approx(0.1)
    assert after_one.phi == pytest.approx(0.1)
    assert after_one.component_sizes == (1,) * 9


def test_percolation_phi_non_increasing_and_counts():
    for seed in range(20):
        g = generate_ba(BAParams(n=100, m=2, seed=seed))
        points = percolation_curve(g, "structural_hole", 0.05)
        phis = [p.phi for p in points]
        assert all(a >= b - 1e-15 for a, b in zip(phis, phis[1:]))
        for p in points:
            removed = round(p.removed_fraction * g.node_count)
            assert sum(p.component_sizes) == g.node_count - removed


def test_percolation_step_validation(triangle):
    with pytest.raises(ParameterError):
        percolation_curve(triangle, "degree", 0.0)


def test_percolation_csv_roundtrip(tmp_path, star6):
    points = percolation_curve(star6, "degree", 0.5)
    out = tmp_path / "perc.csv"
    write_percolation_csv(points, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "removed_fraction,phi,num_components,num_isolated,lcc_size"
    assert len(lines) == len(points) + 1


# ---------------------------------------------------------------- edge list io

def test_edge_list_roundtrip(tmp_path):
    g = generate_ba(BAParams(n=40, m=2, seed=9))
    path = tmp_path / "graph.txt"
    save_edge_list(g, path)
    text = path.read_text()
    assert text.startswith("# nodes=40\n")
    g2 = load_edge_list(path)
    assert g2.edges == g.edges


def test_edge_list_rejects_missing_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0 1\n")
    with pytest.raises(DataFormatError):
        load_edge_list(path)
