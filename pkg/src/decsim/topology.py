"""Communication graph construction, centrality scores, and percolation.

Graphs are undirected, unweighted, and live on contiguous integer node ids.
All functions here are pure: they never mutate their inputs and are safe to
call concurrently.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataFormatError, ParameterError

CENTRALITY_KINDS = ("degree", "betweenness", "structural_hole")


def _round_half_up(x: float) -> int:
    # round() applies banker's rounding; half-up keeps removal counts stable
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class Graph:
    """Undirected graph with nodes 0..node_count-1.

    ``edges`` holds normalised (u < v) pairs; ``adjacency[i]`` is the sorted
    tuple of neighbours of i. Symmetry and absence of self-loops/duplicates
    are enforced at construction.
    """

    node_count: int
    edges: frozenset[tuple[int, int]]
    adjacency: tuple[tuple[int, ...], ...]

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        if node_count < 0:
            raise ParameterError(f"node_count must be >= 0, got {node_count}")
        normalised: set[tuple[int, int]] = set()
        for u, v in edges:
            if u == v:
                raise ParameterError(f"self-loop on node {u}")
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ParameterError(f"edge ({u}, {v}) outside 0..{node_count - 1}")
            normalised.add((min(u, v), max(u, v)))
        neigh: list[list[int]] = [[] for _ in range(node_count)]
        for u, v in normalised:
            neigh[u].append(v)
            neigh[v].append(u)
        adjacency = tuple(tuple(sorted(ns)) for ns in neigh)
        return cls(node_count=node_count, edges=frozenset(normalised), adjacency=adjacency)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.adjacency[i]


@dataclass(frozen=True)
class BAParams:
    """Parameters for preferential-attachment graph growth."""

    n: int
    m: int
    seed: int

    def __post_init__(self) -> None:
        if not 1 <= self.m < self.n:
            raise ParameterError(f"need 1 <= m < n, got m={self.m}, n={self.n}")


@dataclass(frozen=True)
class CentralityMap:
    kind: str
    score: tuple[float, ...]

    def ranked(self) -> list[int]:
        """Node ids sorted by score descending, ties by ascending id."""
        return sorted(range(len(self.score)), key=lambda i: (-self.score[i], i))


@dataclass(frozen=True)
class PercolationPoint:
    removed_fraction: float
    phi: float
    component_sizes: tuple[int, ...]  # sorted descending

    @property
    def lcc_size(self) -> int:
        return self.component_sizes[0] if self.component_sizes else 0

    @property
    def num_components(self) -> int:
        return len(self.component_sizes)

    @property
    def num_isolated(self) -> int:
        return sum(1 for s in self.component_sizes if s == 1)


def generate_ba(params: BAParams) -> Graph:
    """Grow a preferential-attachment graph.

    Starts from ``m`` isolated seed nodes; the first newcomer attaches to all
    of them, every later newcomer attaches to ``m`` distinct existing nodes
    picked with probability proportional to their current degree. The result
    is connected with exactly m*(n-m) edges and is a pure function of the
    seed.
    """
    n, m = params.n, params.m
    rng = np.random.default_rng(params.seed)
    targets = list(range(m))
    degree_pool: list[int] = []  # node id repeated once per incident edge end
    edges: list[tuple[int, int]] = []
    for new in range(m, n):
        edges.extend((t, new) for t in targets)
        degree_pool.extend(targets)
        degree_pool.extend([new] * m)
        if new + 1 == n:
            break
        targets = _sample_distinct(rng, degree_pool, m)
    return Graph.from_edges(n, edges)


def _sample_distinct(rng: np.random.Generator, pool: Sequence[int], k: int) -> list[int]:
    """Draw k distinct values from a multiset by rejection."""
    chosen: list[int] = []
    seen: set[int] = set()
    while len(chosen) < k:
        cand = pool[int(rng.integers(len(pool)))]
        if cand not in seen:
            seen.add(cand)
            chosen.append(cand)
    return chosen


def centrality(g: Graph, kind: str) -> CentralityMap:
    """Per-node centrality scores of the requested kind.

    degree: deg(i)/(n-1). betweenness: fraction of shortest paths through i,
    pair-normalised, computed exactly. structural_hole: Burt effective size
    deg(i) - 2*t_i/deg(i), where t_i counts edges among i's neighbours.
    """
    if g.node_count == 0:
        raise ParameterError("centrality requires a nonempty graph")
    if kind == "degree":
        scores = _degree_scores(g)
    elif kind == "betweenness":
        scores = _betweenness_scores(g)
    elif kind == "structural_hole":
        scores = _effective_size_scores(g)
    else:
        raise ParameterError(f"unknown centrality kind {kind!r}; expected one of {CENTRALITY_KINDS}")
    return CentralityMap(kind=kind, score=tuple(scores))


def _degree_scores(g: Graph) -> list[float]:
    n = g.node_count
    if n <= 1:
        return [0.0] * n
    return [g.degree(i) / (n - 1) for i in range(n)]


def _betweenness_scores(g: Graph) -> list[float]:
    # Brandes accumulation over ordered pairs, then pair normalisation
    # 2/((n-1)(n-2)): a node on every path between the others scores 1.
    n = g.node_count
    raw = [0.0] * n
    for s in range(n):
        sigma = [0] * n
        dist = [-1] * n
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma[s] = 1
        dist[s] = 0
        order: list[int] = []
        queue = deque([s])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in g.adjacency[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = [0.0] * n
        for w in reversed(order):
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                raw[w] += delta[w]
    if n <= 2:
        return [0.0] * n
    scale = 1.0 / ((n - 1) * (n - 2))
    return [r * scale for r in raw]


def _effective_size_scores(g: Graph) -> list[float]:
    neighbour_sets = [set(adj) for adj in g.adjacency]
    scores: list[float] = []
    for i in range(g.node_count):
        deg = g.degree(i)
        if deg == 0:
            scores.append(0.0)
            continue
        ties = 0
        adj = g.adjacency[i]
        for a_idx in range(len(adj)):
            for b_idx in range(a_idx + 1, len(adj)):
                if adj[b_idx] in neighbour_sets[adj[a_idx]]:
                    ties += 1
        scores.append(deg - 2.0 * ties / deg)
    return scores


def connected_components(g: Graph) -> list[set[int]]:
    """Maximal connected subsets, largest first (ties: smallest member id)."""
    seen = [False] * g.node_count
    components: list[set[int]] = []
    for start in range(g.node_count):
        if seen[start]:
            continue
        comp = {start}
        seen[start] = True
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in g.adjacency[v]:
                if not seen[w]:
                    seen[w] = True
                    comp.add(w)
                    queue.append(w)
        components.append(comp)
    components.sort(key=lambda c: (-len(c), min(c)))
    return components


def percolation_curve(g: Graph, kind: str, step_fraction: float) -> list[PercolationPoint]:
    """Static targeted-attack percolation curve.

    The centrality ranking is computed once on the intact graph; nodes are
    then removed in rank order (ties by ascending id), one point per step of
    ``step_fraction`` until the whole graph is gone.
    """
    if not 0.0 < step_fraction <= 1.0:
        raise ParameterError(f"step_fraction must be in (0, 1], got {step_fraction}")
    n = g.node_count
    order = centrality(g, kind).ranked()
    points: list[PercolationPoint] = []
    k = 0
    while True:
        frac = min(k * step_fraction, 1.0)
        removed = min(n, _round_half_up(frac * n))
        gone = set(order[:removed])
        survivors = [i for i in range(n) if i not in gone]
        sizes = _component_sizes(g, survivors)
        phi = (sizes[0] / n) if sizes else 0.0
        points.append(PercolationPoint(
            removed_fraction=removed / n if n else 0.0,
            phi=phi,
            component_sizes=tuple(sizes),
        ))
        if frac >= 1.0:
            break
        k += 1
    return points


def _component_sizes(g: Graph, survivors: Sequence[int]) -> list[int]:
    alive = set(survivors)
    seen: set[int] = set()
    sizes: list[int] = []
    for start in survivors:
        if start in seen:
            continue
        size = 0
        queue = deque([start])
        seen.add(start)
        while queue:
            v = queue.popleft()
            size += 1
            for w in g.adjacency[v]:
                if w in alive and w not in seen:
                    seen.add(w)
                    queue.append(w)
        sizes.append(size)
    sizes.sort(reverse=True)
    return sizes


def save_edge_list(g: Graph, path: str | Path) -> None:
    """Write the graph as text: a ``# nodes=N`` header then one ``u v`` per line."""
    lines = [f"# nodes={g.node_count}"]
    lines.extend(f"{u} {v}" for u, v in sorted(g.edges))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_edge_list(path: str | Path) -> Graph:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# nodes="):
        raise DataFormatError(f"{path}: missing '# nodes=N' header")
    try:
        node_count = int(lines[0].split("=", 1)[1])
    except ValueError as exc:
        raise DataFormatError(f"{path}: unparseable node count") from exc
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise DataFormatError(f"{path}: malformed edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return Graph.from_edges(node_count, edges)


def write_percolation_csv(points: Sequence[PercolationPoint], path: str | Path) -> None:
    """CSV schema: removed_fraction, phi, num_components, num_isolated, lcc_size."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["removed_fraction", "phi", "num_components", "num_isolated", "lcc_size"])
        for p in points:
            writer.writerow([p.removed_fraction, p.phi, p.num_components, p.num_isolated, p.lcc_size])
