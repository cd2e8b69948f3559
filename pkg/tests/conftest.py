import numpy as np
import pytest

from decsim.topology import Graph


@pytest.fixture
def star6() -> Graph:
    """Centre 0 with five leaves."""
    return Graph.from_edges(6, [(0, i) for i in range(1, 6)])


@pytest.fixture
def triangle() -> Graph:
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def path3() -> Graph:
    return Graph.from_edges(3, [(0, 1), (1, 2)])


def random_graph(rng: np.random.Generator, n: int, p: float = 0.4) -> Graph:
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return Graph.from_edges(n, edges)
