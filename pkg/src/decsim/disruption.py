"""Targeted node removal: pick the most central nodes, watch for the
accuracy trigger, and derive the surviving topology once it fires.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import ParameterError
from .topology import Graph, centrality, connected_components, _round_half_up


@dataclass
class DisruptionPlan:
    """Which nodes go down, and when.

    ``threshold`` is the mean survivor accuracy at which removal fires
    (0 fires before the first round; None means the removal never happens
    and the plan only defines the would-be split). ``triggered_round`` is
    set exactly once, by the first satisfied trigger check.
    """

    centrality_kind: str
    fraction: float
    disrupted: tuple[int, ...]
    threshold: Optional[float] = None
    triggered_round: Optional[int] = None

    @property
    def triggered(self) -> bool:
        return self.triggered_round is not None

    def survivors(self, node_count: int) -> tuple[int, ...]:
        gone = set(self.disrupted)
        return tuple(i for i in range(node_count) if i not in gone)


@dataclass(frozen=True)
class SurvivorTopology:
    """Induced subgraph on the surviving nodes, keeping original ids.

    ``component_size`` labels each survivor with the size of its component;
    the label stays fixed for the rest of the run.
    """

    nodes: tuple[int, ...]
    adjacency: dict[int, tuple[int, ...]]
    component_size: dict[int, int]

    @property
    def isolated(self) -> tuple[int, ...]:
        return tuple(n for n in self.nodes if self.component_size[n] == 1)

    @property
    def largest_component_nodes(self) -> tuple[int, ...]:
        if not self.nodes:
            return ()
        biggest = max(self.component_size.values())
        return tuple(n for n in self.nodes if self.component_size[n] == biggest)


def select_disrupted(g: Graph, kind: str, fraction: float,
                     threshold: Optional[float] = None) -> DisruptionPlan:
    """Top round(fraction*n) nodes by centrality, ties by ascending id.

    The count rounds half-up with a floor of one node; disrupting the whole
    graph is rejected.
    """
    if not 0.0 < fraction < 1.0:
        raise ParameterError(f"fraction must be in (0, 1), got {fraction}")
    count = max(1, _round_half_up(fraction * g.node_count))
    if count >= g.node_count:
        raise ParameterError(
            f"fraction {fraction} would disrupt {count} of {g.node_count} nodes")
    if threshold is not None and not 0.0 <= threshold <= 1.0:
        raise ParameterError(f"threshold must be in [0, 1], got {threshold}")
    ranking = centrality(g, kind).ranked()
    return DisruptionPlan(
        centrality_kind=kind,
        fraction=fraction,
        disrupted=tuple(ranking[:count]),
        threshold=threshold,
    )


def check_trigger(plan: DisruptionPlan, mean_accuracy: float, round_index: int) -> bool:
    """True (and records the round) the first time mean accuracy reaches the
    threshold. Plans without a threshold never fire."""
    if plan.triggered:
        raise ParameterError("trigger already fired; it can fire at most once")
    if plan.threshold is None:
        return False
    if mean_accuracy >= plan.threshold:
        plan.triggered_round = round_index
        return True
    return False


def survivor_view(g: Graph, disrupted: Iterable[int]) -> SurvivorTopology:
    """Induced subgraph on everything except ``disrupted``, plus component
    size labels. Usable for would-be labelling before any trigger fires."""
    gone = set(disrupted)
    nodes = tuple(i for i in range(g.node_count) if i not in gone)
    sub_edges = [(u, v) for u, v in g.edges if u not in gone and v not in gone]
    relabel = {node: idx for idx, node in enumerate(nodes)}
    induced = Graph.from_edges(len(nodes), [(relabel[u], relabel[v]) for u, v in sub_edges])
    component_size: dict[int, int] = {}
    for comp in connected_components(induced):
        for local in comp:
            component_size[nodes[local]] = len(comp)
    adjacency = {
        node: tuple(w for w in g.adjacency[node] if w not in gone) for node in nodes
    }
    return SurvivorTopology(nodes=nodes, adjacency=adjacency, component_size=component_size)


def apply_disruption(g: Graph, plan: DisruptionPlan) -> SurvivorTopology:
    """Remove the planned nodes (and incident edges) from the live run."""
    if not plan.triggered:
        raise ParameterError("cannot apply a disruption before its trigger fires")
    return survivor_view(g, plan.disrupted)


def event_record(plan: DisruptionPlan, view: Optional[SurvivorTopology]) -> dict:
    """JSON-ready disruption record for the run manifest."""
    return {
        "triggered_round": plan.triggered_round,
        "threshold": plan.threshold,
        "disrupted_ids": list(plan.disrupted),
        "component_size_per_survivor": (
            {str(n): view.component_size[n] for n in view.nodes} if view is not None else None
        ),
    }
