from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Set, Tuple

import networkx as nx

from taskflow.mission_model import SOURCE, RewardModel, TaskGraph, eval_scalar

logger = logging.getLogger(__name__)

MAKESPAN_EPS = 1e-9


@dataclass(frozen=True)
class MakespanLabels:
    worst_finish: Dict[int, float]


def topo_order(g: TaskGraph) -> List[int]:
    try:
        return list(nx.lexicographical_topological_sort(g.to_networkx()))
    except nx.NetworkXUnfeasible:
        raise ValueError("graph_has_cycle") from None


def label_makespan(g: TaskGraph) -> MakespanLabels:
    worst: Dict[int, float] = {}
    for node_id in topo_order(g):
        node = g.node(node_id)
        if node.kind == "source":
            worst[node_id] = 0.0
            continue
        arrival = max((worst[i] + g.travel(i, node_id) for i in g.predecessors(node_id)), default=0.0)
        worst[node_id] = arrival + node.duration
    return MakespanLabels(worst_finish=worst)


def _drop_nodes(g: TaskGraph, removed: Set[int]) -> TaskGraph:
    nodes = tuple(n for n in g.nodes if n.id not in removed)
    edges = [e for e in g.edges if e[0] not in removed and e[1] not in removed]
    alive = {n.id for n in nodes}
    if SOURCE in alive:
        has_parent = {head for _, head in edges}
        for node in nodes:
            if node.kind == "task" and node.id not in has_parent:
                edges.append((SOURCE, node.id))
    edges.sort()
    travel = {e: v for e, v in g.travel_time.items() if e[0] in alive and e[1] in alive}
    capacity = {e: v for e, v in g.edge_capacity.items() if e in set(edges)}
    return TaskGraph(nodes=nodes, edges=tuple(edges), travel_time=travel, edge_capacity=capacity)


def prune_graph(
    g: TaskGraph,
    rm: RewardModel,
    makespan: float,
    keep: Iterable[int] = (),
) -> Tuple[TaskGraph, RewardModel, List[int]]:
    """Remove tasks whose worst-case finish exceeds the makespan, repeating until nothing changes.

    Surviving successors of a removed task receive its zero-reward influence as a ghost value.
    Nodes in ``keep`` are never removed.
    """
    protected = set(keep)
    removed: List[int] = []
    rounds = 0
    while True:
        labels = label_makespan(g).worst_finish
        drop = {
            node_id
            for node_id in g.task_ids
            if node_id not in protected and labels[node_id] > makespan + MAKESPAN_EPS
        }
        if not drop:
            break
        rounds += 1
        ghosts: Dict[int, List[float]] = {}
        for tail in sorted(drop):
            for head in g.successors(tail):
                if head in drop or not g.is_task(head):
                    continue
                fn = rm.influence.get((tail, head))
                if fn is not None:
                    ghosts.setdefault(head, []).append(eval_scalar(fn, 0.0))
        g = _drop_nodes(g, drop)
        rm = rm.with_ghosts(ghosts).restrict(g.node_ids, g.edges)
        removed.extend(sorted(drop))
    if removed:
        logger.debug("pruned %d tasks in %d rounds: %s", len(removed), rounds, removed)
    return g, rm, sorted(removed)
