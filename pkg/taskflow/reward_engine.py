from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from taskflow.graph_ops import topo_order
from taskflow.mission_model import Edge, RewardModel, ScalarFunction, TaskGraph, eval_scalar


def aggregate(kind: str, values: Sequence[float]) -> Optional[float]:
    """Aggregate influence values; ``None`` when there is nothing to aggregate."""
    if not values:
        return None
    if kind == "sum":
        return float(sum(values))
    if kind == "product":
        return float(math.prod(values))
    raise ValueError(f"unknown_aggregation:{kind}")


def combine(kind: str, coalition_value: float, influence: Optional[float]) -> float:
    if influence is None:
        return coalition_value
    if kind == "sum":
        return coalition_value + influence
    if kind == "product":
        return coalition_value * influence
    if kind == "min":
        return min(coalition_value, influence)
    raise ValueError(f"unknown_combination:{kind}")


def _entry(table: Mapping, key, code: str):
    try:
        return table[key]
    except KeyError:
        raise KeyError(code) from None


def eval_task_reward(
    g: TaskGraph,
    rm: RewardModel,
    j: int,
    coalition_fraction: float,
    upstream: Mapping[int, float],
    gated: bool = True,
) -> float:
    """Reward of task ``j`` given the rewards already accrued by its predecessors.

    Missing upstream entries count as zero reward. A gated task with no coalition earns nothing.
    """
    if not g.is_task(j):
        raise KeyError("unknown_task")
    if gated and coalition_fraction <= 0:
        return 0.0
    values = [
        eval_scalar(_entry(rm.influence, (i, j), "missing_influence"), upstream.get(i, 0.0))
        for i in g.predecessors(j)
        if g.is_task(i)
    ]
    values.extend(rm.ghost_influence.get(j, ()))
    coalition = eval_scalar(_entry(rm.coalition, j, "missing_coalition"), max(coalition_fraction, 0.0))
    influence = aggregate(_entry(rm.aggregation, j, "missing_aggregation"), values)
    return max(combine(_entry(rm.combination, j, "missing_combination"), coalition, influence), 0.0)


def eval_rewards(
    g: TaskGraph,
    rm: RewardModel,
    coalition_fraction: Mapping[int, float],
    gated: bool = True,
) -> Dict[int, float]:
    if any(not g.is_task(j) for j in coalition_fraction):
        raise KeyError("unknown_node")
    rewards: Dict[int, float] = {}
    for node_id in topo_order(g):
        if not g.is_task(node_id):
            rewards[node_id] = 0.0
            continue
        if node_id not in coalition_fraction:
            raise KeyError("missing_coalition_fraction")
        rewards[node_id] = eval_task_reward(g, rm, node_id, coalition_fraction[node_id], rewards, gated)
    return rewards


@dataclass(frozen=True)
class _CompiledTask:
    node: int
    inflow: Tuple[int, ...]
    coalition: ScalarFunction
    influences: Tuple[Tuple[int, ScalarFunction], ...]
    ghosts: Tuple[float, ...]
    aggregation: str
    combination: str


class RewardProgram:
    """Reward evaluator bound to one graph, one reward model and one edge ordering.

    Flow vectors passed to it are aligned with ``edges``.
    """

    def __init__(self, g: TaskGraph, rm: RewardModel, edges: Optional[Sequence[Edge]] = None):
        self.graph = g
        self.edges: List[Edge] = list(edges if edges is not None else g.edges)
        position = {e: k for k, e in enumerate(self.edges)}
        tasks: List[_CompiledTask] = []
        for node_id in topo_order(g):
            if not g.is_task(node_id):
                continue
            tasks.append(
                _CompiledTask(
                    node=node_id,
                    inflow=tuple(position[(i, node_id)] for i in g.predecessors(node_id) if (i, node_id) in position),
                    coalition=_entry(rm.coalition, node_id, "missing_coalition"),
                    influences=tuple(
                        (i, _entry(rm.influence, (i, node_id), "missing_influence"))
                        for i in g.predecessors(node_id)
                        if g.is_task(i)
                    ),
                    ghosts=tuple(rm.ghost_influence.get(node_id, ())),
                    aggregation=_entry(rm.aggregation, node_id, "missing_aggregation"),
                    combination=_entry(rm.combination, node_id, "missing_combination"),
                )
            )
        self._tasks = tasks

    @property
    def task_ids(self) -> List[int]:
        return [t.node for t in self._tasks]

    def fractions(self, flow: np.ndarray) -> Dict[int, float]:
        return {t.node: float(sum(flow[k] for k in t.inflow)) for t in self._tasks}

    def rewards(self, flow: np.ndarray, gated: bool = True) -> Dict[int, float]:
        rewards: Dict[int, float] = {}
        for task in self._tasks:
            x = float(sum(flow[k] for k in task.inflow))
            if gated and x <= 0:
                rewards[task.node] = 0.0
                continue
            values = [eval_scalar(fn, rewards.get(i, 0.0)) for i, fn in task.influences]
            values.extend(task.ghosts)
            value = combine(
                task.combination,
                eval_scalar(task.coalition, max(x, 0.0)),
                aggregate(task.aggregation, values),
            )
            rewards[task.node] = max(value, 0.0)
        return rewards

    def total(self, flow: np.ndarray, gated: bool = True) -> float:
        return float(sum(self.rewards(flow, gated).values()))

    def vector(self, flow: Mapping[Edge, float]) -> np.ndarray:
        return np.array([flow.get(e, 0.0) for e in self.edges], dtype=float)
