from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from taskflow.flow_solver import IntegerAllocation
from taskflow.graph_ops import prune_graph, topo_order
from taskflow.mission_model import SOURCE, Fleet, RewardModel, TaskGraph
from taskflow.reward_engine import RewardProgram, eval_task_reward

logger = logging.getLogger(__name__)

FLOW_TASK_LIMIT = 8
FLOW_FLEET_LIMIT = 5
SCHEDULE_TASK_LIMIT = 4
SCHEDULE_FLEET_LIMIT = 3

Route = Tuple[int, ...]


class GuardViolation(ValueError):
    """Raised when an instance is too large for exhaustive enumeration."""


@dataclass(frozen=True)
class TinySchedule:
    routes: Tuple[Route, ...]
    start: Dict[int, float]
    finish: Dict[int, float]


@dataclass(frozen=True)
class OracleResult:
    best_objective: float
    best_allocation: Optional[object]
    nodes_explored: int
    exhaustive: bool = True


def _bounded_vectors(caps: Sequence[int], budget: int) -> Iterator[Tuple[int, ...]]:
    """All integer vectors with 0 <= v[k] <= caps[k] and sum(v) <= budget, in lexicographic order."""
    if not caps:
        yield ()
        return
    for first in range(min(caps[0], budget) + 1):
        for rest in _bounded_vectors(caps[1:], budget - first):
            yield (first,) + rest


def enumerate_integer_flows(g: TaskGraph, rm: RewardModel, fleet: Fleet, makespan: float) -> OracleResult:
    """Best objective over every integer robot flow on the pruned graph."""
    pruned, pruned_rm, _ = prune_graph(g, rm, makespan)
    if len(pruned.task_ids) > FLOW_TASK_LIMIT or fleet.size > FLOW_FLEET_LIMIT:
        raise GuardViolation("oracle_guard_exceeded")
    if not pruned.task_ids:
        return OracleResult(0.0, IntegerAllocation({}, {}), 1)

    n = fleet.size
    program = RewardProgram(pruned, pruned_rm)
    position = {e: k for k, e in enumerate(program.edges)}
    order = [v for v in topo_order(pruned) if pruned.successors(v)]
    counts = np.zeros(len(program.edges), dtype=int)
    best = {"value": -math.inf, "counts": None}
    explored = 0

    def visit(depth: int) -> None:
        nonlocal explored
        explored += 1
        if depth == len(order):
            value = program.total(counts / n)
            if value > best["value"] + 1e-12:
                best["value"], best["counts"] = value, counts.copy()
            return
        node_id = order[depth]
        if node_id == SOURCE:
            budget = n
        elif pruned.is_task(node_id):
            budget = int(sum(counts[position[(i, node_id)]] for i in pruned.predecessors(node_id)))
        else:
            budget = 0
        outs = [position[(node_id, h)] for h in pruned.successors(node_id)]
        caps = [int(math.floor(pruned.capacity(program.edges[k]) * n + 1e-9)) for k in outs]
        for vector in _bounded_vectors(caps, budget):
            counts[outs] = vector
            visit(depth + 1)
        counts[outs] = 0

    visit(0)
    robots = {e: int(best["counts"][k]) for k, e in enumerate(program.edges)}
    coalition = {j: sum(robots[(i, j)] for i in pruned.predecessors(j)) for j in pruned.task_ids}
    logger.debug("integer flow oracle: best=%.6f explored=%d", best["value"], explored)
    return OracleResult(best["value"], IntegerAllocation(robots, coalition), explored)


def _time_routes(g: TaskGraph, routes: Sequence[Route], makespan: float) -> Optional[TinySchedule]:
    """Left-shifted timing for a set of robot routes, or ``None`` when the routes deadlock or overrun."""
    executed = {t for route in routes for t in route}
    waits = nx.DiGraph()
    waits.add_nodes_from(executed)
    arrivals: Dict[int, List[Tuple[int, float]]] = {t: [] for t in executed}
    for route in routes:
        previous = SOURCE
        for task in route:
            arrivals[task].append((previous, g.travel(previous, task)))
            if previous != SOURCE:
                waits.add_edge(previous, task)
            previous = task
    for task in executed:
        for i in g.predecessors(task):
            if i in executed:
                waits.add_edge(i, task)
    if not nx.is_directed_acyclic_graph(waits):
        return None
    start: Dict[int, float] = {}
    finish: Dict[int, float] = {}
    for task in nx.lexicographical_topological_sort(waits):
        ready = max((finish.get(p, 0.0) + delay for p, delay in arrivals[task]), default=0.0)
        ready = max([ready] + [finish[i] for i in g.predecessors(task) if i in executed])
        start[task] = ready
        finish[task] = ready + g.duration(task)
        if finish[task] > makespan + 1e-9:
            return None
    return TinySchedule(routes=tuple(routes), start=start, finish=finish)


def enumerate_schedules(g: TaskGraph, rm: RewardModel, fleet: Fleet, makespan: float) -> OracleResult:
    """Best objective over every assignment of robots to ordered task sequences."""
    tasks = g.task_ids
    if len(tasks) > SCHEDULE_TASK_LIMIT or fleet.size > SCHEDULE_FLEET_LIMIT:
        raise GuardViolation("oracle_guard_exceeded")
    routes: List[Route] = [
        perm for size in range(len(tasks) + 1) for perm in itertools.permutations(tasks, size)
    ]
    order = [t for t in topo_order(g) if g.is_task(t)]
    n = fleet.size
    best_value, best_schedule, explored = 0.0, TinySchedule((), {}, {}), 0
    for combo in itertools.combinations_with_replacement(routes, n):
        explored += 1
        schedule = _time_routes(g, combo, makespan)
        if schedule is None:
            continue
        rewards: Dict[int, float] = {}
        for t in order:
            size = sum(route.count(t) for route in combo)
            rewards[t] = eval_task_reward(g, rm, t, size / n, rewards)
        value = sum(rewards.values())
        if value > best_value + 1e-12:
            best_value, best_schedule = value, schedule
    logger.debug("schedule oracle: best=%.6f explored=%d", best_value, explored)
    return OracleResult(best_value, best_schedule, explored)
