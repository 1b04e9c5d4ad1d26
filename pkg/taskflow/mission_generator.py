from __future__ import annotations

import math
from typing import Dict, List, Tuple

import numpy as np

from taskflow.mission_model import (
    SOURCE,
    Edge,
    Fleet,
    Mission,
    RewardModel,
    ScalarFunction,
    TaskGraph,
    TaskNode,
    linear,
    source_node,
)
from taskflow.testbed_schemas import GeneratorConfig

ADVANCED_TASK_TYPES = ("coverage", "exploration", "transport", "carry")


def _sample_catalog(rng: np.random.Generator, cfg: GeneratorConfig) -> ScalarFunction:
    kinds = sorted(cfg.catalog_weights)
    weights = np.array([cfg.catalog_weights[k] for k in kinds], dtype=float)
    kind = kinds[int(rng.choice(len(kinds), p=weights / weights.sum()))]
    if kind == "polynomial":
        degree = int(rng.integers(1, 4))
        return ScalarFunction("polynomial", (0.0,) + tuple(rng.uniform(0.0, 1.0, size=degree)))
    if kind == "power_sublinear":
        return ScalarFunction("power_sublinear", (rng.uniform(0.5, 2.0), rng.uniform(0.2, 0.9)))
    return ScalarFunction("sigmoid", (rng.uniform(0.5, 2.0), rng.uniform(5.0, 20.0), rng.uniform(0.2, 0.8)))


def _advanced_task(rng: np.random.Generator) -> Tuple[str, ScalarFunction, str]:
    task_type = ADVANCED_TASK_TYPES[int(rng.integers(len(ADVANCED_TASK_TYPES)))]
    if task_type == "coverage":
        a1 = rng.uniform(0.2, 1.0)
        return task_type, linear(a1 + rng.uniform(0.5, 2.0), -a1), "product"
    if task_type == "exploration":
        return task_type, ScalarFunction("exp_saturation", (rng.uniform(1.0, 3.0), rng.uniform(1.0, 5.0))), "product"
    if task_type == "transport":
        return task_type, linear(rng.uniform(0.0, 1.0), rng.uniform(1.0, 3.0)), "min"
    return (
        task_type,
        ScalarFunction("sigmoid", (rng.uniform(1.0, 3.0), rng.uniform(8.0, 15.0), rng.uniform(0.3, 0.7))),
        "product",
    )


def _layers(rng: np.random.Generator, cfg: GeneratorConfig) -> List[int]:
    m = cfg.num_tasks
    count = cfg.num_layers or max(1, int(round(math.sqrt(m))))
    count = min(count, m)
    labels = np.concatenate([np.arange(count), rng.integers(0, count, size=m - count)])
    return sorted(int(v) for v in labels)


def generate_mission(cfg: GeneratorConfig) -> Mission:
    """Random layered task graph with catalog reward functions; deterministic per seed."""
    rng = np.random.default_rng(cfg.seed)
    layer_of = _layers(rng, cfg)
    m = cfg.num_tasks
    tasks = list(range(1, m + 1))

    edges: List[Edge] = []
    for i in tasks:
        for j in tasks:
            if layer_of[j - 1] == layer_of[i - 1] + 1 and rng.uniform() < cfg.edge_density:
                edges.append((i, j))
    with_parent = {j for _, j in edges}
    edges.extend((SOURCE, j) for j in tasks if j not in with_parent)
    edges.sort()

    durations = rng.uniform(cfg.duration_min, cfg.duration_max, size=m)
    nodes = (source_node(),) + tuple(
        TaskNode(id=j, duration=float(durations[j - 1]), label=f"task {j}") for j in tasks
    )

    coordinates = rng.uniform(0.0, 1.0, size=(m + 1, 2))
    span = cfg.travel_max - cfg.travel_min
    travel: Dict[Edge, float] = {}
    for i in range(m + 1):
        for j in range(m + 1):
            if i != j:
                distance = float(np.linalg.norm(coordinates[i] - coordinates[j])) / math.sqrt(2.0)
                travel[(i, j)] = cfg.travel_min + span * distance

    capacity: Dict[Edge, float] = {}
    for edge in edges:
        if cfg.capacity_probability > 0 and rng.uniform() < cfg.capacity_probability:
            capacity[edge] = float(rng.uniform(0.25, 1.0))

    graph = TaskGraph(nodes=nodes, edges=tuple(edges), travel_time=travel, edge_capacity=capacity)
    coalition: Dict[int, ScalarFunction] = {}
    combination: Dict[int, str] = {}
    influence: Dict[Edge, ScalarFunction] = {}
    labels: Dict[int, str] = {}
    for j in tasks:
        if cfg.preset == "advanced":
            labels[j], coalition[j], combination[j] = _advanced_task(rng)
        else:
            coalition[j] = _sample_catalog(rng, cfg)
            combination[j] = ("sum", "product")[int(rng.integers(2))]
    for tail, head in edges:
        if tail == SOURCE:
            continue
        if cfg.preset == "advanced":
            parents = sum(1 for i in graph.predecessors(head) if i != SOURCE)
            influence[(tail, head)] = linear(0.0, 1.0 / parents)
        else:
            influence[(tail, head)] = _sample_catalog(rng, cfg)

    if labels:
        nodes = (source_node(),) + tuple(
            TaskNode(id=j, duration=float(durations[j - 1]), label=labels[j]) for j in tasks
        )
        graph = TaskGraph(nodes=nodes, edges=graph.edges, travel_time=travel, edge_capacity=capacity)

    reward = RewardModel(
        coalition=coalition,
        influence=influence,
        aggregation={j: "sum" for j in tasks},
        combination=combination,
    )
    makespan = cfg.makespan_fraction * float(durations.sum())
    return Mission(
        graph=graph,
        reward=reward,
        fleet=Fleet(cfg.fleet_size),
        makespan=makespan,
        name=f"{cfg.preset}-m{m}-n{cfg.fleet_size}-s{cfg.seed}",
    )
