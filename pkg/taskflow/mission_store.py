from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Dict, List, Union

from pydantic import BaseModel

from taskflow.mission_model import (
    SOURCE,
    Edge,
    Fleet,
    Mission,
    RewardModel,
    ScalarFunction,
    TaskGraph,
    TaskNode,
    validate_graph,
)
from taskflow.mission_schemas import (
    CoordinateTravel,
    EdgeEntry,
    FunctionDescriptor,
    MissionFile,
    NodeEntry,
    RewardEntry,
)

PathLike = Union[str, Path]


def _function(desc: FunctionDescriptor) -> ScalarFunction:
    return ScalarFunction(desc.kind, tuple(desc.params))


def _descriptor(fn: ScalarFunction) -> FunctionDescriptor:
    return FunctionDescriptor(kind=fn.kind, params=list(fn.params))  # type: ignore[arg-type]


def _travel_from_file(ids: List[int], travel) -> Dict[Edge, float]:
    size = len(ids)
    if isinstance(travel, CoordinateTravel):
        if len(travel.coordinates) != size:
            raise ValueError("travel_size_mismatch")
        return {
            (i, j): math.dist(travel.coordinates[i], travel.coordinates[j]) / travel.speed
            for i in ids
            for j in ids
            if i != j
        }
    if len(travel) != size or any(len(row) != size for row in travel):
        raise ValueError("travel_size_mismatch")
    return {(i, j): float(travel[i][j]) for i in ids for j in ids if i != j}


def mission_from_file(doc: MissionFile) -> Mission:
    ids = sorted(n.id for n in doc.nodes)
    if ids != list(range(len(ids))):
        raise ValueError("node_ids_not_contiguous")
    nodes = tuple(
        TaskNode(id=n.id, duration=n.duration, label=n.label, kind="source" if n.id == SOURCE else "task")
        for n in sorted(doc.nodes, key=lambda n: n.id)
    )
    edges = tuple(sorted((e.tail, e.head) for e in doc.edges))
    influence = {}
    capacity = {}
    for entry in doc.edges:
        edge = (entry.tail, entry.head)
        if entry.capacity is not None:
            capacity[edge] = entry.capacity
        if entry.tail == SOURCE:
            continue
        if entry.influence is None:
            raise ValueError("missing_influence", f"{entry.tail}->{entry.head}")
        influence[edge] = _function(entry.influence)

    by_node = {r.node: r for r in doc.reward}
    missing = [i for i in ids if i != SOURCE and i not in by_node]
    if missing:
        raise ValueError("missing_reward_entry", ",".join(str(i) for i in missing))

    graph = TaskGraph(
        nodes=nodes,
        edges=edges,
        travel_time=_travel_from_file(ids, doc.travel_time),
        edge_capacity=capacity,
    )
    violations = validate_graph(graph)
    if violations:
        raise ValueError("invalid_graph", "; ".join(violations))

    reward = RewardModel(
        coalition={r.node: _function(r.coalition) for r in doc.reward},
        influence=influence,
        aggregation={r.node: r.aggregation for r in doc.reward},
        combination={r.node: r.combination for r in doc.reward},
        ghost_influence={r.node: tuple(r.ghost) for r in doc.reward if r.ghost},
    )
    return Mission(graph=graph, reward=reward, fleet=Fleet(doc.fleet_size), makespan=doc.makespan, name=doc.name)


def mission_to_file(mission: Mission) -> MissionFile:
    g, rm = mission.graph, mission.reward
    ids = g.node_ids
    edges = []
    for tail, head in g.edges:
        fn = rm.influence.get((tail, head))
        cap = g.edge_capacity.get((tail, head))
        edges.append(
            EdgeEntry(tail=tail, head=head, influence=_descriptor(fn) if fn else None, capacity=cap)
        )
    reward = [
        RewardEntry(
            node=j,
            coalition=_descriptor(rm.coalition[j]),
            aggregation=rm.aggregation[j],  # type: ignore[arg-type]
            combination=rm.combination[j],  # type: ignore[arg-type]
            ghost=list(rm.ghost_influence.get(j, ())),
        )
        for j in g.task_ids
    ]
    matrix = [[g.travel(i, j) for j in ids] for i in ids]
    return MissionFile(
        name=mission.name,
        nodes=[NodeEntry(id=n.id, duration=n.duration, label=n.label) for n in sorted(g.nodes, key=lambda n: n.id)],
        edges=edges,
        reward=reward,
        travel_time=matrix,
        fleet_size=mission.fleet.size,
        makespan=mission.makespan,
    )


def parse_mission(text: str) -> Mission:
    return mission_from_file(MissionFile.model_validate_json(text))


def dump_mission(mission: Mission) -> str:
    return mission_to_file(mission).model_dump_json(indent=2, exclude_none=True)


def load_mission(path: PathLike) -> Mission:
    return parse_mission(Path(path).read_text(encoding="utf-8"))


def save_mission(mission: Mission, path: PathLike) -> Path:
    target = Path(path)
    target.write_text(dump_mission(mission) + "\n", encoding="utf-8")
    return target


def write_json(model: BaseModel, path: PathLike) -> Path:
    target = Path(path)
    target.write_text(model.model_dump_json(indent=2, exclude_none=True) + "\n", encoding="utf-8")
    return target


def read_json(path: PathLike) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
