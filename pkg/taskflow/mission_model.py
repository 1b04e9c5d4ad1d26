from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple

import networkx as nx
from scipy.special import expit

Edge = Tuple[int, int]
FunctionKind = Literal["polynomial", "power_sublinear", "sigmoid", "linear", "exp_saturation", "constant"]
Aggregation = Literal["sum", "product"]
Combination = Literal["sum", "product", "min"]
NodeKind = Literal["task", "source"]

SOURCE = 0

_ARITY = {
    "power_sublinear": 2,
    "sigmoid": 3,
    "linear": 2,
    "exp_saturation": 2,
    "constant": 1,
}


@dataclass(frozen=True)
class ScalarFunction:
    kind: str
    params: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        problem = _parameter_problem(self.kind, self.params)
        if problem:
            raise ValueError(problem)

    @classmethod
    def clamped(cls, kind: str, params: Sequence[float]) -> "ScalarFunction":
        """Build a function after forcing each parameter into its valid range."""
        values = [float(p) if math.isfinite(p) else 0.0 for p in params]
        if kind == "power_sublinear":
            values[0] = max(values[0], 0.0)
            values[1] = min(max(values[1], 1e-6), 1.0 - 1e-6)
        elif kind == "sigmoid":
            values[0] = max(values[0], 0.0)
            values[1] = max(values[1], 1e-6)
        elif kind == "exp_saturation":
            values[0] = max(values[0], 0.0)
            values[1] = max(values[1], 1e-6)
        elif kind == "constant":
            values[0] = max(values[0], 0.0)
        return cls(kind, tuple(values))

    def __call__(self, x: float) -> float:
        return eval_scalar(self, x)


def _parameter_problem(kind: str, params: Tuple[float, ...]) -> Optional[str]:
    if kind == "polynomial":
        if not params:
            return "polynomial_without_coefficients"
    elif kind in _ARITY:
        if len(params) != _ARITY[kind]:
            return f"{kind}_expects_{_ARITY[kind]}_params"
    else:
        return f"unknown_function_kind:{kind}"
    if not all(math.isfinite(p) for p in params):
        return "non_finite_parameter"
    if kind == "power_sublinear" and (params[0] < 0 or not 0 < params[1] < 1):
        return "power_sublinear_out_of_range"
    if kind == "sigmoid" and (params[0] < 0 or params[1] <= 0):
        return "sigmoid_out_of_range"
    if kind == "exp_saturation" and (params[0] < 0 or params[1] <= 0):
        return "exp_saturation_out_of_range"
    if kind == "constant" and params[0] < 0:
        return "constant_negative"
    return None


def eval_scalar(f: ScalarFunction, x: float) -> float:
    p = f.params
    if f.kind == "polynomial":
        value = 0.0
        for coefficient in reversed(p):
            value = value * x + coefficient
    elif f.kind == "power_sublinear":
        value = p[0] * max(x, 0.0) ** p[1]
    elif f.kind == "sigmoid":
        value = p[0] * float(expit(p[1] * (x - p[2])))
    elif f.kind == "linear":
        value = p[0] + p[1] * x
    elif f.kind == "exp_saturation":
        value = p[0] * -math.expm1(-p[1] * x)
    elif f.kind == "constant":
        value = p[0]
    else:
        raise ValueError(f"unknown_function_kind:{f.kind}")
    if not math.isfinite(value):
        raise ValueError("non_finite_value")
    return value


def constant(value: float) -> ScalarFunction:
    return ScalarFunction("constant", (value,))


def linear(a0: float, a1: float) -> ScalarFunction:
    return ScalarFunction("linear", (a0, a1))


@dataclass(frozen=True)
class TaskNode:
    id: int
    duration: float = 0.0
    label: str = ""
    kind: NodeKind = "task"


@dataclass(frozen=True)
class TaskGraph:
    nodes: Tuple[TaskNode, ...]
    edges: Tuple[Edge, ...]
    travel_time: Mapping[Edge, float] = field(default_factory=dict)
    edge_capacity: Mapping[Edge, float] = field(default_factory=dict)

    @cached_property
    def _by_id(self) -> Dict[int, TaskNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _preds(self) -> Dict[int, List[int]]:
        preds: Dict[int, List[int]] = {n.id: [] for n in self.nodes}
        for tail, head in self.edges:
            preds.setdefault(head, []).append(tail)
        return {k: sorted(v) for k, v in preds.items()}

    @cached_property
    def _succs(self) -> Dict[int, List[int]]:
        succs: Dict[int, List[int]] = {n.id: [] for n in self.nodes}
        for tail, head in self.edges:
            succs.setdefault(tail, []).append(head)
        return {k: sorted(v) for k, v in succs.items()}

    @property
    def node_ids(self) -> List[int]:
        return sorted(self._by_id)

    @property
    def task_ids(self) -> List[int]:
        return sorted(n.id for n in self.nodes if n.kind == "task")

    @property
    def source_ids(self) -> List[int]:
        return sorted(n.id for n in self.nodes if n.kind == "source")

    def has_node(self, node_id: int) -> bool:
        return node_id in self._by_id

    def node(self, node_id: int) -> TaskNode:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise KeyError("unknown_node") from None

    def is_task(self, node_id: int) -> bool:
        node = self._by_id.get(node_id)
        return node is not None and node.kind == "task"

    def duration(self, node_id: int) -> float:
        return self.node(node_id).duration

    def predecessors(self, node_id: int) -> List[int]:
        return self._preds.get(node_id, [])

    def successors(self, node_id: int) -> List[int]:
        return self._succs.get(node_id, [])

    def travel(self, tail: int, head: int) -> float:
        if tail == head:
            return 0.0
        return float(self.travel_time.get((tail, head), 0.0))

    def capacity(self, edge: Edge) -> float:
        return float(self.edge_capacity.get(edge, 1.0))

    def to_networkx(self) -> nx.DiGraph:
        dg = nx.DiGraph()
        dg.add_nodes_from(n.id for n in self.nodes)
        dg.add_edges_from(self.edges)
        return dg


@dataclass(frozen=True)
class RewardModel:
    coalition: Mapping[int, ScalarFunction]
    influence: Mapping[Edge, ScalarFunction] = field(default_factory=dict)
    aggregation: Mapping[int, str] = field(default_factory=dict)
    combination: Mapping[int, str] = field(default_factory=dict)
    ghost_influence: Mapping[int, Tuple[float, ...]] = field(default_factory=dict)

    def restrict(self, nodes: Iterable[int], edges: Iterable[Edge]) -> "RewardModel":
        keep = set(nodes)
        keep_edges = set(edges)
        return RewardModel(
            coalition={k: v for k, v in self.coalition.items() if k in keep},
            influence={e: v for e, v in self.influence.items() if e in keep_edges},
            aggregation={k: v for k, v in self.aggregation.items() if k in keep},
            combination={k: v for k, v in self.combination.items() if k in keep},
            ghost_influence={k: v for k, v in self.ghost_influence.items() if k in keep},
        )

    def with_ghosts(self, extra: Mapping[int, Sequence[float]]) -> "RewardModel":
        ghosts = {k: tuple(v) for k, v in self.ghost_influence.items()}
        for node_id, values in extra.items():
            if values:
                ghosts[node_id] = ghosts.get(node_id, ()) + tuple(float(v) for v in values)
        return replace(self, ghost_influence=ghosts)


@dataclass(frozen=True)
class Fleet:
    size: int

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError("fleet_size_must_be_positive")


@dataclass(frozen=True)
class Mission:
    graph: TaskGraph
    reward: RewardModel
    fleet: Fleet
    makespan: float
    name: str = "mission"


def source_node() -> TaskNode:
    return TaskNode(id=SOURCE, duration=0.0, label="source", kind="source")


def validate_graph(g: TaskGraph) -> List[str]:
    """Return one message per violated graph rule; an empty list means the graph is well formed."""
    violations: List[str] = []
    ids = [n.id for n in g.nodes]
    seen = set()
    for node_id in ids:
        if node_id in seen:
            violations.append(f"duplicate node {node_id}")
        seen.add(node_id)
    if SOURCE not in seen:
        violations.append("missing source 0")

    for node in g.nodes:
        if node.kind == "source" and node.duration != 0:
            violations.append(f"source duration {node.id}")
        if node.kind == "task" and not node.duration >= 0:
            violations.append(f"negative duration {node.id}")
    if SOURCE in seen and g.node(SOURCE).kind != "source":
        violations.append("node 0 is not a source")

    for tail, head in g.edges:
        if tail not in seen or head not in seen:
            violations.append(f"unknown endpoint {tail}->{head}")
            continue
        if g.node(head).kind == "source":
            violations.append(f"source incoming {tail}->{head}")

    dg = g.to_networkx()
    for component in nx.strongly_connected_components(dg):
        if len(component) > 1:
            members = ",".join(str(n) for n in sorted(component))
            violations.append(f"cycle {{{members}}}")
    for node_id in nx.nodes_with_selfloops(dg):
        violations.append(f"cycle {{{node_id}}}")

    for node in g.nodes:
        if node.kind == "task" and not g.predecessors(node.id):
            violations.append(f"orphan {node.id}")

    for (tail, head), value in g.travel_time.items():
        if value < 0:
            violations.append(f"negative travel {tail}->{head}")
        if tail == head and value != 0:
            violations.append(f"nonzero self travel {tail}")
    for (tail, head), cap in g.edge_capacity.items():
        if not 0 < cap <= 1:
            violations.append(f"capacity out of range {tail}->{head}")
    return violations
