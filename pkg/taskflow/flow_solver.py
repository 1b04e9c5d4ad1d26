from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from taskflow.graph_ops import prune_graph, topo_order
from taskflow.mission_model import SOURCE, Edge, Fleet, RewardModel, TaskGraph
from taskflow.mission_schemas import SolverConfig
from taskflow.reward_engine import RewardProgram

logger = logging.getLogger(__name__)

FEASIBILITY_EPS = 1e-6
SNAP = 1e-9


@dataclass(frozen=True)
class FlowSolution:
    flow: Dict[Edge, float]
    objective: float
    status: str
    origin: str = "fresh"
    graph: Optional[TaskGraph] = None
    reward: Optional[RewardModel] = None
    removed: Tuple[int, ...] = ()

    def inflow(self, node_id: int) -> float:
        return sum(v for (_, head), v in self.flow.items() if head == node_id)


@dataclass(frozen=True)
class IntegerAllocation:
    robots_on_edge: Dict[Edge, int]
    coalition_size: Dict[int, int]


@dataclass(frozen=True)
class Schedule:
    robot_paths: Dict[int, List[int]] = field(default_factory=dict)
    robot_origin: Dict[int, int] = field(default_factory=dict)
    start: Dict[int, float] = field(default_factory=dict)
    finish: Dict[int, float] = field(default_factory=dict)


def empty_solution(g: Optional[TaskGraph] = None, rm: Optional[RewardModel] = None, removed=()) -> FlowSolution:
    return FlowSolution(flow={}, objective=0.0, status="infeasible-input", graph=g, reward=rm, removed=tuple(removed))


def central_gradient(fun: Callable[[np.ndarray], float], x: np.ndarray, step: float) -> np.ndarray:
    grad = np.zeros_like(x)
    for k in range(x.size):
        forward = x.copy()
        backward = x.copy()
        forward[k] += step
        backward[k] -= step
        grad[k] = (fun(forward) - fun(backward)) / (2.0 * step)
    return grad


class _FlowProblem:
    """Variable layout and linear constraints for one flow NLP.

    Edges leaving a fixed source are constants; every other edge is a variable.
    """

    def __init__(self, g: TaskGraph, rm: RewardModel, free_capacity: float, fixed_sources: Mapping[int, float]):
        self.graph = g
        self.free_capacity = max(free_capacity, 0.0)
        self.fixed_sources = dict(fixed_sources)
        self.program = RewardProgram(g, rm)
        self.edges = self.program.edges
        self.var_index = [k for k, e in enumerate(self.edges) if e[0] not in self.fixed_sources]
        self.base = np.zeros(len(self.edges))
        for k, (tail, _) in enumerate(self.edges):
            if tail in self.fixed_sources:
                self.base[k] = self.fixed_sources[tail]
        self.upper = np.array([g.capacity(self.edges[k]) for k in self.var_index])
        self.order = [n for n in topo_order(g) if g.is_task(n)]
        self._build_constraints()

    def _build_constraints(self) -> None:
        position = {k: p for p, k in enumerate(self.var_index)}
        rows: List[np.ndarray] = []
        bounds: List[float] = []
        free_out = np.zeros(len(self.var_index))
        for k, (tail, _) in enumerate(self.edges):
            if tail == SOURCE and k in position:
                free_out[position[k]] = 1.0
        if free_out.any():
            rows.append(free_out)
            bounds.append(self.free_capacity)
        for node_id in self.order:
            row = np.zeros(len(self.var_index))
            fixed_in = 0.0
            has_out = False
            for k, (tail, head) in enumerate(self.edges):
                if tail == node_id and k in position:
                    row[position[k]] += 1.0
                    has_out = True
                elif head == node_id:
                    if k in position:
                        row[position[k]] -= 1.0
                    else:
                        fixed_in += self.base[k]
            if has_out:
                rows.append(row)
                bounds.append(fixed_in)
        self.A = np.array(rows) if rows else np.zeros((0, len(self.var_index)))
        self.b = np.array(bounds)

    def full(self, x: np.ndarray) -> np.ndarray:
        flow = self.base.copy()
        flow[self.var_index] = x
        return flow

    def objective(self, x: np.ndarray, gated: bool) -> float:
        return self.program.total(self.full(x), gated=gated)

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        flow = self.base.copy()
        var = set(self.var_index)
        out_edges: Dict[int, List[int]] = {}
        for k, (tail, _) in enumerate(self.edges):
            if k in var:
                out_edges.setdefault(tail, []).append(k)
        source_edges = out_edges.get(SOURCE, [])
        if source_edges:
            weights = rng.uniform(size=len(source_edges))
            weights = weights / weights.sum() if weights.sum() > 0 else np.full(len(source_edges), 1.0 / len(source_edges))
            for k, w in zip(source_edges, weights):
                flow[k] = w * self.free_capacity
        for node_id in self.order:
            outs = out_edges.get(node_id, [])
            if not outs:
                continue
            available = sum(flow[k] for k, (_, head) in enumerate(self.edges) if head == node_id)
            weights = rng.uniform(size=len(outs))
            weights = weights / weights.sum() if weights.sum() > 0 else np.full(len(outs), 1.0 / len(outs))
            for k, w in zip(outs, weights):
                flow[k] = w * available
        x = flow[self.var_index]
        return self.repair(np.minimum(x, self.upper))

    def repair(self, x: np.ndarray) -> np.ndarray:
        """Clip to bounds and scale outflows down until every flow constraint holds."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, self.upper)
        x[x < SNAP] = 0.0
        flow = self.full(x)
        var = set(self.var_index)
        source_edges = [k for k, (tail, _) in enumerate(self.edges) if tail == SOURCE and k in var]
        total = sum(flow[k] for k in source_edges)
        if total > self.free_capacity:
            scale = self.free_capacity / total if total > 0 else 0.0
            for k in source_edges:
                flow[k] *= scale
        for node_id in self.order:
            outs = [k for k, (tail, _) in enumerate(self.edges) if tail == node_id and k in var]
            if not outs:
                continue
            available = sum(flow[k] for k, (_, head) in enumerate(self.edges) if head == node_id)
            out_total = sum(flow[k] for k in outs)
            if out_total > available:
                scale = available / out_total if out_total > 0 else 0.0
                for k in outs:
                    flow[k] *= scale
        return flow[self.var_index]

    def to_mapping(self, x: np.ndarray) -> Dict[Edge, float]:
        flow = self.full(x)
        return {e: float(flow[k]) for k, e in enumerate(self.edges)}


def solve_flow(
    g: TaskGraph,
    rm: RewardModel,
    cfg: SolverConfig,
    free_capacity: float = 1.0,
    fixed_sources: Optional[Mapping[int, float]] = None,
) -> FlowSolution:
    """Maximize total task reward over edge flows of an already pruned graph.

    ``free_capacity`` bounds the outflow of node 0; each entry of ``fixed_sources`` pins the
    outflow of that source to the given fraction.
    """
    if not g.task_ids:
        return empty_solution(g, rm)
    problem = _FlowProblem(g, rm, free_capacity, fixed_sources or {})
    if not problem.var_index:
        x = np.zeros(0)
        return FlowSolution(
            flow=problem.to_mapping(x),
            objective=problem.objective(x, gated=True),
            status="converged",
            graph=g,
            reward=rm,
        )

    rng = np.random.default_rng(cfg.seed)

    def negated(x: np.ndarray) -> float:
        return -problem.objective(x, gated=False)

    def negated_grad(x: np.ndarray) -> np.ndarray:
        return central_gradient(negated, x, cfg.gradient_step)

    constraints = []
    if problem.A.shape[0]:
        constraints.append(
            {
                "type": "ineq",
                "fun": lambda x: problem.b - problem.A @ x,
                "jac": lambda x: -problem.A,
            }
        )
    bounds = [(0.0, float(u)) for u in problem.upper]

    best_x: Optional[np.ndarray] = None
    best_value = -math.inf
    best_status = "converged"
    for restart in range(cfg.restarts):
        start = problem.random_start(rng)
        start_value = problem.objective(start, gated=True)
        result = minimize(
            negated,
            start,
            jac=negated_grad,
            method="SLSQP",
            bounds=bounds,
            constraints=constraints,
            options={"maxiter": cfg.max_iters, "ftol": cfg.tol},
        )
        candidate = problem.repair(result.x)
        value = problem.objective(candidate, gated=True)
        status = "iteration-limit" if result.status == 9 else "converged"
        if start_value > value:
            candidate, value = start, start_value
        logger.debug("restart %d: objective=%.6f slsqp_status=%s", restart, value, result.status)
        if value > best_value:
            best_x, best_value, best_status = candidate, value, status

    assert best_x is not None
    return FlowSolution(
        flow=problem.to_mapping(best_x),
        objective=best_value,
        status=best_status,
        graph=g,
        reward=rm,
    )


def solve_offline(
    g: TaskGraph,
    rm: RewardModel,
    fleet: Fleet,
    makespan: float,
    cfg: SolverConfig,
) -> FlowSolution:
    pruned, pruned_rm, removed = prune_graph(g, rm, makespan)
    if not pruned.task_ids:
        logger.info("offline solve: nothing left after pruning %d tasks", len(removed))
        return empty_solution(pruned, pruned_rm, removed)
    solution = solve_flow(pruned, pruned_rm, cfg)
    logger.info(
        "offline solve: tasks=%d pruned=%d objective=%.6f status=%s",
        len(pruned.task_ids),
        len(removed),
        solution.objective,
        solution.status,
    )
    return FlowSolution(
        flow=solution.flow,
        objective=solution.objective,
        status=solution.status,
        graph=pruned,
        reward=pruned_rm,
        removed=tuple(removed),
    )


def check_flow_feasibility(
    g: TaskGraph,
    flow: Mapping[Edge, float],
    free_capacity: float = 1.0,
    fixed_sources: Optional[Mapping[int, float]] = None,
    eps: float = FEASIBILITY_EPS,
) -> List[str]:
    fixed = dict(fixed_sources or {})
    violations: List[str] = []
    edge_set = set(g.edges)
    for edge, value in flow.items():
        if edge not in edge_set:
            violations.append(f"unknown edge {edge[0]}->{edge[1]}")
            continue
        if value < -eps:
            violations.append(f"negative flow {edge[0]}->{edge[1]}")
        if value > g.capacity(edge) + eps:
            violations.append(f"capacity {edge[0]}->{edge[1]}")
    out_total: Dict[int, float] = {}
    in_total: Dict[int, float] = {}
    for (tail, head), value in flow.items():
        out_total[tail] = out_total.get(tail, 0.0) + value
        in_total[head] = in_total.get(head, 0.0) + value
    if out_total.get(SOURCE, 0.0) > free_capacity + eps:
        violations.append("source outflow")
    for source, share in fixed.items():
        if abs(out_total.get(source, 0.0) - share) > eps:
            violations.append(f"fixed source {source}")
    for node_id in g.task_ids:
        if out_total.get(node_id, 0.0) > in_total.get(node_id, 0.0) + eps:
            violations.append(f"conservation {node_id}")
    return violations


def _split_units(targets: List[float], caps: List[int], limit: int) -> List[int]:
    """Place up to ``limit`` robots one at a time where the absolute error drops the most.

    Stops once every further unit would raise the error; a unit that leaves it unchanged is still placed.
    Ties go to the first edge.
    """
    counts = [0] * len(targets)
    for _ in range(limit):
        best, best_gain = -1, -math.inf
        for k, target in enumerate(targets):
            if counts[k] >= caps[k]:
                continue
            gain = abs(counts[k] - target) - abs(counts[k] + 1 - target)
            if gain > best_gain + 1e-12:
                best, best_gain = k, gain
        if best < 0 or best_gain < -1e-12:
            break
        counts[best] += 1
    return counts


def round_flows(
    g: TaskGraph,
    f: FlowSolution,
    fleet: Fleet,
    source_robots: Optional[Mapping[int, int]] = None,
) -> IntegerAllocation:
    """Convert fractional flows to integer robot counts, node by node in topological order."""
    n = fleet.size
    available: Dict[int, int] = {s: 0 for s in g.source_ids}
    if source_robots is None:
        available[SOURCE] = n
    else:
        available.update(source_robots)
    robots: Dict[Edge, int] = {}
    coalition: Dict[int, int] = {}
    for node_id in topo_order(g):
        if g.is_task(node_id):
            coalition[node_id] = sum(robots.get((i, node_id), 0) for i in g.predecessors(node_id))
            have = coalition[node_id]
        else:
            have = available.get(node_id, 0)
        outs = [(node_id, head) for head in g.successors(node_id)]
        if not outs:
            continue
        targets = [n * f.flow.get(e, 0.0) for e in outs]
        caps = [int(math.floor(g.capacity(e) * n + 1e-9)) for e in outs]
        for e, count in zip(outs, _split_units(targets, caps, min(have, sum(caps)))):
            robots[e] = count
    return IntegerAllocation(robots_on_edge=robots, coalition_size=coalition)


def flows_from_allocation(alloc: IntegerAllocation, fleet: Fleet) -> Dict[Edge, float]:
    return {e: count / fleet.size for e, count in alloc.robots_on_edge.items()}


def extract_schedule(g: TaskGraph, alloc: IntegerAllocation) -> Schedule:
    residual = {e: c for e, c in alloc.robots_on_edge.items() if c > 0}
    paths: Dict[int, List[int]] = {}
    origin: Dict[int, int] = {}
    robot = 0
    for source in g.source_ids:
        leaving = sum(c for (tail, _), c in residual.items() if tail == source)
        for _ in range(leaving):
            here, path = source, []
            while True:
                step = next((head for head in g.successors(here) if residual.get((here, head), 0) > 0), None)
                if step is None:
                    break
                residual[(here, step)] -= 1
                path.append(step)
                here = step
            paths[robot] = path
            origin[robot] = source
            robot += 1
    assert not any(residual.values()), "path decomposition left unused robots on edges"

    start: Dict[int, float] = {}
    finish: Dict[int, float] = {}
    for node_id in topo_order(g):
        if not g.is_task(node_id) or alloc.coalition_size.get(node_id, 0) <= 0:
            continue
        ready = 0.0
        for i in g.predecessors(node_id):
            upstream = finish.get(i, 0.0)
            if alloc.robots_on_edge.get((i, node_id), 0) > 0:
                ready = max(ready, upstream + g.travel(i, node_id))
            elif i in finish:
                ready = max(ready, upstream)
        start[node_id] = ready
        finish[node_id] = ready + g.duration(node_id)
    return Schedule(robot_paths=paths, robot_origin=origin, start=start, finish=finish)
