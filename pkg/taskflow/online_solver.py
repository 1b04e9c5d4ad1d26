from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from taskflow.flow_solver import (
    FlowSolution,
    check_flow_feasibility,
    empty_solution,
    flows_from_allocation,
    round_flows,
    solve_flow,
)
from taskflow.graph_ops import prune_graph
from taskflow.mission_model import SOURCE, Edge, Mission, RewardModel, TaskGraph, TaskNode, eval_scalar, source_node
from taskflow.mission_schemas import SolverConfig
from taskflow.reward_engine import RewardProgram

logger = logging.getLogger(__name__)

History = Tuple[Tuple[FlowSolution, TaskGraph], ...]


def artificial_source(task: int) -> int:
    return -task


@dataclass(frozen=True)
class Running:
    task: int
    coalition: int
    started: float
    finish: float


@dataclass(frozen=True)
class OnlineState:
    mission: Mission
    cfg: SolverConfig
    iteration: int = 0
    graph: Optional[TaskGraph] = None
    reward: Optional[RewardModel] = None
    completed: Mapping[int, float] = field(default_factory=dict)
    zeroed: Tuple[int, ...] = ()
    in_progress: Mapping[int, Running] = field(default_factory=dict)
    ghosts: Mapping[int, Tuple[float, ...]] = field(default_factory=dict)
    location: int = SOURCE
    now: float = 0.0
    history: History = ()
    pruned: Tuple[int, ...] = ()

    @property
    def pending(self) -> List[int]:
        settled = set(self.completed) | set(self.zeroed) | set(self.in_progress)
        return [j for j in self.mission.graph.task_ids if j not in settled]

    @property
    def source_shares(self) -> Dict[int, float]:
        n = self.mission.fleet.size
        return {artificial_source(q): run.coalition / n for q, run in sorted(self.in_progress.items())}

    @property
    def free_capacity(self) -> float:
        return max(0.0, 1.0 - sum(self.source_shares.values()))

    @property
    def free_robots(self) -> int:
        return self.mission.fleet.size - sum(run.coalition for run in self.in_progress.values())

    def node_partition(self) -> Tuple[Set[int], Set[int], Set[int]]:
        """Free source, in-progress sources and internal nodes of the current graph."""
        if self.graph is None:
            return set(), set(), set()
        sources = set(self.graph.source_ids)
        return sources & {SOURCE}, sources - {SOURCE}, set(self.graph.task_ids)


def _build_graph(state: OnlineState) -> Tuple[TaskGraph, RewardModel]:
    base = state.mission.graph
    n = state.mission.fleet.size
    running = dict(sorted(state.in_progress.items()))
    pending = set(state.pending)

    nodes: List[TaskNode] = [source_node()]
    for q, run in running.items():
        nodes.append(TaskNode(id=artificial_source(q), duration=0.0, label=f"coalition {q}", kind="source"))
        nodes.append(replace(base.node(q), duration=max(run.finish - state.now, 0.0)))
    nodes.extend(base.node(j) for j in sorted(pending))

    edges: Set[Edge] = {(i, j) for i, j in base.edges if j in pending and (i in pending or i in running)}
    edges.update((artificial_source(q), q) for q in running)
    with_parent = {j for _, j in edges}
    edges.update((SOURCE, j) for j in pending if j not in with_parent)
    if state.location != SOURCE:
        edges.update((SOURCE, j) for j in base.successors(state.location) if j in pending)

    travel: Dict[Edge, float] = {}
    for tail, head in edges:
        if tail == SOURCE:
            travel[(tail, head)] = base.travel(state.location, head)
        elif tail > 0:
            travel[(tail, head)] = base.travel(tail, head)
    capacity = {e: base.edge_capacity[e] for e in edges if e in base.edge_capacity and e[0] != SOURCE}
    for q, run in running.items():
        capacity[(artificial_source(q), q)] = run.coalition / n

    graph = TaskGraph(nodes=tuple(nodes), edges=tuple(sorted(edges)), travel_time=travel, edge_capacity=capacity)
    reward = state.mission.reward.restrict(graph.node_ids, graph.edges).with_ghosts(state.ghosts)
    return graph, reward


def _project(prior: FlowSolution, graph: TaskGraph, in_progress: Iterable[int]) -> Dict[Edge, float]:
    sources = {artificial_source(q): q for q in in_progress}
    prior_in: Dict[int, float] = {}
    for (_, head), value in prior.flow.items():
        prior_in[head] = prior_in.get(head, 0.0) + value
    candidate: Dict[Edge, float] = {}
    for tail, head in graph.edges:
        if tail in sources:
            value = prior_in.get(sources[tail], 0.0)
        elif tail == SOURCE:
            value = prior_in.get(head, 0.0)
        else:
            value = prior.flow.get((tail, head), 0.0)
        candidate[(tail, head)] = min(max(value, 0.0), graph.capacity((tail, head)))
    return candidate


def check_and_update(
    current: Tuple[FlowSolution, TaskGraph],
    history: Sequence[Tuple[FlowSolution, TaskGraph]],
    in_progress: Iterable[int],
    reward: RewardModel,
    free_capacity: float = 1.0,
    fixed_sources: Optional[Mapping[int, float]] = None,
) -> FlowSolution:
    """Return whichever of the current solution and the projections of earlier solutions scores best."""
    solution, graph = current
    in_progress = list(in_progress)
    program = RewardProgram(graph, reward)
    best_value = program.total(program.vector(solution.flow))
    best = replace(solution, objective=best_value)
    for k, (prior, _) in enumerate(history):
        candidate = _project(prior, graph, in_progress)
        if check_flow_feasibility(graph, candidate, free_capacity, fixed_sources):
            continue
        value = program.total(program.vector(candidate))
        if value > best_value + 1e-12:
            best_value = value
            best = FlowSolution(
                flow=candidate,
                objective=value,
                status="converged",
                origin=f"projected:{k}",
                graph=graph,
                reward=reward,
                removed=solution.removed,
            )
    return best


def _plan(state: OnlineState) -> Tuple[FlowSolution, TaskGraph, RewardModel, bool]:
    mission = state.mission
    graph, reward = _build_graph(state)
    pruned, pruned_rm, removed = prune_graph(graph, reward, mission.makespan - state.now, keep=state.in_progress)
    fixed = state.source_shares
    free = state.free_capacity
    if not any(j not in state.in_progress for j in pruned.task_ids):
        if not pruned.task_ids:
            return empty_solution(pruned, pruned_rm, removed), pruned, pruned_rm, False
        program = RewardProgram(pruned, pruned_rm)
        flow = {(s, -s): share for s, share in fixed.items()}
        idle = FlowSolution(
            flow=flow,
            objective=program.total(program.vector(flow)),
            status="converged",
            graph=pruned,
            reward=pruned_rm,
            removed=tuple(removed),
        )
        return idle, pruned, pruned_rm, False

    cfg = state.cfg.model_copy(update={"seed": state.cfg.seed + state.iteration})
    fresh = solve_flow(pruned, pruned_rm, cfg, free_capacity=free, fixed_sources=fixed)
    robots = {SOURCE: state.free_robots}
    robots.update({artificial_source(q): run.coalition for q, run in state.in_progress.items()})
    alloc = round_flows(pruned, fresh, mission.fleet, source_robots=robots)
    rounded = FlowSolution(
        flow=flows_from_allocation(alloc, mission.fleet),
        objective=fresh.objective,
        status=fresh.status,
        graph=pruned,
        reward=pruned_rm,
        removed=tuple(removed),
    )
    best = check_and_update((rounded, pruned), state.history, state.in_progress, pruned_rm, free, fixed)
    return best, pruned, pruned_rm, True


def init_online(mission: Mission, cfg: SolverConfig) -> Tuple[FlowSolution, OnlineState]:
    state = OnlineState(mission=mission, cfg=cfg)
    solution, graph, reward, planned = _plan(state)
    history: History = ((solution, graph),) if planned else ()
    state = replace(state, graph=graph, reward=reward, history=history, pruned=solution.removed)
    logger.info("online plan 0: objective=%.6f pruned=%s", solution.objective, list(solution.removed))
    return solution, state


def record_starts(state: OnlineState, starts: Iterable[Running]) -> OnlineState:
    """Register coalitions that have started executing so later steps treat them as in progress."""
    pending = set(state.pending)
    running = dict(state.in_progress)
    for run in starts:
        if run.task not in pending:
            raise KeyError("task_not_pending")
        running[run.task] = run
    return replace(state, in_progress=running)


def step(state: OnlineState, completed_task: int, observed_reward: float, now: float) -> Tuple[FlowSolution, OnlineState]:
    mission = state.mission
    base, rm = mission.graph, mission.reward
    if not base.is_task(completed_task):
        raise KeyError("unknown_task")
    if completed_task not in state.in_progress:
        raise ValueError("task_not_in_progress")
    if observed_reward < 0:
        raise ValueError("negative_observed_reward")

    running = {q: run for q, run in state.in_progress.items() if q != completed_task}
    completed = dict(state.completed)
    completed[completed_task] = observed_reward
    settled = set(completed) | set(state.zeroed)
    pending = {j for j in base.task_ids if j not in settled and j not in running}

    blockers = {completed_task} | set(running)
    zeroed_now = sorted({i for b in blockers for i in base.predecessors(b) if i in pending})
    zeroed = state.zeroed + tuple(zeroed_now)
    done = set(completed) | set(zeroed)

    ghosts: Dict[int, Tuple[float, ...]] = dict(state.ghosts)
    removals = [(completed_task, observed_reward)] + [(z, 0.0) for z in zeroed_now]
    for tail, value in removals:
        for head in base.successors(tail):
            fn = rm.influence.get((tail, head))
            if head in done or fn is None:
                continue
            ghosts[head] = ghosts.get(head, ()) + (eval_scalar(fn, value),)

    if zeroed_now:
        logger.info("online step: tasks %s can no longer run and score zero", zeroed_now)

    state = replace(
        state,
        completed=completed,
        zeroed=zeroed,
        in_progress=running,
        ghosts=ghosts,
        location=completed_task,
        now=now,
    )
    solution, graph, reward, planned = _plan(state)
    iteration = state.iteration + 1 if planned else state.iteration
    history = state.history + ((solution, graph),) if planned else state.history
    state = replace(
        state,
        iteration=iteration,
        graph=graph,
        reward=reward,
        history=history,
        pruned=solution.removed,
    )
    logger.info(
        "online step %d: completed=%d observed=%.6f objective=%.6f origin=%s",
        iteration,
        completed_task,
        observed_reward,
        solution.objective,
        solution.origin,
    )
    return solution, state
