from __future__ import annotations

import logging
import time
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

from taskflow.error_models import ErrorDraw, apply_error
from taskflow.flow_solver import FlowSolution, extract_schedule, round_flows, solve_offline
from taskflow.graph_ops import topo_order
from taskflow.greedy_solver import solve_greedy
from taskflow.mission_model import SOURCE, Mission
from taskflow.mission_schemas import SolverConfig
from taskflow.online_solver import Running, artificial_source, init_online, record_starts, step
from taskflow.reward_engine import eval_rewards, eval_task_reward
from taskflow.testbed_schemas import ErrorModel, StepTrace, TaskOutcome, TrialRecord

logger = logging.getLogger(__name__)

OPEN_LOOP = ("offline", "greedy", "clairvoyant-off")
CLOSED_LOOP = ("online", "clairvoyant-on")


def _planned_rewards(solution: FlowSolution, coalition: Dict[int, int], n: int) -> Dict[int, float]:
    if solution.graph is None or solution.reward is None or not solution.graph.task_ids:
        return {}
    fractions = {j: coalition.get(j, 0) / n for j in solution.graph.task_ids}
    return eval_rewards(solution.graph, solution.reward, fractions)


def _open_loop(
    mission: Mission,
    solver: str,
    draw: ErrorDraw,
    planner_model,
    cfg: SolverConfig,
    seed: int,
) -> Tuple[List[TaskOutcome], List[StepTrace], float, List[int]]:
    g, n = mission.graph, mission.fleet.size
    started = time.perf_counter()
    if solver == "greedy":
        solution = solve_greedy(g, planner_model, mission.fleet, mission.makespan, seed=seed, cfg=cfg)
    else:
        solution = solve_offline(g, planner_model, mission.fleet, mission.makespan, cfg)
    solve_time = time.perf_counter() - started
    if solution.graph is None or not solution.graph.task_ids:
        return [], [], solve_time, list(solution.removed)

    alloc = round_flows(solution.graph, solution, mission.fleet)
    schedule = extract_schedule(solution.graph, alloc)
    predicted = _planned_rewards(solution, alloc.coalition_size, n)
    rank = {j: k for k, j in enumerate(topo_order(g))}
    observed: Dict[int, float] = {}
    outcomes: List[TaskOutcome] = []
    for task in sorted(schedule.finish, key=lambda j: (schedule.finish[j], rank[j])):
        size = alloc.coalition_size[task]
        observed[task] = eval_task_reward(g, draw.ground_truth, task, size / n, observed)
        outcomes.append(
            TaskOutcome(
                task=task,
                coalition=size,
                start=schedule.start[task],
                finish=schedule.finish[task],
                predicted=predicted.get(task, 0.0),
                observed=observed[task],
                failed=task in draw.failed,
            )
        )
    return outcomes, [], solve_time, list(solution.removed)


def _closed_loop(
    mission: Mission,
    draw: ErrorDraw,
    planner_model,
    cfg: SolverConfig,
) -> Tuple[List[TaskOutcome], List[StepTrace], float, List[int]]:
    g, n = mission.graph, mission.fleet.size
    planning = replace(mission, reward=planner_model)
    started = time.perf_counter()
    solution, state = init_online(planning, cfg)
    solve_time = time.perf_counter() - started
    pruned = set(solution.removed)

    rank = {j: k for k, j in enumerate(topo_order(g))}
    observed: Dict[int, float] = {}
    predicted: Dict[int, float] = {}
    running: Dict[int, Running] = {}
    outcomes: List[TaskOutcome] = []
    steps: List[StepTrace] = []
    now = 0.0

    while True:
        schedule_start: Dict[int, float] = {}
        schedule_finish: Dict[int, float] = {}
        coalition: Dict[int, int] = {}
        plan_rewards: Dict[int, float] = {}
        if solution.graph is not None and solution.graph.task_ids and solution.flow:
            robots = {SOURCE: state.free_robots}
            robots.update({artificial_source(q): run.coalition for q, run in state.in_progress.items()})
            alloc = round_flows(solution.graph, solution, mission.fleet, source_robots=robots)
            schedule = extract_schedule(solution.graph, alloc)
            plan_rewards = _planned_rewards(solution, alloc.coalition_size, n)
            for task, start in schedule.start.items():
                if task in running:
                    continue
                schedule_start[task] = now + start
                schedule_finish[task] = now + schedule.finish[task]
                coalition[task] = alloc.coalition_size[task]

        candidates = [(run.finish, rank[q], q) for q, run in running.items()]
        candidates += [(schedule_finish[j], rank[j], j) for j in schedule_finish]
        if not candidates:
            break
        t_next, _, event_task = min(candidates)

        starts = [
            Running(task=j, coalition=coalition[j], started=schedule_start[j], finish=schedule_finish[j])
            for j in sorted(schedule_start)
            if schedule_start[j] < t_next or j == event_task
        ]
        for run in starts:
            running[run.task] = run
            predicted[run.task] = plan_rewards.get(run.task, 0.0)
        state = record_starts(state, starts)

        run = running.pop(event_task)
        now = run.finish
        observed[event_task] = eval_task_reward(g, draw.ground_truth, event_task, run.coalition / n, observed)
        outcomes.append(
            TaskOutcome(
                task=event_task,
                coalition=run.coalition,
                start=run.started,
                finish=run.finish,
                predicted=predicted.get(event_task, 0.0),
                observed=observed[event_task],
                failed=event_task in draw.failed,
            )
        )
        zeroed_before = len(state.zeroed)
        started = time.perf_counter()
        solution, state = step(state, event_task, observed[event_task], now)
        solve_time += time.perf_counter() - started
        pruned.update(solution.removed)
        steps.append(
            StepTrace(
                iteration=state.iteration,
                time=now,
                completed_task=event_task,
                observed_reward=observed[event_task],
                zeroed=list(state.zeroed[zeroed_before:]),
                pruned=list(solution.removed),
                origin=solution.origin,
                predicted_objective=solution.objective,
            )
        )
    executed = {o.task for o in outcomes}
    return outcomes, steps, solve_time, sorted(pruned - executed)


def simulate_mission(
    mission: Mission,
    solver: str,
    em: Optional[ErrorModel] = None,
    seed: int = 0,
    cfg: Optional[SolverConfig] = None,
    draw: Optional[ErrorDraw] = None,
) -> TrialRecord:
    """Plan and execute one mission, observing rewards from the ground-truth model."""
    em = em or ErrorModel()
    cfg = cfg or SolverConfig(seed=seed)
    draw = draw or apply_error(mission.reward, em)
    planner_model = draw.ground_truth if solver.startswith("clairvoyant") else draw.planner

    if solver in OPEN_LOOP:
        outcomes, steps, solve_time, pruned = _open_loop(mission, solver, draw, planner_model, cfg, seed)
    elif solver in CLOSED_LOOP:
        outcomes, steps, solve_time, pruned = _closed_loop(mission, draw, planner_model, cfg)
    else:
        raise ValueError(f"unknown_solver:{solver}")

    zeroed = sorted({z for s in steps for z in s.zeroed})
    record = TrialRecord(
        mission=mission.name,
        solver=solver,  # type: ignore[arg-type]
        tasks=outcomes,
        steps=steps,
        total_reward=sum(o.observed for o in outcomes),
        predicted_total=sum(o.predicted for o in outcomes),
        solve_time_s=solve_time,
        makespan=mission.makespan,
        failed_tasks=sorted(draw.failed),
        zeroed_tasks=zeroed,
        pruned_tasks=pruned,
    )
    logger.debug("simulated %s with %s: total=%.6f", mission.name, solver, record.total_reward)
    return record
