from __future__ import annotations

from typing import Dict, List, Sequence

from taskflow.flow_solver import IntegerAllocation, Schedule
from taskflow.mission_model import Fleet, TaskGraph
from taskflow.testbed_schemas import TaskOutcome

EPS = 1e-6


def check_schedule(
    g: TaskGraph,
    schedule: Schedule,
    alloc: IntegerAllocation,
    fleet: Fleet,
    makespan: float,
    eps: float = EPS,
) -> List[str]:
    """Robot-level legality of a schedule; returns one message per broken constraint."""
    violations: List[str] = []
    if len(schedule.robot_paths) > fleet.size:
        violations.append("more robots than the fleet")

    visits: Dict[int, int] = {}
    arrivals: Dict[int, List[float]] = {}
    for robot, path in schedule.robot_paths.items():
        here = schedule.robot_origin.get(robot)
        if here is None or here not in g.source_ids:
            violations.append(f"robot {robot} has no source origin")
            continue
        ready = 0.0
        for task in path:
            if (here, task) not in set(g.edges):
                violations.append(f"robot {robot} leaves the graph {here}->{task}")
            if task not in schedule.start:
                violations.append(f"robot {robot} visits unscheduled task {task}")
                break
            arrival = ready + g.travel(here, task)
            arrivals.setdefault(task, []).append(arrival)
            if schedule.start[task] < arrival - eps:
                violations.append(f"robot {robot} cannot reach {task} in time")
            visits[task] = visits.get(task, 0) + 1
            ready = schedule.finish[task]
            here = task

    for task, start in schedule.start.items():
        finish = schedule.finish.get(task)
        if finish is None or abs(finish - start - g.duration(task)) > eps:
            violations.append(f"duration {task}")
            continue
        if finish > makespan + eps:
            violations.append(f"makespan {task}")
        if visits.get(task, 0) != alloc.coalition_size.get(task, 0):
            violations.append(f"coalition size {task}")
        bounds = list(arrivals.get(task, []))
        for i in g.predecessors(task):
            if i in schedule.finish:
                bounds.append(schedule.finish[i])
                if start < schedule.finish[i] - eps:
                    violations.append(f"precedence {i}->{task}")
        if bounds and start > max(bounds) + eps:
            violations.append(f"late start {task}")
    return violations


def check_execution(
    g: TaskGraph,
    executions: Sequence[TaskOutcome],
    fleet: Fleet,
    makespan: float,
    eps: float = EPS,
) -> List[str]:
    """Task-level legality of an executed mission trace."""
    violations: List[str] = []
    by_task: Dict[int, TaskOutcome] = {}
    for item in executions:
        if item.task in by_task:
            violations.append(f"task {item.task} executed twice")
        by_task[item.task] = item

    for item in executions:
        if abs(item.finish - item.start - g.duration(item.task)) > eps:
            violations.append(f"duration {item.task}")
        if item.finish > makespan + eps:
            violations.append(f"makespan {item.task}")
        for i in g.predecessors(item.task):
            upstream = by_task.get(i)
            if upstream is not None and item.start < upstream.finish - eps:
                violations.append(f"precedence {i}->{item.task}")

    events = sorted(
        [(item.finish, 0, -item.coalition) for item in executions]
        + [(item.start, 1, item.coalition) for item in executions]
    )
    busy = 0
    for _, _, delta in events:
        busy += delta
        if busy > fleet.size:
            violations.append("more robots busy than the fleet")
            break
    return violations
