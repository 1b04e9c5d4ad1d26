from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Callable, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from taskflow import __version__
from taskflow.exact_oracle import GuardViolation, OracleResult, TinySchedule, enumerate_integer_flows, enumerate_schedules
from taskflow.flow_solver import FlowSolution, extract_schedule, round_flows, solve_offline
from taskflow.greedy_solver import solve_greedy
from taskflow.mission_generator import generate_mission
from taskflow.mission_model import Mission
from taskflow.mission_schemas import (
    EdgeFlow,
    EdgeRobots,
    ErrorResponse,
    RobotRoute,
    SolutionFile,
    SolverConfig,
    TaskPrediction,
    TaskTiming,
)
from taskflow.mission_store import load_mission, read_json, save_mission, write_json
from taskflow.report import render_report
from taskflow.reward_engine import eval_rewards
from taskflow.simulator import simulate_mission
from taskflow.sweep import sweep_to_files
from taskflow.testbed_schemas import ErrorModel, ExperimentSpec, GeneratorConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_GUARD = 4

ERROR_KINDS = {"none": "none", "failure": "task_failure", "perturbation": "model_perturbation"}


class UsageError(Exception):
    pass


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return number


def _positive_float(value: str) -> float:
    number = float(value)
    if not number > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return number


def _non_negative_float(value: str) -> float:
    number = float(value)
    if number < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return number


def _probability(value: str) -> float:
    number = float(value)
    if not 0 <= number <= 1:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return number


def _fail(error: str, status_code: int, details: Optional[str] = None) -> int:
    body = ErrorResponse(error=error, details=details, status_code=status_code).model_dump(exclude_none=True)
    print(json.dumps(body), file=sys.stderr)
    return status_code


def _error_parts(exc: BaseException) -> tuple:
    if isinstance(exc, ValidationError):
        return "invalid_input", "; ".join(f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors())
    if isinstance(exc, json.JSONDecodeError):
        return "unparseable_json", str(exc)
    if isinstance(exc, OSError):
        return "io_error", str(exc)
    args = [str(a) for a in exc.args] or [type(exc).__name__]
    return args[0], "; ".join(args[1:]) or None


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig.from_env(
        restarts=getattr(args, "restarts", None),
        max_iters=getattr(args, "max_iters", None),
        tol=getattr(args, "tol", None),
        seed=getattr(args, "seed", None),
    )


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = GeneratorConfig(
        num_tasks=args.tasks,
        fleet_size=args.agents,
        makespan_fraction=args.makespan_frac,
        edge_density=args.density,
        num_layers=args.layers,
        duration_min=args.duration_min,
        duration_max=args.duration_max,
        travel_min=args.travel_min,
        travel_max=args.travel_max,
        capacity_probability=args.capacity_prob,
        preset=args.preset,
        seed=args.seed,
    )
    mission = generate_mission(cfg)
    save_mission(mission, args.output)
    print(f"tasks={len(mission.graph.task_ids)} edges={len(mission.graph.edges)} makespan={mission.makespan:.3f}")
    return EXIT_OK


def _flow_payload(mission: Mission, solver: str, solution: FlowSolution, elapsed: float) -> SolutionFile:
    payload = SolutionFile(
        mission=mission.name,
        solver=solver,
        status=solution.status,
        objective=solution.objective,
        solve_time_s=elapsed,
        flow=[EdgeFlow(tail=t, head=h, fraction=v) for (t, h), v in sorted(solution.flow.items())],
    )
    graph = solution.graph
    if graph is not None and graph.task_ids and solution.reward is not None:
        alloc = round_flows(graph, solution, mission.fleet)
        schedule = extract_schedule(graph, alloc)
        fractions = {j: alloc.coalition_size.get(j, 0) / mission.fleet.size for j in graph.task_ids}
        predicted = eval_rewards(graph, solution.reward, fractions)
        payload.allocation = [EdgeRobots(tail=t, head=h, robots=c) for (t, h), c in sorted(alloc.robots_on_edge.items())]
        payload.routes = [
            RobotRoute(robot=r, origin=schedule.robot_origin[r], tasks=path) for r, path in sorted(schedule.robot_paths.items())
        ]
        payload.timing = [
            TaskTiming(task=j, coalition=alloc.coalition_size[j], start=schedule.start[j], finish=schedule.finish[j])
            for j in sorted(schedule.start)
        ]
        payload.rewards = [TaskPrediction(task=j, reward=predicted[j]) for j in graph.task_ids]
    payload.rewards += [TaskPrediction(task=j, reward=0.0, pruned=True) for j in solution.removed]
    payload.rewards.sort(key=lambda p: p.task)
    return payload


def _oracle_payload(mission: Mission, solver: str, result: OracleResult, elapsed: float) -> SolutionFile:
    payload = SolutionFile(
        mission=mission.name,
        solver=solver,
        status="converged" if result.exhaustive else "iteration-limit",
        objective=result.best_objective,
        solve_time_s=elapsed,
        nodes_explored=result.nodes_explored,
    )
    best = result.best_allocation
    if isinstance(best, TinySchedule):
        payload.routes = [RobotRoute(robot=r, origin=0, tasks=list(route)) for r, route in enumerate(best.routes)]
        payload.timing = [
            TaskTiming(
                task=j,
                coalition=sum(route.count(j) for route in best.routes),
                start=best.start[j],
                finish=best.finish[j],
            )
            for j in sorted(best.start)
        ]
    elif best is not None:
        payload.allocation = [
            EdgeRobots(tail=t, head=h, robots=c) for (t, h), c in sorted(best.robots_on_edge.items()) if c > 0
        ]
        payload.flow = [
            EdgeFlow(tail=t, head=h, fraction=c / mission.fleet.size) for (t, h), c in sorted(best.robots_on_edge.items())
        ]
    return payload


def cmd_solve(args: argparse.Namespace) -> int:
    mission = load_mission(args.mission)
    cfg = _solver_config(args)
    started = time.perf_counter()
    if args.solver == "offline":
        solution = solve_offline(mission.graph, mission.reward, mission.fleet, mission.makespan, cfg)
        payload = _flow_payload(mission, args.solver, solution, time.perf_counter() - started)
    elif args.solver == "greedy":
        solution = solve_greedy(mission.graph, mission.reward, mission.fleet, mission.makespan, seed=cfg.seed, cfg=cfg)
        payload = _flow_payload(mission, args.solver, solution, time.perf_counter() - started)
    else:
        oracle = enumerate_integer_flows if args.solver == "oracle-flow" else enumerate_schedules
        result = oracle(mission.graph, mission.reward, mission.fleet, mission.makespan)
        payload = _oracle_payload(mission, args.solver, result, time.perf_counter() - started)
    if args.output:
        write_json(payload, args.output)
    print(f"objective={payload.objective:.6f} status={payload.status} solve_time_s={payload.solve_time_s:.3f}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    mission = load_mission(args.mission)
    cfg = _solver_config(args)
    em = ErrorModel(kind=ERROR_KINDS[args.error], p=args.p, seed=args.seed)  # type: ignore[arg-type]
    record = simulate_mission(mission, args.solver, em, seed=args.seed, cfg=cfg)
    print(f"{'task':>6} {'robots':>6} {'expected':>10} {'actual':>10}")
    for outcome in record.tasks:
        flag = " failed" if outcome.failed else ""
        print(f"{outcome.task:>6} {outcome.coalition:>6} {outcome.predicted:>10.4f} {outcome.observed:>10.4f}{flag}")
    print(f"{'TOTAL':>6} {'':>6} {record.predicted_total:>10.4f} {record.total_reward:>10.4f}")
    if args.output:
        with Path(args.output).open("w", encoding="utf-8") as handle:
            handle.write(record.model_dump_json() + "\n")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    raw = read_json(args.spec)
    if isinstance(raw, dict) and not raw.get("levels"):
        raise UsageError("empty_levels")
    spec = ExperimentSpec.model_validate(raw)
    csv_path = args.csv or f"{spec.name}.csv"
    table = sweep_to_files(spec, csv_path, jsonl_path=args.jsonl, jobs=args.jobs)
    print(f"rows={len(table)} csv={csv_path}")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    mission = load_mission(args.mission)
    oracle = enumerate_integer_flows if args.kind == "flow" else enumerate_schedules
    started = time.perf_counter()
    result = oracle(mission.graph, mission.reward, mission.fleet, mission.makespan)
    elapsed = time.perf_counter() - started
    table = pd.DataFrame(
        [
            {
                "mission": mission.name,
                "kind": args.kind,
                "best_objective": result.best_objective,
                "nodes_explored": result.nodes_explored,
                "exhaustive": result.exhaustive,
                "solve_time_s": elapsed,
            }
        ]
    )
    if args.output:
        table.to_csv(args.output, index=False, float_format="%.6f")
    print(f"best_objective={result.best_objective:.6f} nodes_explored={result.nodes_explored}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    written = render_report(args.csv, args.out_dir)
    for path in written:
        print(path)
    return EXIT_OK


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--restarts", type=_positive_int)
    parser.add_argument("--max-iters", type=_positive_int)
    parser.add_argument("--tol", type=_positive_float)
    parser.add_argument("--seed", type=int, default=int(os.getenv("TASKFLOW_SEED", "0")))


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taskflow", description="Flow-based multi-robot task allocation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a random mission file")
    gen.add_argument("--tasks", type=_positive_int, required=True)
    gen.add_argument("--agents", type=_positive_int, required=True)
    gen.add_argument("--makespan-frac", type=_positive_float, default=0.6)
    gen.add_argument("--density", type=_probability, default=0.4)
    gen.add_argument("--layers", type=_positive_int)
    gen.add_argument("--duration-min", type=_non_negative_float, default=1.0)
    gen.add_argument("--duration-max", type=_non_negative_float, default=10.0)
    gen.add_argument("--travel-min", type=_non_negative_float, default=0.0)
    gen.add_argument("--travel-max", type=_non_negative_float, default=2.0)
    gen.add_argument("--capacity-prob", type=_probability, default=0.0)
    gen.add_argument("--preset", choices=["random", "advanced"], default="random")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--output", required=True)
    gen.set_defaults(handler=cmd_generate)

    solve = sub.add_parser("solve", help="plan a mission")
    solve.add_argument("mission")
    solve.add_argument("--solver", choices=["offline", "greedy", "oracle-flow", "oracle-schedule"], default="offline")
    _add_solver_flags(solve)
    solve.add_argument("-o", "--output")
    solve.set_defaults(handler=cmd_solve)

    sim = sub.add_parser("simulate", help="plan and execute a mission")
    sim.add_argument("mission")
    sim.add_argument(
        "--solver",
        choices=["offline", "greedy", "online", "clairvoyant-off", "clairvoyant-on"],
        default="online",
    )
    sim.add_argument("--error", choices=sorted(ERROR_KINDS), default="none")
    sim.add_argument("--p", type=_probability, default=0.0)
    _add_solver_flags(sim)
    sim.add_argument("-o", "--output")
    sim.set_defaults(handler=cmd_simulate)

    sweep = sub.add_parser("sweep", help="run an experiment spec")
    sweep.add_argument("spec")
    sweep.add_argument("--jobs", type=_positive_int, default=int(os.getenv("TASKFLOW_JOBS", "1")))
    sweep.add_argument("--csv")
    sweep.add_argument("--jsonl")
    sweep.set_defaults(handler=cmd_sweep)

    oracle = sub.add_parser("oracle", help="exhaustive optimum of a small mission")
    oracle.add_argument("mission")
    oracle.add_argument("--kind", choices=["flow", "schedule"], default="flow")
    oracle.add_argument("-o", "--output")
    oracle.set_defaults(handler=cmd_oracle)

    report = sub.add_parser("report", help="render SVG charts from an aggregate CSV")
    report.add_argument("csv")
    report.add_argument("--out-dir", default="reports")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=os.getenv("TASKFLOW_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except UsageError as exc:
        return _fail(str(exc), EXIT_USAGE)
    except GuardViolation as exc:
        return _fail(str(exc), EXIT_GUARD)
    except (ValidationError, ValueError, KeyError, OSError) as exc:
        error, details = _error_parts(exc)
        return _fail(error, EXIT_INPUT, details)
