from dataclasses import replace

import pytest

from taskflow.flow_solver import (
    FlowSolution,
    IntegerAllocation,
    check_flow_feasibility,
    extract_schedule,
    round_flows,
    solve_flow,
    solve_offline,
)
from taskflow.mission_generator import generate_mission
from taskflow.mission_model import SOURCE, Fleet, TaskNode
from taskflow.mission_schemas import SolverConfig
from taskflow.schedule_check import check_schedule
from taskflow.testbed_schemas import GeneratorConfig
from tests.mission_fixtures import build_graph, build_reward, chain_mission, diamond_graph, fork_mission, identity

FAST = SolverConfig(restarts=3, max_iters=100)


def _offline(mission, cfg=FAST):
    return solve_offline(mission.graph, mission.reward, mission.fleet, mission.makespan, cfg)


def test_chain_sends_the_whole_fleet_down_the_chain():
    solution = _offline(chain_mission())
    assert solution.objective == pytest.approx(3.0, abs=1e-6)
    assert solution.flow[(SOURCE, 1)] == pytest.approx(1.0, abs=1e-6)
    assert solution.flow[(1, 2)] == pytest.approx(1.0, abs=1e-6)
    assert solution.removed == ()


def test_fork_reaches_the_concave_optimum():
    solution = _offline(fork_mission())
    assert solution.objective == pytest.approx(1.0, abs=1e-4)


def test_zero_makespan_yields_an_empty_plan():
    solution = _offline(chain_mission(makespan=0.0))
    assert solution.flow == {}
    assert solution.objective == 0.0
    assert solution.status == "infeasible-input"
    assert solution.removed == (1, 2)


def test_capacity_bounds_the_edge_flow():
    mission = fork_mission()
    graph = build_graph({1: 1.0, 2: 1.0}, mission.graph.edges, capacity={(SOURCE, 1): 0.25})
    solution = solve_flow(graph, mission.reward, FAST)
    assert solution.flow[(SOURCE, 1)] <= 0.25 + 1e-6
    assert check_flow_feasibility(graph, solution.flow) == []


def test_fixed_sources_pin_their_outflow():
    graph = build_graph({1: 1.0, 2: 1.0}, [(SOURCE, 2), (1, 2)])
    graph = replace(
        graph,
        nodes=graph.nodes + (TaskNode(id=-1, kind="source"),),
        edges=tuple(sorted(graph.edges + ((-1, 1),))),
        edge_capacity={(-1, 1): 0.25},
    )
    reward = build_reward({1: identity(), 2: identity()}, {(1, 2): identity()}, combination="sum")
    solution = solve_flow(graph, reward, FAST, free_capacity=0.75, fixed_sources={-1: 0.25})
    assert solution.flow[(-1, 1)] == pytest.approx(0.25)
    assert solution.flow[(1, 2)] <= 0.25 + 1e-6
    assert check_flow_feasibility(graph, solution.flow, free_capacity=0.75, fixed_sources={-1: 0.25}) == []


def test_same_seed_gives_the_same_flows():
    mission = generate_mission(GeneratorConfig(num_tasks=6, fleet_size=3, seed=4))
    first = _offline(mission)
    second = _offline(mission)
    assert first.flow == second.flow
    assert first.objective == second.objective



def _solution(graph, flow):
    return FlowSolution(flow=flow, objective=0.0, status="converged", graph=graph)


def test_rounding_examples():
    pair = build_graph({1: 1.0, 2: 1.0}, [(SOURCE, 1), (SOURCE, 2)])
    alloc = round_flows(pair, _solution(pair, {(SOURCE, 1): 0.5, (SOURCE, 2): 0.5}), Fleet(3))
    assert (alloc.robots_on_edge[(SOURCE, 1)], alloc.robots_on_edge[(SOURCE, 2)]) == (2, 1)

    single = build_graph({1: 1.0}, [(SOURCE, 1)])
    alloc = round_flows(single, _solution(single, {(SOURCE, 1): 1.0}), Fleet(4))
    assert alloc.robots_on_edge == {(SOURCE, 1): 4}
    assert alloc.coalition_size == {1: 4}

    triple = build_graph({1: 1.0, 2: 1.0, 3: 1.0}, [(SOURCE, 1), (SOURCE, 2), (SOURCE, 3)])
    flow = {(SOURCE, 1): 0.33, (SOURCE, 2): 0.33, (SOURCE, 3): 0.34}
    alloc = round_flows(triple, _solution(triple, flow), Fleet(10))
    assert [alloc.robots_on_edge[(SOURCE, j)] for j in (1, 2, 3)] == [3, 3, 3]


def test_rounding_picks_the_least_error_total():
    triple = build_graph({1: 1.0, 2: 1.0, 3: 1.0}, [(SOURCE, 1), (SOURCE, 2), (SOURCE, 3)])
    flow = {(SOURCE, 1): 0.04, (SOURCE, 2): 0.04, (SOURCE, 3): 0.04}
    alloc = round_flows(triple, _solution(triple, flow), Fleet(10))
    assert [alloc.robots_on_edge[(SOURCE, j)] for j in (1, 2, 3)] == [0, 0, 0]
    assert alloc.coalition_size == {1: 0, 2: 0, 3: 0}

    pair = build_graph({1: 1.0, 2: 1.0}, [(SOURCE, 1), (SOURCE, 2)])
    alloc = round_flows(pair, _solution(pair, {(SOURCE, 1): 0.7, (SOURCE, 2): 0.3}), Fleet(2))
    assert (alloc.robots_on_edge[(SOURCE, 1)], alloc.robots_on_edge[(SOURCE, 2)]) == (1, 1)



def test_schedule_on_chain_includes_travel():
    graph = chain_mission().graph
    alloc = IntegerAllocation(robots_on_edge={(SOURCE, 1): 3, (1, 2): 3}, coalition_size={1: 3, 2: 3})
    schedule = extract_schedule(graph, alloc)
    assert schedule.start == {1: 0.0, 2: 7.0}
    assert schedule.finish == {1: 5.0, 2: 12.0}
    assert sorted(schedule.robot_paths.values()) == [[1, 2]] * 3


def test_schedule_waits_for_the_slowest_branch():
    graph = diamond_graph(left=5.0, right=9.0, last=1.0)
    alloc = IntegerAllocation(
        robots_on_edge={(SOURCE, 1): 2, (SOURCE, 2): 2, (1, 3): 2, (2, 3): 2},
        coalition_size={1: 2, 2: 2, 3: 4},
    )
    schedule = extract_schedule(graph, alloc)
    assert schedule.start[3] == pytest.approx(9.0)
    assert schedule.finish[3] == pytest.approx(10.0)
    assert check_schedule(graph, schedule, alloc, Fleet(4), makespan=10.0) == []
    assert check_schedule(graph, schedule, alloc, Fleet(4), makespan=9.5) == ["makespan 3"]


def test_empty_allocation_has_an_empty_schedule():
    graph = chain_mission().graph
    schedule = extract_schedule(graph, IntegerAllocation(robots_on_edge={}, coalition_size={1: 0, 2: 0}))
    assert schedule.robot_paths == {}
    assert schedule.start == {}

