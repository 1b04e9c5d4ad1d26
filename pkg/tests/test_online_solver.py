import pytest
from scipy.special import expit

from taskflow.flow_solver import FlowSolution, check_flow_feasibility, solve_flow, solve_offline
from taskflow.mission_model import SOURCE, Fleet, Mission, ScalarFunction, constant
from taskflow.mission_schemas import SolverConfig
from taskflow.online_solver import (
    Running,
    artificial_source,
    check_and_update,
    init_online,
    record_starts,
    step,
)
from tests.mission_fixtures import (
    build_graph,
    build_reward,
    chain_mission,
    diamond_graph,
    identity,
    split_fleet_mission,
)

FAST = SolverConfig(restarts=3, max_iters=100)


def test_step_splits_the_fleet_between_running_and_free_robots():
    mission = split_fleet_mission()
    _, state = init_online(mission, FAST)
    state = record_starts(
        state,
        [Running(task=1, coalition=5, started=0.0, finish=2.0), Running(task=2, coalition=1, started=0.0, finish=10.0)],
    )
    solution, state = step(state, completed_task=1, observed_reward=1.0, now=2.0)

    graph = state.graph
    q = artificial_source(2)
    assert state.free_capacity == pytest.approx(5 / 6)
    assert state.free_robots == 5
    assert graph.successors(q) == [2]
    assert graph.capacity((q, 2)) == pytest.approx(1 / 6)
    assert graph.duration(2) == pytest.approx(8.0)
    assert (SOURCE, 3) in graph.edges
    assert (SOURCE, 5) in graph.edges
    assert (2, 4) in graph.edges
    assert solution.flow[(q, 2)] == pytest.approx(1 / 6)
    assert check_flow_feasibility(graph, solution.flow, 5 / 6, {q: 1 / 6}) == []

    free, running, internal = state.node_partition()
    assert free == {SOURCE}
    assert running == {q}
    assert internal == {2, 3, 4, 5}
    assert free | running | internal == set(graph.node_ids)
    assert state.ghosts[3] == (1.0,)
    assert state.iteration == 1


def test_zero_observation_turns_off_a_product_successor():
    mission = chain_mission()
    _, state = init_online(mission, FAST)
    state = record_starts(state, [Running(task=1, coalition=3, started=0.0, finish=5.0)])
    solution, state = step(state, 1, 0.0, 5.0)
    assert state.ghosts[2] == (0.0,)
    assert solution.objective == pytest.approx(0.0)


def test_finishing_the_last_task_leaves_an_empty_plan():
    graph = build_graph({1: 1.0}, [(SOURCE, 1)])
    mission = Mission(graph=graph, reward=build_reward({1: identity()}), fleet=Fleet(2), makespan=5.0)
    solution, state = init_online(mission, FAST)
    assert solution.objective == pytest.approx(1.0, abs=1e-6)
    state = record_starts(state, [Running(task=1, coalition=2, started=0.0, finish=1.0)])
    solution, state = step(state, 1, 1.0, 1.0)
    assert solution.flow == {}
    assert solution.objective == 0.0
    assert state.iteration == 0
    assert state.pending == []


def test_unfinished_predecessors_are_zeroed_once_a_successor_starts():
    graph = diamond_graph()
    reward = build_reward(
        {1: identity(), 2: identity(), 3: identity()},
        {(1, 3): constant(1.0), (2, 3): constant(1.0)},
    )
    mission = Mission(graph=graph, reward=reward, fleet=Fleet(2), makespan=100.0)
    _, state = init_online(mission, FAST)
    state = record_starts(state, [Running(task=1, coalition=2, started=0.0, finish=5.0)])
    _, state = step(state, 1, 1.0, 5.0)
    assert state.zeroed == ()
    assert state.iteration == 1

    state = record_starts(state, [Running(task=3, coalition=2, started=5.0, finish=6.0)])
    _, state = step(state, 3, 1.0, 6.0)
    assert state.zeroed == (2,)
    assert state.pending == []
    assert state.iteration == 1


def test_step_rejects_bad_events():
    mission = chain_mission()
    _, state = init_online(mission, FAST)
    with pytest.raises(KeyError):
        step(state, 9, 1.0, 1.0)
    with pytest.raises(ValueError) as exc:
        step(state, 1, 1.0, 1.0)
    assert str(exc.value) == "task_not_in_progress"
    state = record_starts(state, [Running(task=1, coalition=3, started=0.0, finish=5.0)])
    with pytest.raises(ValueError):
        step(state, 1, -1.0, 5.0)
    with pytest.raises(KeyError):
        record_starts(state, [Running(task=1, coalition=3, started=0.0, finish=5.0)])


def _chain_solution():
    mission = chain_mission()
    return solve_offline(mission.graph, mission.reward, mission.fleet, mission.makespan, FAST)


def test_check_and_update_without_history_keeps_the_current_plan():
    current = _chain_solution()
    best = check_and_update((current, current.graph), [], [], current.reward)
    assert best.flow == current.flow
    assert best.origin == "fresh"
    assert best.objective == pytest.approx(3.0, abs=1e-6)


def test_check_and_update_prefers_a_better_earlier_plan():
    good = _chain_solution()
    poor = FlowSolution(
        flow={e: 0.0 for e in good.graph.edges},
        objective=0.0,
        status="converged",
        graph=good.graph,
        reward=good.reward,
    )
    best = check_and_update((poor, good.graph), [(good, good.graph)], [], good.reward)
    assert best.origin == "projected:0"
    assert best.objective == pytest.approx(3.0, abs=1e-6)
    assert best.flow == pytest.approx(good.flow)


def test_check_and_update_never_returns_a_worse_plan():
    good = _chain_solution()
    poor = FlowSolution(flow={e: 0.0 for e in good.graph.edges}, objective=0.0, status="converged")
    best = check_and_update((good, good.graph), [(poor, good.graph)], [], good.reward)
    assert best.origin == "fresh"
    assert best.objective == pytest.approx(3.0, abs=1e-6)


def test_projection_onto_a_post_step_graph_reroutes_earlier_inflows():
    mission = split_fleet_mission()
    _, state = init_online(mission, FAST)
    state = record_starts(
        state,
        [Running(task=1, coalition=5, started=0.0, finish=2.0), Running(task=2, coalition=1, started=0.0, finish=10.0)],
    )
    _, state = step(state, completed_task=1, observed_reward=1.0, now=2.0)
    q = artificial_source(2)

    prior = FlowSolution(
        flow={(SOURCE, 1): 5 / 6, (SOURCE, 2): 1 / 6, (SOURCE, 5): 0.0, (1, 3): 0.5, (2, 4): 1 / 6},
        objective=0.0,
        status="converged",
        graph=mission.graph,
        reward=mission.reward,
    )
    idle = FlowSolution(
        flow={(q, 2): 1 / 6, (SOURCE, 3): 0.0, (SOURCE, 5): 0.0, (2, 4): 0.0},
        objective=0.0,
        status="converged",
        graph=state.graph,
        reward=state.reward,
    )
    best = check_and_update(
        (idle, state.graph),
        [(prior, mission.graph)],
        state.in_progress,
        state.reward,
        state.free_capacity,
        state.source_shares,
    )
    assert best.origin == "projected:0"
    assert best.flow == pytest.approx({(q, 2): 1 / 6, (SOURCE, 3): 0.5, (SOURCE, 5): 0.0, (2, 4): 1 / 6})
    assert check_flow_feasibility(state.graph, best.flow, state.free_capacity, state.source_shares) == []
    assert best.objective == pytest.approx(1 / 6 + 0.5 + 1 / 6)


def test_projection_beats_a_single_restart_stuck_on_the_wrong_branch():
    graph = build_graph({1: 1.0, 2: 1.0}, [(SOURCE, 1), (SOURCE, 2)])
    reward = build_reward({1: identity(), 2: ScalarFunction("sigmoid", (10.0, 200.0, 0.97))}, combination="sum")
    prior = FlowSolution(
        flow={(SOURCE, 1): 0.0, (SOURCE, 2): 1.0}, objective=0.0, status="converged", graph=graph, reward=reward
    )
    stuck = []
    for seed in range(5):
        fresh = solve_flow(graph, reward, SolverConfig(restarts=1, max_iters=100, seed=seed))
        if fresh.objective >= 5.0:
            continue
        stuck.append(seed)
        best = check_and_update((fresh, graph), [(prior, graph)], [], reward)
        assert best.origin == "projected:0"
        assert best.flow == {(SOURCE, 1): 0.0, (SOURCE, 2): 1.0}
        assert best.objective == pytest.approx(10.0 * expit(6.0))
    assert stuck
