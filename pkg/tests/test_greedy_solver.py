import numpy as np
import pytest

from taskflow.flow_solver import check_flow_feasibility, solve_offline
from taskflow.greedy_solver import project_capped_simplex, solve_greedy
from taskflow.mission_generator import generate_mission
from taskflow.mission_model import SOURCE
from taskflow.mission_schemas import SolverConfig
from taskflow.testbed_schemas import GeneratorConfig
from tests.mission_fixtures import chain_mission, myopia_mission

FAST = SolverConfig(restarts=3, max_iters=100, greedy_samples=20, greedy_iters=50)


def _greedy(mission, seed=0):
    return solve_greedy(mission.graph, mission.reward, mission.fleet, mission.makespan, seed=seed, cfg=FAST)


def test_projection_lands_on_the_capped_simplex():
    x = project_capped_simplex(np.array([0.5, 0.5, 0.5]), np.array([1.0, 1.0, 0.2]), 1.0)
    assert x.sum() == pytest.approx(1.0)
    assert np.all(x >= 0)
    assert x[2] <= 0.2 + 1e-12

    assert project_capped_simplex(np.array([0.3, 0.7]), np.array([1.0, 1.0]), 0.0).tolist() == [0.0, 0.0]
    assert project_capped_simplex(np.array([0.3, 0.7]), np.array([0.1, 0.2]), 1.0).tolist() == [0.1, 0.2]


def test_greedy_matches_offline_on_a_chain():
    mission = chain_mission()
    greedy = _greedy(mission)
    offline = solve_offline(mission.graph, mission.reward, mission.fleet, mission.makespan, FAST)
    assert greedy.objective == pytest.approx(3.0, abs=1e-6)
    assert greedy.objective == pytest.approx(offline.objective, abs=1e-6)


def test_greedy_is_myopic_where_offline_looks_ahead():
    mission = myopia_mission()
    greedy = _greedy(mission)
    offline = solve_offline(mission.graph, mission.reward, mission.fleet, mission.makespan, FAST)
    assert offline.objective == pytest.approx(10.1, abs=1e-3)
    assert greedy.objective <= 1.0 + 1e-6
    assert greedy.objective < 0.7 * offline.objective


def test_greedy_with_nothing_left_after_pruning():
    solution = _greedy(chain_mission(makespan=0.0))
    assert solution.flow == {}
    assert solution.objective == 0.0


def test_greedy_is_deterministic_per_seed():
    mission = generate_mission(GeneratorConfig(num_tasks=6, fleet_size=3, seed=2))
    assert _greedy(mission, seed=5).flow == _greedy(mission, seed=5).flow


def test_greedy_forwards_every_robot_it_receives():
    for seed in range(8):
        mission = generate_mission(GeneratorConfig(num_tasks=7, fleet_size=4, makespan_fraction=1.0, seed=seed))
        solution = _greedy(mission, seed=seed)
        graph = solution.graph
        if graph is None or not graph.task_ids:
            continue
        assert check_flow_feasibility(graph, solution.flow) == []
        out_of_source = sum(v for (t, _), v in solution.flow.items() if t == SOURCE)
        assert out_of_source == pytest.approx(1.0, abs=1e-6)
        for j in graph.task_ids:
            inflow = solution.inflow(j)
            outflow = sum(v for (t, _), v in solution.flow.items() if t == j)
            if graph.successors(j) and inflow > 0:
                assert outflow == pytest.approx(inflow, abs=1e-6)
