import pytest

from taskflow.graph_ops import label_makespan, prune_graph, topo_order
from taskflow.mission_model import SOURCE
from tests.mission_fixtures import build_graph, chain_mission, diamond_graph


def test_topo_order_is_deterministic_and_respects_edges():
    graph = diamond_graph()
    order = topo_order(graph)
    assert order == [0, 1, 2, 3]
    position = {n: k for k, n in enumerate(order)}
    assert all(position[t] < position[h] for t, h in graph.edges)


def test_topo_order_rejects_cycles():
    cyclic = build_graph({1: 1.0, 2: 1.0}, [(SOURCE, 1), (1, 2), (2, 1)])
    with pytest.raises(ValueError) as exc:
        topo_order(cyclic)
    assert str(exc.value) == "graph_has_cycle"


def test_worst_case_labels_on_chain_and_diamond():
    assert label_makespan(chain_mission().graph).worst_finish == {0: 0.0, 1: 5.0, 2: 12.0}
    diamond = label_makespan(diamond_graph(left=5.0, right=9.0, last=1.0)).worst_finish
    assert diamond[3] == pytest.approx(10.0)


def test_prune_removes_tasks_past_the_makespan():
    mission = chain_mission()
    graph, reward, removed = prune_graph(mission.graph, mission.reward, 10.0)
    assert removed == [2]
    assert graph.task_ids == [1]
    assert set(reward.coalition) == {1}
    assert (1, 2) not in reward.influence


def test_prune_keeps_everything_when_time_allows():
    mission = chain_mission()
    graph, _, removed = prune_graph(mission.graph, mission.reward, 12.0)
    assert removed == []
    assert graph.task_ids == [1, 2]


def test_prune_with_zero_makespan_removes_all_timed_tasks():
    mission = chain_mission()
    graph, _, removed = prune_graph(mission.graph, mission.reward, 0.0)
    assert removed == [1, 2]
    assert graph.task_ids == []


def test_prune_never_drops_protected_tasks():
    mission = chain_mission()
    graph, _, removed = prune_graph(mission.graph, mission.reward, 1.0, keep=[1])
    assert removed == [2]
    assert graph.task_ids == [1]

