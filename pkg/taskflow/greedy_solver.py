from __future__ import annotations

import logging
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from taskflow.flow_solver import FlowSolution, central_gradient, empty_solution
from taskflow.graph_ops import prune_graph, topo_order
from taskflow.mission_model import SOURCE, Fleet, RewardModel, TaskGraph
from taskflow.mission_schemas import SolverConfig
from taskflow.reward_engine import RewardProgram

logger = logging.getLogger(__name__)


def project_capped_simplex(v: np.ndarray, caps: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto {0 <= x <= caps, sum(x) = total}."""
    if total <= 0:
        return np.zeros_like(v)
    if total >= caps.sum():
        return caps.astype(float).copy()

    def excess(shift: float) -> float:
        return float(np.clip(v - shift, 0.0, caps).sum()) - total

    shift = brentq(excess, float(v.min() - caps.max() - 1.0), float(v.max()), xtol=1e-12)
    return np.clip(v - shift, 0.0, caps)


def solve_greedy(
    g: TaskGraph,
    rm: RewardModel,
    fleet: Fleet,
    makespan: float,
    seed: int = 0,
    cfg: Optional[SolverConfig] = None,
) -> FlowSolution:
    """One-step lookahead: each node splits its whole inflow to maximize its children's rewards."""
    cfg = cfg or SolverConfig(seed=seed)
    pruned, pruned_rm, removed = prune_graph(g, rm, makespan)
    if not pruned.task_ids:
        return empty_solution(pruned, pruned_rm, removed)

    program = RewardProgram(pruned, pruned_rm)
    position = {e: k for k, e in enumerate(program.edges)}
    flow = np.zeros(len(program.edges))
    rng = np.random.default_rng(seed)

    for node_id in topo_order(pruned):
        heads = pruned.successors(node_id)
        if not heads:
            continue
        outs: List[int] = [position[(node_id, h)] for h in heads]
        if node_id == SOURCE:
            incoming = 1.0
        elif pruned.is_task(node_id):
            incoming = sum(flow[position[(i, node_id)]] for i in pruned.predecessors(node_id))
        else:
            continue
        caps = np.array([pruned.capacity((node_id, h)) for h in heads])
        budget = min(incoming, float(caps.sum()))
        if budget <= 0:
            continue

        def score(split: np.ndarray) -> float:
            trial = flow.copy()
            trial[outs] = split
            rewards = program.rewards(trial)
            return sum(rewards.get(h, 0.0) for h in heads)

        samples = rng.dirichlet(np.ones(len(outs)), size=cfg.greedy_samples) * budget
        best, best_value = None, -np.inf
        for sample in samples:
            candidate = project_capped_simplex(sample, caps, budget)
            value = score(candidate)
            if value > best_value:
                best, best_value = candidate, value
        x = best.copy()
        for _ in range(cfg.greedy_iters):
            x = project_capped_simplex(x + cfg.greedy_step * central_gradient(score, x, cfg.gradient_step), caps, budget)
            value = score(x)
            if value > best_value:
                best, best_value = x.copy(), value
        flow[outs] = best

    objective = program.total(flow)
    logger.info("greedy solve: tasks=%d pruned=%d objective=%.6f", len(pruned.task_ids), len(removed), objective)
    return FlowSolution(
        flow={e: float(flow[k]) for k, e in enumerate(program.edges)},
        objective=objective,
        status="converged",
        graph=pruned,
        reward=pruned_rm,
        removed=tuple(removed),
    )
