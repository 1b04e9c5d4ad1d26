from __future__ import annotations

from dataclasses import dataclass, replace
from typing import FrozenSet, Iterable, Optional

import numpy as np

from taskflow.mission_model import RewardModel, ScalarFunction, constant
from taskflow.testbed_schemas import ErrorModel

MAX_REDRAWS = 100


@dataclass(frozen=True)
class ErrorDraw:
    ground_truth: RewardModel
    planner: RewardModel
    failed: FrozenSet[int] = frozenset()


def fail_tasks(rm: RewardModel, failed: Iterable[int]) -> RewardModel:
    """Ground-truth model in which every failed task returns zero reward."""
    failed = set(failed)
    coalition = {j: (constant(0.0) if j in failed else fn) for j, fn in rm.coalition.items()}
    combination = {j: ("product" if j in failed else op) for j, op in rm.combination.items()}
    return replace(rm, coalition=coalition, combination=combination)


def perturb_function(fn: ScalarFunction, p: float, rng: np.random.Generator) -> ScalarFunction:
    mean = np.array(fn.params, dtype=float)
    scale = p * np.abs(mean)
    draw = mean
    for _ in range(MAX_REDRAWS):
        draw = rng.normal(mean, scale)
        try:
            return ScalarFunction(fn.kind, tuple(draw))
        except ValueError:
            continue
    return ScalarFunction.clamped(fn.kind, tuple(draw))


def perturb_model(rm: RewardModel, p: float, rng: np.random.Generator) -> RewardModel:
    return replace(
        rm,
        coalition={j: perturb_function(rm.coalition[j], p, rng) for j in sorted(rm.coalition)},
        influence={e: perturb_function(rm.influence[e], p, rng) for e in sorted(rm.influence)},
    )


def apply_error(rm: RewardModel, em: ErrorModel, rng: Optional[np.random.Generator] = None) -> ErrorDraw:
    rng = rng if rng is not None else np.random.default_rng(em.seed)
    if em.kind == "task_failure":
        failed = frozenset(j for j in sorted(rm.coalition) if rng.uniform() < em.p)
        return ErrorDraw(ground_truth=fail_tasks(rm, failed), planner=rm, failed=failed)
    if em.kind == "model_perturbation":
        return ErrorDraw(ground_truth=rm, planner=perturb_model(rm, em.p, rng))
    return ErrorDraw(ground_truth=rm, planner=rm)
