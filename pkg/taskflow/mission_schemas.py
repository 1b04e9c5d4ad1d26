from __future__ import annotations

import os
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field

FunctionKind = Literal["polynomial", "power_sublinear", "sigmoid", "linear", "exp_saturation", "constant"]
AggregationKind = Literal["sum", "product"]
CombinationKind = Literal["sum", "product", "min"]
SolverName = Literal["offline", "greedy", "online", "clairvoyant-off", "clairvoyant-on"]
SolveStatus = Literal["converged", "iteration-limit", "infeasible-input"]


class FunctionDescriptor(BaseModel):
    kind: FunctionKind
    params: List[float] = Field(min_length=1)


class NodeEntry(BaseModel):
    id: int = Field(ge=0)
    duration: float = Field(default=0.0, ge=0)
    label: str = ""


class EdgeEntry(BaseModel):
    tail: int = Field(ge=0)
    head: int = Field(ge=0)
    influence: Optional[FunctionDescriptor] = None
    capacity: Optional[float] = Field(default=None, gt=0, le=1)


class RewardEntry(BaseModel):
    node: int = Field(ge=1)
    coalition: FunctionDescriptor
    aggregation: AggregationKind = "sum"
    combination: CombinationKind = "product"
    ghost: List[float] = Field(default_factory=list)


class CoordinateTravel(BaseModel):
    coordinates: List[Tuple[float, float]] = Field(min_length=1)
    speed: float = Field(default=1.0, gt=0)


class MissionFile(BaseModel):
    name: str = "mission"
    nodes: List[NodeEntry] = Field(min_length=1)
    edges: List[EdgeEntry] = Field(default_factory=list)
    reward: List[RewardEntry] = Field(default_factory=list)
    travel_time: Union[List[List[float]], CoordinateTravel]
    fleet_size: int = Field(ge=1)
    makespan: float = Field(ge=0)


def _env_int(name: str, default: str) -> int:
    return int(os.getenv(name, default))


def _env_float(name: str, default: str) -> float:
    return float(os.getenv(name, default))


class SolverConfig(BaseModel):
    restarts: int = Field(default=10, ge=1)
    max_iters: int = Field(default=200, ge=1)
    tol: float = Field(default=1e-6, gt=0)
    seed: int = Field(default=0, ge=0)
    gradient_step: float = Field(default=1e-5, gt=0)
    greedy_samples: int = Field(default=50, ge=1)
    greedy_step: float = Field(default=0.01, gt=0)
    greedy_iters: int = Field(default=100, ge=0)

    @classmethod
    def from_env(cls, **overrides) -> "SolverConfig":
        values = {
            "restarts": _env_int("TASKFLOW_RESTARTS", "10"),
            "max_iters": _env_int("TASKFLOW_MAX_ITERS", "200"),
            "tol": _env_float("TASKFLOW_TOL", "1e-6"),
            "seed": _env_int("TASKFLOW_SEED", "0"),
            "gradient_step": _env_float("TASKFLOW_GRADIENT_STEP", "1e-5"),
            "greedy_samples": _env_int("TASKFLOW_GREEDY_SAMPLES", "50"),
            "greedy_step": _env_float("TASKFLOW_GREEDY_STEP", "0.01"),
            "greedy_iters": _env_int("TASKFLOW_GREEDY_ITERS", "100"),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class ErrorResponse(BaseModel):
    error: str
    details: Optional[str] = None
    status_code: int


class EdgeFlow(BaseModel):
    tail: int
    head: int
    fraction: float


class EdgeRobots(BaseModel):
    tail: int
    head: int
    robots: int


class RobotRoute(BaseModel):
    robot: int
    origin: int
    tasks: List[int]


class TaskTiming(BaseModel):
    task: int
    coalition: int
    start: float
    finish: float


class TaskPrediction(BaseModel):
    task: int
    reward: float
    pruned: bool = False


class SolutionFile(BaseModel):
    mission: str
    solver: str
    status: str
    objective: float
    solve_time_s: float
    flow: List[EdgeFlow] = Field(default_factory=list)
    allocation: List[EdgeRobots] = Field(default_factory=list)
    routes: List[RobotRoute] = Field(default_factory=list)
    timing: List[TaskTiming] = Field(default_factory=list)
    rewards: List[TaskPrediction] = Field(default_factory=list)
    nodes_explored: Optional[int] = None
