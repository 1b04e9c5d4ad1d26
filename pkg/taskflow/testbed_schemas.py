from __future__ import annotations

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from taskflow.mission_schemas import SolverConfig, SolverName

SweepVariable = Literal["num_tasks", "p_f", "p_m", "fleet_size", "makespan_fraction"]
ErrorKind = Literal["none", "task_failure", "model_perturbation"]
Preset = Literal["random", "advanced"]


class GeneratorConfig(BaseModel):
    num_tasks: int = Field(default=10, ge=1)
    fleet_size: int = Field(default=4, ge=1)
    makespan_fraction: float = Field(default=0.6, gt=0)
    edge_density: float = Field(default=0.4, ge=0, le=1)
    num_layers: Optional[int] = Field(default=None, ge=1)
    catalog_weights: Dict[Literal["polynomial", "power_sublinear", "sigmoid"], float] = Field(
        default_factory=lambda: {"polynomial": 1.0, "power_sublinear": 1.0, "sigmoid": 1.0}
    )
    duration_min: float = Field(default=1.0, ge=0)
    duration_max: float = Field(default=10.0, ge=0)
    travel_min: float = Field(default=0.0, ge=0)
    travel_max: float = Field(default=2.0, ge=0)
    capacity_probability: float = Field(default=0.0, ge=0, le=1)
    preset: Preset = "random"
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_ranges(self) -> "GeneratorConfig":
        if self.duration_max < self.duration_min:
            raise ValueError("duration_range_inverted")
        if self.travel_max < self.travel_min:
            raise ValueError("travel_range_inverted")
        if not any(w > 0 for w in self.catalog_weights.values()):
            raise ValueError("catalog_weights_all_zero")
        if any(w < 0 for w in self.catalog_weights.values()):
            raise ValueError("catalog_weight_negative")
        return self


class ErrorModel(BaseModel):
    kind: ErrorKind = "none"
    p: float = Field(default=0.0, ge=0, le=1)
    seed: int = Field(default=0, ge=0)


class TaskOutcome(BaseModel):
    task: int
    coalition: int = Field(ge=1)
    start: float
    finish: float
    predicted: float
    observed: float
    failed: bool = False


class StepTrace(BaseModel):
    iteration: int
    time: float
    completed_task: int
    observed_reward: float
    zeroed: List[int] = Field(default_factory=list)
    pruned: List[int] = Field(default_factory=list)
    origin: str
    predicted_objective: float


class TrialRecord(BaseModel):
    mission: str
    solver: SolverName
    level: Optional[float] = None
    trial: int = 0
    draw: int = 0
    tasks: List[TaskOutcome] = Field(default_factory=list)
    steps: List[StepTrace] = Field(default_factory=list)
    total_reward: float
    predicted_total: float
    solve_time_s: float
    makespan: float
    failed_tasks: List[int] = Field(default_factory=list)
    zeroed_tasks: List[int] = Field(default_factory=list)
    pruned_tasks: List[int] = Field(default_factory=list)


class ExperimentSpec(BaseModel):
    name: str = "experiment"
    variable: SweepVariable
    levels: List[float] = Field(min_length=1)
    trials: int = Field(default=10, ge=1)
    solvers: List[SolverName] = Field(min_length=1)
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    error: ErrorModel = Field(default_factory=ErrorModel)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    draws_per_trial: int = Field(default=1, ge=1)
    record_timing: bool = True
    seed: int = Field(default=0, ge=0)
