from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from taskflow.error_models import apply_error
from taskflow.mission_generator import generate_mission
from taskflow.simulator import simulate_mission
from taskflow.testbed_schemas import ErrorModel, ExperimentSpec, GeneratorConfig, TrialRecord

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "level",
    "solver",
    "mean_reward",
    "std_reward",
    "mean_ratio_vs_offline",
    "mean_solve_time_s",
    "n_trials",
]


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0] & 0x7FFFFFFF)


def configure_level(spec: ExperimentSpec, level: float) -> Tuple[GeneratorConfig, ErrorModel]:
    generator, error = spec.generator, spec.error
    if spec.variable == "num_tasks":
        generator = generator.model_copy(update={"num_tasks": int(level)})
    elif spec.variable == "fleet_size":
        generator = generator.model_copy(update={"fleet_size": int(level)})
    elif spec.variable == "makespan_fraction":
        generator = generator.model_copy(update={"makespan_fraction": float(level)})
    elif spec.variable == "p_f":
        error = ErrorModel(kind="task_failure", p=float(level), seed=error.seed)
    elif spec.variable == "p_m":
        error = ErrorModel(kind="model_perturbation", p=float(level), seed=error.seed)
    return generator, error


def run_trial(spec: ExperimentSpec, level_index: int, trial: int) -> List[TrialRecord]:
    level = spec.levels[level_index]
    generator, error = configure_level(spec, level)
    seed = derive_seed(spec.seed, level_index, trial)
    mission = generate_mission(generator.model_copy(update={"seed": seed}))
    cfg = spec.solver.model_copy(update={"seed": seed})
    records: List[TrialRecord] = []
    for draw_index in range(spec.draws_per_trial):
        em = error.model_copy(update={"seed": derive_seed(seed, draw_index)})
        draw = apply_error(mission.reward, em)
        for solver in spec.solvers:
            record = simulate_mission(mission, solver, em, seed=seed, cfg=cfg, draw=draw)
            update = {"level": level, "trial": trial, "draw": draw_index}
            if not spec.record_timing:
                update["solve_time_s"] = 0.0
            records.append(record.model_copy(update=update))
    return records


def _run_trial_args(args: Tuple[ExperimentSpec, int, int]) -> List[TrialRecord]:
    return run_trial(*args)


def aggregate_records(records: Sequence[TrialRecord], spec: ExperimentSpec) -> pd.DataFrame:
    rows = pd.DataFrame(
        [
            {
                "level": r.level,
                "solver": r.solver,
                "trial": r.trial,
                "reward": r.total_reward,
                "solve_time": r.solve_time_s,
            }
            for r in records
        ],
        columns=["level", "solver", "trial", "reward", "solve_time"],
    )
    per_trial = rows.groupby(["level", "solver", "trial"], as_index=False)[["reward", "solve_time"]].mean()
    offline = per_trial[per_trial["solver"] == "offline"][["level", "trial", "reward"]]
    offline = offline.rename(columns={"reward": "offline_reward"})
    per_trial = per_trial.merge(offline, on=["level", "trial"], how="left")
    per_trial["ratio"] = per_trial["reward"] / per_trial["offline_reward"].where(per_trial["offline_reward"] > 0)

    grouped = per_trial.groupby(["level", "solver"])
    table = pd.DataFrame(
        {
            "mean_reward": grouped["reward"].mean(),
            "std_reward": grouped["reward"].std(ddof=0),
            "mean_ratio_vs_offline": grouped["ratio"].mean(),
            "mean_solve_time_s": grouped["solve_time"].mean(),
            "n_trials": grouped["trial"].nunique(),
        }
    ).reset_index()
    table["level"] = pd.Categorical(table["level"], categories=list(dict.fromkeys(spec.levels)), ordered=True)
    table["solver"] = pd.Categorical(table["solver"], categories=list(dict.fromkeys(spec.solvers)), ordered=True)
    table = table.sort_values(["level", "solver"]).reset_index(drop=True)
    table["level"] = table["level"].astype(float)
    table["solver"] = table["solver"].astype(str)
    return table[CSV_COLUMNS]


def write_aggregate(table: pd.DataFrame, path: Union[str, Path]) -> Path:
    target = Path(path)
    table.to_csv(target, index=False, float_format="%.6f")
    return target


def write_jsonl(records: Sequence[TrialRecord], path: Union[str, Path]) -> Path:
    target = Path(path)
    with target.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(record.model_dump_json() + "\n")
    return target


def run_sweep(spec: ExperimentSpec, jobs: int = 1) -> Tuple[List[TrialRecord], pd.DataFrame]:
    """Run every (level, trial) pair of an experiment and aggregate the totals per level and solver."""
    work = [(spec, level_index, trial) for level_index in range(len(spec.levels)) for trial in range(spec.trials)]
    logger.info("sweep %s: %d levels x %d trials, solvers=%s", spec.name, len(spec.levels), spec.trials, spec.solvers)
    records: List[TrialRecord] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for batch in pool.map(_run_trial_args, work):
                records.extend(batch)
    else:
        for done, item in enumerate(work, start=1):
            records.extend(run_trial(*item))
            logger.info("sweep %s: trial %d/%d done", spec.name, done, len(work))
    return records, aggregate_records(records, spec)


def sweep_to_files(
    spec: ExperimentSpec,
    csv_path: Union[str, Path],
    jsonl_path: Optional[Union[str, Path]] = None,
    jobs: int = 1,
) -> pd.DataFrame:
    records, table = run_sweep(spec, jobs=jobs)
    write_aggregate(table, csv_path)
    logger.info("wrote aggregate %s", csv_path)
    if jsonl_path is not None:
        write_jsonl(records, jsonl_path)
        logger.info("wrote trial trace %s", jsonl_path)
    return table
