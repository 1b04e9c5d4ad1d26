from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from taskflow.sweep import CSV_COLUMNS  # noqa: E402

logger = logging.getLogger(__name__)


def _line_chart(table: pd.DataFrame, column: str, band: str, ylabel: str, target: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for solver, rows in table.groupby("solver", sort=False):
        rows = rows.sort_values("level")
        ax.plot(rows["level"], rows[column], marker="o", label=str(solver))
        if band:
            spread = rows[band].fillna(0.0)
            ax.fill_between(rows["level"], rows[column] - spread, rows[column] + spread, alpha=0.2)
    ax.set_xlabel("level")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(target, format="svg")
    plt.close(fig)
    return target


def render_report(csv_path: Union[str, Path], out_dir: Union[str, Path]) -> List[Path]:
    """Render aggregate sweep results as SVG line charts; returns the files written."""
    table = pd.read_csv(csv_path)
    missing = [c for c in CSV_COLUMNS if c not in table.columns]
    if missing:
        raise ValueError("aggregate_missing_columns", ",".join(missing))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(csv_path).stem

    written = [_line_chart(table, "mean_reward", "std_reward", "total reward", out / f"{stem}-reward.svg")]
    if table["mean_ratio_vs_offline"].notna().any():
        written.append(
            _line_chart(
                table.dropna(subset=["mean_ratio_vs_offline"]),
                "mean_ratio_vs_offline",
                "",
                "reward / offline reward",
                out / f"{stem}-ratio.svg",
            )
        )
    if (table["mean_solve_time_s"] > 0).any():
        written.append(_line_chart(table, "mean_solve_time_s", "", "solve time (s)", out / f"{stem}-time.svg"))
    for path in written:
        logger.info("wrote chart %s", path)
    return written
