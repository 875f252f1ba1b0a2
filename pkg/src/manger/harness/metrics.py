"""Fixed-schema metrics CSV: one row per training step.

Floats are rendered with 9 significant digits; fields that were not produced
on a step (eval results between evaluations, RND loss on off-steps) are
empty cells.  Per-agent novelty is a ';'-joined vector in one cell.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np


class MetricsFormatError(ValueError):
    """Header or cell contents do not match the fixed schema."""


COLUMNS = [
    "train_step",
    "env_steps",
    "episodes",
    "epsilon",
    "loss",
    "rnd_loss",
    "mean_train_return",
    "eval_return",
    "eval_success",
    "mean_novelty",
    "mean_extra_updates",
    "q_cosine_mean",
    "wall_ms_per_step",
]


@dataclass
class MetricsRow:
    train_step: int
    env_steps: int
    episodes: int
    epsilon: float
    loss: float
    rnd_loss: Optional[float]
    mean_train_return: float
    eval_return: Optional[float]
    eval_success: Optional[float]
    mean_novelty: Optional[np.ndarray]
    mean_extra_updates: Optional[float]
    q_cosine_mean: Optional[float]
    wall_ms_per_step: float


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.9g}"


def _row_cells(row: MetricsRow) -> List[str]:
    cells = []
    for name in COLUMNS:
        value = getattr(row, name)
        if name == "mean_novelty":
            cells.append("" if value is None else ";".join(f"{float(v):.9g}" for v in value))
        else:
            cells.append(_fmt(value))
    return cells


def write_metrics(rows: Sequence[MetricsRow], path) -> None:
    """Write the whole metrics table atomically (temp file + rename)."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow(_row_cells(row))
    tmp.replace(path)


def _parse_opt_float(cell: str) -> Optional[float]:
    return None if cell == "" else float(cell)


def read_metrics(path) -> List[MetricsRow]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MetricsFormatError(f"{path}: empty metrics file") from None
        if header != COLUMNS:
            raise MetricsFormatError(f"{path}: header {header} does not match {COLUMNS}")
        rows = []
        for cells in reader:
            if len(cells) != len(COLUMNS):
                raise MetricsFormatError(f"{path}: row has {len(cells)} cells, expected {len(COLUMNS)}")
            novelty_cell = cells[COLUMNS.index("mean_novelty")]
            novelty = (
                None if novelty_cell == ""
                else np.array([float(v) for v in novelty_cell.split(";")])
            )
            rows.append(MetricsRow(
                train_step=int(cells[0]),
                env_steps=int(cells[1]),
                episodes=int(cells[2]),
                epsilon=float(cells[3]),
                loss=float(cells[4]),
                rnd_loss=_parse_opt_float(cells[5]),
                mean_train_return=float(cells[6]),
                eval_return=_parse_opt_float(cells[7]),
                eval_success=_parse_opt_float(cells[8]),
                mean_novelty=novelty,
                mean_extra_updates=_parse_opt_float(cells[10]),
                q_cosine_mean=_parse_opt_float(cells[11]),
                wall_ms_per_step=float(cells[12]),
            ))
    return rows
