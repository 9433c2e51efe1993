"""
RSLab Ablation Runner
Trains and evaluates every cell of an ablation grid over one or more datasets
"""

import csv
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
from rich.table import Table

from config.schema import RunConfig
from config.settings import settings
from datasynth.dataset import Dataset
from scanner.model import RobustScanner
from trainer.evaluate import evaluate
from trainer.loop import train
from utils.errors import ConfigError, DataIOError, RSLabError
from utils.logger import console, get_logger

logger = get_logger("ablation_runner")

# short grid axes and the config key each one sets
GRID_AXES = {
    "variant": "model.variant",
    "fusion": "model.fusion.mode",
    "position": "model.position.mode",
}
TABLE = "ablation.tsv"


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_grid(specs: Sequence[str]) -> Dict[str, List[Any]]:
    """["variant=full,no_hb", "fusion=dynamic,add"] -> {"variant": [...], "fusion": [...]}"""
    grid: Dict[str, List[Any]] = {}
    for spec in specs or []:
        key, sep, values = spec.partition("=")
        key = key.strip()
        if not sep or not key or not values.strip():
            raise ConfigError(f"grid entry {spec!r} must look like key=v1,v2")
        if key in grid:
            raise ConfigError(f"grid axis {key} given twice")
        grid[key] = [_parse_value(v.strip()) for v in values.split(",") if v.strip()]
    if not grid:
        raise ConfigError("ablation grid is empty; pass at least one --grid key=v1,v2")
    return grid


@dataclass
class Cell:
    index: int
    values: Dict[str, Any]      # axis -> value
    config: RunConfig

    @property
    def name(self) -> str:
        return "_".join(f"{k}-{v}" for k, v in self.values.items())


def expand_grid(base: RunConfig, grid: Dict[str, List[Any]]) -> List[Cell]:
    """Cartesian product in grid order; every cell config is validated up front"""
    axes = list(grid)
    cells = []
    for i, combo in enumerate(itertools.product(*(grid[a] for a in axes))):
        values = dict(zip(axes, combo))
        overrides = {GRID_AXES.get(axis, axis): value for axis, value in values.items()}
        cells.append(Cell(index=i, values=values, config=base.with_overrides(overrides)))
    return cells


class AblationRunner:
    """Runs every (cell, dataset) pair and collects one accuracy row each"""

    def __init__(
        self,
        base: RunConfig,
        grid: Dict[str, List[Any]],
        datasets: Dict[str, Tuple[Dataset, Dataset]],
        out: Path,
        shared_train: Optional[Dataset] = None,
        workers: Optional[int] = None,
    ):
        if not datasets:
            raise ConfigError("ablation needs at least one dataset")
        self.base = base
        self.grid = grid
        self.cells = expand_grid(base, grid)
        self.datasets = datasets
        self.out = Path(out)
        self.shared_train = shared_train
        self.workers = workers or settings.THREADS

    def _jobs(self) -> List[Tuple[Cell, str]]:
        """One training job per cell with a shared training set, else one per (cell, dataset)"""
        if self.shared_train is not None:
            return [(cell, "") for cell in self.cells]
        return [(cell, name) for cell in self.cells for name in self.datasets]

    def _run_job(self, cell: Cell, train_name: str) -> List[Dict[str, Any]]:
        cfg = cell.config
        job_dir = self.out / "cells" / (cell.name + (f"__{train_name}" if train_name else ""))
        train_set = self.shared_train if self.shared_train is not None else self.datasets[train_name][0]
        model = RobustScanner.build(cfg.model, cfg.seed, cfg.encoder, cfg.input)
        result = train(model, train_set, cfg.train, job_dir)

        targets = list(self.datasets) if not train_name else [train_name]
        rows = []
        for name in targets:
            report = evaluate(model, self.datasets[name][1], cfg.train.case_sensitive,
                              cfg.train.batch_size, workers=1)
            rows.append({
                **cell.values,
                "dataset": name,
                "accuracy": report.accuracy,
                "correct": report.correct,
                "total": report.total,
                "params": model.num_params,
                "final_loss": float(result.metrics["loss"].iloc[-1]),
                "error": "",
            })
        return rows

    def _failed_rows(self, cell: Cell, train_name: str, error: Exception) -> List[Dict[str, Any]]:
        targets = list(self.datasets) if not train_name else [train_name]
        return [{**cell.values, "dataset": name, "accuracy": math.nan, "correct": 0,
                 "total": len(self.datasets[name][1]), "params": 0, "final_loss": math.nan,
                 "error": str(error)} for name in targets]

    def run(self, parallel: bool = True) -> pd.DataFrame:
        logger.module_start("Ablation")
        started = time.time()
        jobs = self._jobs()
        logger.info(f"{len(self.cells)} cells x {len(self.datasets)} datasets, {len(jobs)} training jobs")

        results: Dict[int, List[Dict[str, Any]]] = {}
        if parallel and self.workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=min(self.workers, len(jobs))) as executor:
                future_to_job = {executor.submit(self._run_job, cell, name): (k, cell, name)
                                 for k, (cell, name) in enumerate(jobs)}
                for future in as_completed(future_to_job):
                    k, cell, name = future_to_job[future]
                    results[k] = self._collect(future.result, cell, name)
        else:
            for k, (cell, name) in enumerate(jobs):
                results[k] = self._collect(lambda: self._run_job(cell, name), cell, name)

        rows = [row for k in sorted(results) for row in results[k]]
        columns = list(self.grid) + ["dataset", "accuracy", "correct", "total", "params", "final_loss", "error"]
        frame = pd.DataFrame(rows, columns=columns)
        logger.module_complete("Ablation", time.time() - started)
        return frame

    def _collect(self, fetch, cell: Cell, train_name: str) -> List[Dict[str, Any]]:
        try:
            rows = fetch()
            logger.success(f"Cell {cell.name} done")
            return rows
        except RSLabError as e:
            # a failed cell is recorded in the table and the sweep continues
            logger.error(f"Cell {cell.name} failed: {e}")
            return self._failed_rows(cell, train_name, e)


def write_table(frame: pd.DataFrame, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, sep="\t", index=False, lineterminator="\n", quoting=csv.QUOTE_NONE,
                     escapechar="\\")
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e
    logger.artifact_written("ablation table", path)
    return path


def show_table(frame: pd.DataFrame):
    table = Table(title="Ablation results")
    for column in frame.columns:
        if column not in ("error", "final_loss"):
            table.add_column(str(column))
    for _, row in frame.iterrows():
        cells = []
        for column in frame.columns:
            if column in ("error", "final_loss"):
                continue
            value = row[column]
            cells.append(f"{value:.4f}" if column == "accuracy" and not pd.isna(value) else str(value))
        table.add_row(*cells)
    console.print(table)
