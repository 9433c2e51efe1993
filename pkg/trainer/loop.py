"""
Training Loop for RSLab
Teacher-forced Adam epochs with the step schedule, metrics.csv and best/last checkpoints
"""

import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from config.schema import TrainConfig
from datasynth.dataset import Dataset
from scanner.checkpoint import save_checkpoint
from scanner.model import RobustScanner
from trainer.adam import Adam, clip_grad_norm
from trainer.batching import iter_batches
from trainer.evaluate import evaluate, is_correct
from utils.errors import DataIOError, InputError, NumericError
from utils.logger import get_logger

logger = get_logger("trainer")

METRICS_COLUMNS = ["epoch", "step", "loss", "train_acc", "val_acc", "lr", "seconds"]
BEST = "best.ckpt"
LAST = "last.ckpt"
METRICS = "metrics.csv"


@dataclass
class TrainResult:
    metrics: pd.DataFrame
    best_path: Optional[Path]
    last_path: Optional[Path]
    best_epoch: int
    best_score: float
    steps: int


def write_metrics(rows: List[dict], path: Path) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=METRICS_COLUMNS)
    try:
        frame.to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e
    return frame


def _check_finite_grads(model: RobustScanner, where: str):
    for name, tensor in model.params.items():
        if tensor.grad is not None and not np.all(np.isfinite(tensor.grad)):
            raise NumericError(f"non-finite gradient for {name} {where}")


def train(
    model: RobustScanner,
    dataset: Dataset,
    config: TrainConfig,
    out: Optional[Path] = None,
    val_set: Optional[Dataset] = None,
) -> TrainResult:
    """Run config.epochs epochs; fully determined by config.seed and the data

    The best checkpoint is chosen by validation accuracy, or by training
    accuracy when no validation set is given. Ties keep the earlier epoch.
    """
    if len(dataset) == 0:
        raise InputError("training set is empty")
    out = Path(out) if out is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    optimizer = Adam(model.params, lr=config.base_lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    width = model.input_config.max_width
    rows: List[dict] = []
    best_score, best_epoch, step = -math.inf, 0, 0
    best_path = last_path = None

    logger.module_start(f"Training {model.variant}")
    logger.info(f"{len(dataset)} training samples, {len(val_set) if val_set else 0} validation, "
                f"schedule {config.resolved_schedule()}")
    for epoch in range(1, config.epochs + 1):
        started = time.time()
        optimizer.lr = config.lr_at(epoch)
        loss_sum, hits, seen = 0.0, 0, 0
        for batch in iter_batches(dataset, config.batch_size, width, config.seed, epoch):
            where = f"in epoch {epoch} batch {batch.index} (batch seed {batch.seed})"
            optimizer.zero_grad()
            loss, records = model.forward_teacher_forced(batch.images, batch.labels)
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(f"non-finite loss {value} {where}")
            loss.backward()
            _check_finite_grads(model, where)
            if config.clip_norm is not None:
                clip_grad_norm(model.params, config.clip_norm)
            optimizer.step()
            step += 1

            # a teacher-forced argmax string equal to the label is exactly a greedy hit
            predicted = model.teacher_forced_strings(records)
            hits += sum(is_correct(p, label, config.case_sensitive) for p, label in zip(predicted, batch.labels))
            loss_sum += value * len(batch.labels)
            seen += len(batch.labels)

        train_acc = hits / seen
        val_acc = math.nan
        if val_set is not None and len(val_set):
            val_acc = evaluate(model, val_set, config.case_sensitive, config.batch_size).accuracy
        score = train_acc if math.isnan(val_acc) else val_acc
        elapsed = time.time() - started
        rows.append({
            "epoch": epoch,
            "step": step,
            "loss": loss_sum / seen,
            "train_acc": train_acc,
            "val_acc": val_acc,
            "lr": optimizer.lr,
            "seconds": round(elapsed, 3) if config.record_time else math.nan,
        })
        logger.epoch_done(epoch, loss_sum / seen, train_acc, val_acc, optimizer.lr)

        if out is not None:
            write_metrics(rows, out / METRICS)
            extra = {"epoch": epoch, "step": step, "score": score}
            last_path = save_checkpoint(model, out / LAST, extra=extra)
            if score > best_score:
                best_path = save_checkpoint(model, out / BEST, extra=extra)
        if score > best_score:
            best_score, best_epoch = score, epoch

    logger.module_complete(f"Training {model.variant}")
    return TrainResult(
        metrics=pd.DataFrame(rows, columns=METRICS_COLUMNS),
        best_path=best_path,
        last_path=last_path,
        best_epoch=best_epoch,
        best_score=best_score,
        steps=step,
    )
