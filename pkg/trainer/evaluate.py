"""
Evaluation for RSLab
Greedy decoding over a dataset, sequence accuracy, per-sample TSV and per-position error rates
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import pandas as pd

from config.settings import settings
from datasynth.dataset import Dataset
from scanner.model import RobustScanner
from scanner.vocab import normalize
from trainer.batching import Batch, iter_batches
from utils.errors import DataIOError, InputError
from utils.logger import get_logger

logger = get_logger("evaluate")


@dataclass
class EvalReport:
    accuracy: float
    correct: int
    total: int
    case_sensitive: bool
    rows: pd.DataFrame   # label, prediction, correct

    def summary(self) -> dict:
        return {"accuracy": self.accuracy, "correct": self.correct, "total": self.total,
                "case_sensitive": self.case_sensitive}


def is_correct(prediction: str, label: str, case_sensitive: bool = False) -> bool:
    return normalize(prediction, case_sensitive) == normalize(label, case_sensitive)


def _decode_batch(model: RobustScanner, batch: Batch, max_len: Optional[int]) -> List[str]:
    predictions, _ = model.decode_greedy(batch.images, max_len)
    return predictions


def predict(
    model: RobustScanner,
    dataset: Dataset,
    batch_size: int = 32,
    workers: Optional[int] = None,
    max_len: Optional[int] = None,
) -> List[str]:
    """Greedy predictions in dataset order; workers share the parameters read-only"""
    batches = list(iter_batches(dataset, batch_size, model.input_config.max_width, seed=0, shuffle=False))
    workers = max(1, min(workers or settings.THREADS, len(batches)))
    if workers == 1:
        results = [_decode_batch(model, b, max_len) for b in batches]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(lambda b: _decode_batch(model, b, max_len), batches))
    return [p for chunk in results for p in chunk]


def evaluate(
    model: RobustScanner,
    dataset: Dataset,
    case_sensitive: bool = False,
    batch_size: int = 32,
    workers: Optional[int] = None,
    max_len: Optional[int] = None,
) -> EvalReport:
    """Exact-match sequence accuracy after normalization"""
    if len(dataset) == 0:
        raise InputError("cannot evaluate on an empty dataset")
    predictions = predict(model, dataset, batch_size, workers, max_len)
    flags = [is_correct(p, label, case_sensitive) for p, label in zip(predictions, dataset.labels)]
    rows = pd.DataFrame({
        "label": dataset.labels,
        "prediction": predictions,
        "correct": [int(f) for f in flags],
    })
    correct = int(sum(flags))
    report = EvalReport(accuracy=correct / len(dataset), correct=correct, total=len(dataset),
                        case_sensitive=case_sensitive, rows=rows)
    logger.debug(f"evaluated {report.total} samples: {report.correct} correct")
    return report


def write_predictions(report: EvalReport, path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        report.rows.to_csv(path, sep="\t", index=False, quoting=csv.QUOTE_NONE, escapechar="\\",
                           lineterminator="\n", encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e
    logger.artifact_written("predictions", path)
    return path


def position_error_profile(rows: pd.DataFrame) -> pd.DataFrame:
    """Per character index (1-based): how often the prediction disagrees there

    Only labels long enough to have that index count; a missing predicted
    character is an error.
    """
    labels = rows["label"].tolist()
    predictions = rows["prediction"].tolist()
    longest = max((len(label) for label in labels), default=0)
    records = []
    for k in range(longest):
        n = errors = 0
        for label, pred in zip(labels, predictions):
            if len(label) <= k:
                continue
            n += 1
            errors += int(k >= len(pred) or pred[k] != label[k])
        records.append({"position": k + 1, "errors": errors, "n": n,
                        "error_rate": errors / n if n else math.nan})
    return pd.DataFrame(records, columns=["position", "errors", "n", "error_rate"])
