"""
Dissection Exports for RSLab
Heatmap and gate-profile CSVs for external plotting
"""

from pathlib import Path

import numpy as np
import pandas as pd

from utils.errors import DataIOError, InputError
from utils.logger import get_logger

logger = get_logger("dissect")


def export_heatmap(S: np.ndarray, path: Path) -> Path:
    """Header row of indices 1..l, then l rows of values with 9 decimals"""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InputError(f"heatmap needs a square matrix, got shape {S.shape}")
    frame = pd.DataFrame(S, columns=[str(i) for i in range(1, S.shape[0] + 1)])
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.9f", lineterminator="\n")
    except OSError as e:
        raise DataIOError(f"cannot write heatmap {path}: {e}") from e
    logger.artifact_written("heatmap", path)
    return path


def read_heatmap(path: Path) -> np.ndarray:
    try:
        return pd.read_csv(path).to_numpy(dtype=np.float64)
    except (OSError, pd.errors.ParserError) as e:
        raise DataIOError(f"cannot read heatmap {path}: {e}") from e


def export_gate_profile(profile: pd.DataFrame, path: Path) -> Path:
    """step,mean_gate,n"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        profile.to_csv(path, index=False, float_format="%.9f", lineterminator="\n")
    except OSError as e:
        raise DataIOError(f"cannot write gate profile {path}: {e}") from e
    logger.artifact_written("gate profile", path)
    return path
