"""
Query Collection for RSLab
Teacher-forced hybrid queries h_t grouped by sequence length, and the per-step gate profile
"""

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from datasynth.dataset import Dataset
from numerics import no_grad
from scanner.model import RobustScanner
from trainer.batching import pad_images
from utils.errors import ContractError, InsufficientDataError
from utils.logger import get_logger

logger = get_logger("dissect")


@dataclass
class QueryBank:
    """For each length l: one (l, C) matrix per sequence, rows h_1..h_l"""

    by_length: Dict[int, List[np.ndarray]] = field(default_factory=dict)
    sources: Dict[int, List[int]] = field(default_factory=dict)   # dataset index per matrix

    def lengths(self) -> List[int]:
        return sorted(self.by_length)

    def count(self, l: int) -> int:
        return len(self.by_length.get(l, []))

    def matrices(self, l: int) -> List[np.ndarray]:
        return self.by_length.get(l, [])

    def total_queries(self) -> int:
        return sum(l * len(mats) for l, mats in self.by_length.items())

    def add(self, l: int, matrix: np.ndarray, source: int = -1):
        if matrix.shape[0] != l:
            raise ContractError(f"query matrix for length {l} has {matrix.shape[0]} rows")
        self.by_length.setdefault(l, []).append(matrix)
        self.sources.setdefault(l, []).append(source)


def _length_groups(dataset: Dataset, l_filter: Optional[Iterable[int]], t_max: int) -> Dict[int, List[int]]:
    wanted = None if l_filter is None else set(l_filter)
    groups: Dict[int, List[int]] = defaultdict(list)
    for i, label in enumerate(dataset.labels):
        l = len(label)
        if l == 0 or l + 1 > t_max:
            continue
        if wanted is None or l in wanted:
            groups[l].append(i)
    return dict(sorted(groups.items()))


def _teacher_forced(model: RobustScanner, dataset: Dataset, idx: List[int]):
    images = pad_images([dataset.images[i] for i in idx], model.input_config.max_width)
    with no_grad():
        _, records = model.forward_teacher_forced(images, [dataset.labels[i] for i in idx])
    return records


def collect_queries(
    model: RobustScanner,
    dataset: Dataset,
    l_filter: Optional[Iterable[int]] = None,
    batch_size: int = 32,
) -> QueryBank:
    """Top-layer hybrid LSTM states under teacher forcing, in dataset order within each length"""
    if not model.uses_hybrid:
        raise ContractError(f"variant {model.variant} has no hybrid branch to collect queries from")
    bank = QueryBank()
    for l, indices in _length_groups(dataset, l_filter, model.t_max).items():
        for start in range(0, len(indices), batch_size):
            idx = indices[start:start + batch_size]
            records = _teacher_forced(model, dataset, idx)
            # records cover steps 1..l+1; the EOS step is not a character query
            stacked = np.stack([records[t].h for t in range(l)], axis=1)   # (B, l, C)
            for row, source in enumerate(idx):
                bank.add(l, stacked[row].copy(), source)
    logger.info(f"Collected {bank.total_queries()} queries over lengths {bank.lengths()}")
    return bank


def step1_invariance(bank: QueryBank) -> float:
    """Largest |h_1^m - h_1^n| over every pair of sequences in the bank"""
    firsts = [m[0] for l in bank.lengths() for m in bank.matrices(l)]
    if len(firsts) < 2:
        raise InsufficientDataError("need at least two sequences to compare step-1 queries")
    stacked = np.stack(firsts)
    return float(np.max(np.abs(stacked - stacked[0])))


def gate_profile(model: RobustScanner, dataset: Dataset, batch_size: int = 32) -> pd.DataFrame:
    """Mean gate value w_t over channels and samples for each decoding step (EOS step included)"""
    if model.variant != "full" or model.config.fusion.mode != "dynamic":
        raise ContractError("gate profile needs the full variant with dynamic fusion")
    sums: Dict[int, float] = defaultdict(float)
    counts: Dict[int, int] = defaultdict(int)
    for l, indices in _length_groups(dataset, None, model.t_max).items():
        for start in range(0, len(indices), batch_size):
            idx = indices[start:start + batch_size]
            records = _teacher_forced(model, dataset, idx)
            for record in records[:l + 1]:
                sums[record.t] += float(record.w.mean(axis=1).sum())
                counts[record.t] += len(idx)
    if not counts:
        raise InsufficientDataError("no decodable samples for the gate profile")
    steps = sorted(counts)
    return pd.DataFrame({
        "step": steps,
        "mean_gate": [sums[t] / counts[t] for t in steps],
        "n": [counts[t] for t in steps],
    })


def query_matrix(bank: QueryBank, l: int) -> Tuple[np.ndarray, np.ndarray]:
    """Stack every query of length-l sequences as (N*l, C) with their step indices 1..l"""
    mats = bank.matrices(l)
    if not mats:
        raise InsufficientDataError(f"no sequences of length {l} in the query bank")
    X = np.concatenate(mats, axis=0)
    t = np.tile(np.arange(1, l + 1, dtype=np.float64), len(mats))
    return X, t
