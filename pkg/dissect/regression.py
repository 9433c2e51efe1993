"""
Query-to-Position Regression for RSLab
Least-squares fit t = W_r h_t + b_r with a seeded train/test split and R^2 on each side
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel

from dissect.queries import QueryBank, query_matrix
from numerics import SplitMix64, derive_seed
from utils.errors import DataIOError, InsufficientDataError, UndefinedR2Error
from utils.logger import get_logger

logger = get_logger("dissect")

RIDGE = 1e-8


class RegressionReport(BaseModel):
    l: int
    n: int
    r2_train: float
    r2_test: float
    split_seed: int

    def write(self, path: Path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(self.model_dump(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except OSError as e:
            raise DataIOError(f"cannot write {path}: {e}") from e
        logger.artifact_written("regression report", path)
        return path


@dataclass
class RegressionResult:
    r2_train: float
    r2_test: float
    W_r: np.ndarray       # (k,)
    b_r: float
    l: int
    n: int                # query rows used
    n_train: int
    split_seed: int

    def report(self) -> RegressionReport:
        return RegressionReport(l=self.l, n=self.n, r2_train=self.r2_train,
                                r2_test=self.r2_test, split_seed=self.split_seed)


def r_squared(y: np.ndarray, y_hat: np.ndarray, where: str = "") -> float:
    """1 - SS_res / SS_tot"""
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedR2Error(f"R^2 undefined{' on ' + where if where else ''}: all targets are equal")
    ss_res = float(np.sum((y - y_hat) ** 2))
    return 1.0 - ss_res / ss_tot


def fit_linear(X: np.ndarray, y: np.ndarray, ridge: float = RIDGE):
    """Normal equations on [X, 1] with ridge on the Gram diagonal; returns (W, b)"""
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    gram = A.T @ A + ridge * np.eye(A.shape[1])
    coef = np.linalg.solve(gram, A.T @ y)
    return coef[:-1], float(coef[-1])


def position_regression(
    bank: QueryBank,
    l: int,
    split: float = 0.9,
    seed: int = 0,
    ridge: float = RIDGE,
    n_features: Optional[int] = None,
) -> RegressionResult:
    """Regress the step index on the query; n_features keeps only the leading query dimensions"""
    X, t = query_matrix(bank, l)
    if n_features is not None:
        X = X[:, :n_features]
    n = X.shape[0]
    n_train = int(round(split * n))
    if n_train < 2 or n - n_train < 1:
        raise InsufficientDataError(f"l={l}: {n} queries cannot fill a {split:.0%}/{1 - split:.0%} split")
    if np.ptp(t) == 0.0:
        raise UndefinedR2Error(f"R^2 undefined for l={l}: every query sits at the same step")

    split_seed = derive_seed(seed, f"regression.split:{l}")
    order = SplitMix64(split_seed).permutation(n)
    train_idx, test_idx = np.sort(order[:n_train]), np.sort(order[n_train:])
    # each side needs two distinct steps for R^2 to exist
    for side, idx in (("training", train_idx), ("test", test_idx)):
        if idx.size < 2 or np.ptp(t[idx]) == 0.0:
            raise InsufficientDataError(
                f"l={l}: the {side} split holds {idx.size} queries without two distinct steps "
                f"({n} queries, split {split:.0%})"
            )

    W, b = fit_linear(X[train_idx], t[train_idx], ridge)
    r2_train = r_squared(t[train_idx], X[train_idx] @ W + b, "the training split")
    r2_test = r_squared(t[test_idx], X[test_idx] @ W + b, "the test split")
    logger.info(f"l={l}: position regression R2 train {r2_train:.4f}, test {r2_test:.4f} ({n} queries)")
    return RegressionResult(r2_train=r2_train, r2_test=r2_test, W_r=W, b_r=b, l=l, n=n,
                            n_train=n_train, split_seed=split_seed)
