"""
Averaged Cosine Similarity for RSLab
S_l(i, j) = mean over ordered pairs of distinct sequences (m != n) of cos(h_i^m, h_j^n)
"""

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from dissect.queries import QueryBank
from utils.errors import InsufficientDataError
from utils.logger import get_logger

logger = get_logger("dissect")


@dataclass
class SimilarityMatrix:
    S: np.ndarray        # (l, l)
    n: int               # sequences of length l
    zero_vectors: int = 0

    @property
    def l(self) -> int:
        return self.S.shape[0]


def unit_rows(matrix: np.ndarray) -> Tuple[np.ndarray, int]:
    """Rows scaled to unit norm; zero rows stay zero so their cosines are 0"""
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    zero = norms[:, 0] == 0.0
    safe = np.where(norms == 0.0, 1.0, norms)
    return np.where(zero[:, None], 0.0, matrix / safe), int(zero.sum())


def similarity_matrix(bank: QueryBank, l: int) -> SimilarityMatrix:
    mats = bank.matrices(l)
    n = len(mats)
    if n < 2:
        raise InsufficientDataError(f"similarity at l={l} needs at least 2 sequences, found {n}")

    units, zero_vectors = [], 0
    for m in mats:
        u, zeros = unit_rows(m)
        units.append(u)
        zero_vectors += zeros
    if zero_vectors:
        logger.warning(f"l={l}: {zero_vectors} zero query vectors; their cosines count as 0")

    U = np.stack(units)                 # (n, l, C)
    total = U.sum(axis=0)               # (l, C)
    # sum over all ordered pairs minus the m == n terms
    cross = total @ total.T - np.einsum("mic,mjc->ij", U, U)
    S = cross / (n * (n - 1))
    S = np.clip(0.5 * (S + S.T), -1.0, 1.0)
    return SimilarityMatrix(S=S, n=n, zero_vectors=zero_vectors)


def band_trend(S: np.ndarray) -> Dict[str, float]:
    """Diagonal vs off-diagonal means, and how the |i-j|=1 band compares to the diagonal early vs late

    Each band ratio is S(i, i+1) over the mean of S(i, i) and S(i+1, i+1);
    early/late average the first and second half of those ratios.
    """
    S = np.asarray(S, dtype=np.float64)
    l = S.shape[0]
    if l < 2:
        raise InsufficientDataError("band trend needs l >= 2")
    diag = np.diag(S)
    off = S[~np.eye(l, dtype=bool)]
    band = np.diag(S, k=1)
    ratios = band / ((diag[:-1] + diag[1:]) / 2.0)
    half = max(1, len(ratios) // 2)
    early = ratios[:half]
    late = ratios[-half:]
    return {
        "diag_mean": float(diag.mean()),
        "offdiag_mean": float(off.mean()),
        "band_ratio_early": float(early.mean()),
        "band_ratio_late": float(late.mean()),
    }
