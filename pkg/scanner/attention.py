"""
Dot-Product Attention for RSLab
alpha = softmax over all H*W positions of <query, key_ij>; glimpse = sum alpha_ij * value_ij
"""

from dataclasses import dataclass

from numerics import Tensor, matmul, softmax
from scanner.encoder import FeatureMap
from utils.errors import DimensionError


@dataclass
class AttentionResult:
    alpha: Tensor    # (B, H, W)
    glimpse: Tensor  # (B, C_values)


def dot_attention(query: Tensor, keys: FeatureMap, values: FeatureMap) -> AttentionResult:
    """Unscaled dot-product attention; query is (B, C) or a shared (C,)"""
    query = Tensor.lift(query)
    b, h, w, c = keys.tensor.shape
    if values.tensor.shape[:3] != (b, h, w):
        raise DimensionError(f"keys {keys.tensor.shape} and values {values.tensor.shape} differ spatially")
    if query.shape[-1] != c:
        raise DimensionError(f"query dim {query.shape[-1]} != key channels {c}")
    if query.ndim == 1:
        column = query.reshape(1, c, 1)
    elif query.ndim == 2 and query.shape[0] == b:
        column = query.reshape(b, c, 1)
    else:
        raise DimensionError(f"query shape {query.shape} incompatible with batch {b}")

    scores = matmul(keys.flat(), column).reshape(b, h * w)
    alpha = softmax(scores, axis=-1)
    glimpse = matmul(alpha.reshape(b, 1, h * w), values.flat()).reshape(b, values.channels)
    return AttentionResult(alpha=alpha.reshape(b, h, w), glimpse=glimpse)
