"""
Fusion Head for RSLab
Gated fusion of the two glimpses, static baselines, and the character classifier
"""

from typing import Optional, Tuple

import numpy as np

from numerics import Initializer, Tensor, concat, linear, softmax
from utils.errors import ConfigError, DimensionError

FUSION_MODES = ("dynamic", "add", "concat")


class FusionHead:
    """Combines g_t and g'_t into g_f and maps it to class scores"""

    def __init__(self, mode: str, dim: int, num_classes: int):
        if mode not in FUSION_MODES:
            raise ConfigError(f"unknown fusion mode {mode!r}; expected one of {FUSION_MODES}")
        self.mode = mode
        self.dim = dim
        self.num_classes = num_classes
        self.W_a: Optional[Tensor] = None
        self.W_p: Optional[Tensor] = None
        self.W_c: Optional[Tensor] = None
        self.W: Tensor = None
        self.b: Tensor = None

    def init_params(self, init: Initializer, fuse: bool = True):
        if fuse and self.mode == "dynamic":
            self.W_a = init.linear("fusion.W_a", self.dim, 2 * self.dim)
            self.W_p = init.linear("fusion.W_p", self.dim, 2 * self.dim)
        elif fuse and self.mode == "concat":
            self.W_c = init.linear("fusion.W_c", self.dim, 2 * self.dim)
        self.W = init.linear("classifier.W", self.num_classes, self.dim)
        self.b = init.zeros("classifier.b", (self.num_classes,))

    @staticmethod
    def _pair(g: Tensor, g_prime: Tensor) -> Tensor:
        if g.shape != g_prime.shape:
            raise DimensionError(f"glimpse shapes differ: {g.shape} vs {g_prime.shape}")
        return concat([g, g_prime], axis=-1)

    def dynamic_fuse(self, g: Tensor, g_prime: Tensor) -> Tuple[Tensor, Tensor]:
        """w = sigmoid(W_a [g; g']); g_f = w * (W_p [g; g'])"""
        pair = self._pair(g, g_prime)
        w = linear(pair, self.W_a).sigmoid()
        return w * linear(pair, self.W_p), w

    def static_fuse(self, g: Tensor, g_prime: Tensor, mode: Optional[str] = None) -> Tensor:
        mode = mode or self.mode
        if mode == "add":
            if g.shape != g_prime.shape:
                raise DimensionError(f"glimpse shapes differ: {g.shape} vs {g_prime.shape}")
            return g + g_prime
        if mode == "concat":
            return linear(self._pair(g, g_prime), self.W_c)
        raise ConfigError(f"unknown static fusion mode {mode!r}; expected add or concat")

    def fuse(self, g: Tensor, g_prime: Tensor) -> Tuple[Tensor, Optional[Tensor]]:
        if self.mode == "dynamic":
            return self.dynamic_fuse(g, g_prime)
        return self.static_fuse(g, g_prime), None

    def logits(self, g_f: Tensor) -> Tensor:
        if g_f.shape[-1] != self.W.shape[1]:
            raise DimensionError(f"classifier expects {self.W.shape[1]}-dim input, got {g_f.shape[-1]}")
        return linear(g_f, self.W, self.b)

    def classify(self, g_f: Tensor) -> Tensor:
        """Probabilities over the classes"""
        return softmax(self.logits(g_f), axis=-1)


def argmax_lowest(probs: np.ndarray) -> np.ndarray:
    """Argmax along the last axis; ties go to the lowest class index"""
    return np.argmax(probs, axis=-1)
