"""
Position Enhancement Branch for RSLab
Step embedding q_t, position aware keys F_hat, and attention producing g'_t
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.schema import ModelConfig
from numerics import Initializer, Tensor, concat, conv2d, linear, lstm_cell, sincos_table, stack
from scanner.attention import AttentionResult, dot_attention
from scanner.encoder import FeatureMap
from utils.errors import DimensionError, StepOverflowError


@dataclass
class PositionAwareKeys:
    """F_hat plus the intermediate LSTM outputs F1 and F2, all (B, H, W, C)"""

    f_hat: FeatureMap
    f1: Optional[FeatureMap] = None
    f2: Optional[FeatureMap] = None


def sincos_keys(features: FeatureMap, dim: int = 128) -> FeatureMap:
    """Append a column-position sinusoid (pos = horizontal index j) to every feature vector"""
    b, h, w, _ = features.tensor.shape
    table = sincos_table(np.arange(w), dim)  # (W, dim)
    encoding = Tensor(np.broadcast_to(table[None, None, :, :], (b, h, w, dim)).copy())
    return FeatureMap(concat([features.tensor, encoding], axis=-1))


class PositionBranch:
    """Decoder path whose query depends on the step index only"""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.mode = config.position.mode
        self.t_max = config.position.t_max
        self.table: Tensor = None
        self.lstms: List[Dict[str, Tensor]] = []
        self.convs: List[Dict[str, Tensor]] = []
        self.query_proj: Optional[Tensor] = None

    def init_params(self, init: Initializer, prefix: str = "position"):
        c = self.config.c_model
        self.table = init.uniform(f"{prefix}.embedding", (self.t_max, c), 0.1)
        if self.mode == "learned_pam":
            for layer in range(self.config.lstm_layers):
                self.lstms.append(init.lstm(f"{prefix}.pam.lstm{layer}", c, c))
            self.convs = [init.conv(f"{prefix}.pam.conv{i}", c, c, 3) for i in range(2)]
        elif self.mode == "sincos":
            self.query_proj = init.linear(f"{prefix}.query_proj", c + self.config.position.sincos_dim, c)

    def position_embed(self, t: int) -> Tensor:
        """Row t (1-based) of the learned table"""
        if not 1 <= t <= self.t_max:
            raise StepOverflowError(f"decoding step {t} outside [1, {self.t_max}]")
        return self.table[t - 1]

    def position_aware(self, features: FeatureMap) -> PositionAwareKeys:
        """Row-wise shared LSTMs scanned left to right, then conv -> ReLU -> conv"""
        b, h, w, c = features.tensor.shape
        if c != self.config.c_model:
            raise DimensionError(f"position_aware expects {self.config.c_model} channels, got {c}")
        rows = features.tensor.reshape(b * h, w, c)
        zeros = np.zeros((b * h, c))
        states = [(Tensor(zeros), Tensor(zeros)) for _ in self.lstms]
        outputs: List[List[Tensor]] = [[] for _ in self.lstms]
        for j in range(w):
            x = rows[:, j, :]
            for layer, params in enumerate(self.lstms):
                h_next, c_next = lstm_cell(x, states[layer][0], states[layer][1], params)
                states[layer] = (h_next, c_next)
                outputs[layer].append(h_next)
                x = h_next
        f1 = FeatureMap(stack(outputs[0], axis=1).reshape(b, h, w, c))
        f2 = FeatureMap(stack(outputs[-1], axis=1).reshape(b, h, w, c))
        x = conv2d(f2.nchw(), self.convs[0]["weight"], self.convs[0]["bias"], padding=1).relu()
        x = conv2d(x, self.convs[1]["weight"], self.convs[1]["bias"], padding=1)
        return PositionAwareKeys(f_hat=FeatureMap.from_nchw(x), f1=f1, f2=f2)

    def prepare(self, features: FeatureMap) -> Tuple[FeatureMap, FeatureMap]:
        """(keys, values) for this branch, computed once per image batch"""
        if self.mode == "learned_pam":
            keys = self.position_aware(features).f_hat
            values = keys if self.config.position.values == "F_hat" else features
            return keys, values
        if self.mode == "sincos":
            return sincos_keys(features, self.config.position.sincos_dim), features
        return features, features

    def query(self, t: int) -> Tensor:
        q = self.position_embed(t)
        if self.query_proj is not None:
            return linear(q.reshape(1, -1), self.query_proj).reshape(-1)
        return q

    def position_attend(self, query: Tensor, keys: FeatureMap, values: FeatureMap) -> AttentionResult:
        """alpha' over keys (F_hat), aggregation over values (F by default)"""
        return dot_attention(query, keys, values)
