"""
Hybrid Branch for RSLab
Two-layer LSTM query h_t over the previous token, then attention over F
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from config.schema import ModelConfig
from numerics import Initializer, Tensor, lstm_cell
from scanner.attention import AttentionResult, dot_attention
from scanner.encoder import FeatureMap
from scanner.vocab import Vocab


@dataclass
class HybridState:
    """Per-layer (h, c) pairs, each (B, hidden)"""

    layers: List[Tuple[Tensor, Tensor]]

    @property
    def query(self) -> Tensor:
        return self.layers[-1][0]


class HybridBranch:
    """Context-and-position decoder path"""

    def __init__(self, config: ModelConfig, vocab: Vocab):
        self.config = config
        self.vocab = vocab
        self.embedding: Tensor = None
        self.lstms: List[Dict[str, Tensor]] = []

    def init_params(self, init: Initializer, prefix: str = "hybrid"):
        self.embedding = init.uniform(f"{prefix}.embedding", (self.vocab.num_tokens, self.config.embed), 0.1)
        d_in = self.config.embed
        for layer in range(self.config.lstm_layers):
            self.lstms.append(init.lstm(f"{prefix}.lstm{layer}", d_in, self.config.hidden))
            d_in = self.config.hidden

    def initial_state(self, batch: int) -> HybridState:
        zeros = np.zeros((batch, self.config.hidden))
        return HybridState([(Tensor(zeros), Tensor(zeros)) for _ in self.lstms])

    def step_query(self, prev_tokens, state: HybridState) -> Tuple[Tensor, HybridState]:
        """h_t from y_{t-1} (ground truth under teacher forcing, prediction otherwise)"""
        ids = self.vocab.check_token(prev_tokens)
        batch = ids.shape[0]
        # (B, 1, d) rows: every sample goes through an identical matmul call
        x = self.embedding[ids].reshape(batch, 1, self.config.embed)
        layers = []
        for params, (h, c) in zip(self.lstms, state.layers):
            h_next, c_next = lstm_cell(x, h.reshape(batch, 1, -1), c.reshape(batch, 1, -1), params)
            layers.append((h_next.reshape(batch, -1), c_next.reshape(batch, -1)))
            x = h_next
        new_state = HybridState(layers)
        return new_state.query, new_state

    def attend(self, query: Tensor, features: FeatureMap) -> AttentionResult:
        """keys = values = F"""
        return dot_attention(query, features, features)
