"""
RobustScanner Model for RSLab
Encoder + hybrid branch + position enhancement branch + fusion head, with ablation wiring
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.schema import EncoderConfig, InputConfig, ModelConfig, model_config_from
from numerics import (
    Initializer, ParamSet, SplitMix64, Tensor, cross_entropy, derive_seed, no_grad, softmax, stack,
)
from scanner.encoder import Encoder, FeatureMap
from scanner.fusion_head import FusionHead, argmax_lowest
from scanner.hybrid_branch import HybridBranch
from scanner.position_branch import PositionBranch
from scanner.vocab import Vocab
from utils.errors import InputError, StepOverflowError
from utils.logger import get_logger

logger = get_logger("model")


@dataclass
class DecoderStepRecord:
    """Detached per-step values for one batch; fields absent in a variant stay None"""

    t: int
    h: Optional[np.ndarray] = None          # (B, C) hybrid query
    q: Optional[np.ndarray] = None          # (C,) position embedding
    alpha: Optional[np.ndarray] = None      # (B, H, W)
    alpha_pos: Optional[np.ndarray] = None  # (B, H, W)
    g: Optional[np.ndarray] = None
    g_pos: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None          # gate, dynamic fusion only
    g_f: Optional[np.ndarray] = None
    pred: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    prob: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _numpy(t: Optional[Tensor]) -> Optional[np.ndarray]:
    return None if t is None else t.data.copy()


def as_images(images) -> Tensor:
    images = Tensor.lift(images)
    if images.ndim == 3:
        images = images.reshape((1,) + images.shape)
    return images


class RobustScanner:
    """Trainable/decodable recognizer with variant switches full | no_hb | no_peb"""

    def __init__(
        self,
        config: ModelConfig,
        encoder_config: Optional[EncoderConfig] = None,
        input_config: Optional[InputConfig] = None,
        vocab: Optional[Vocab] = None,
    ):
        self.config = model_config_from(config)
        self.encoder_config = encoder_config or EncoderConfig()
        self.input_config = input_config or InputConfig()
        self.vocab = vocab or Vocab.from_spec(self.config.vocab)
        self.params = ParamSet()
        self.encoder = Encoder(self.encoder_config, self.input_config, self.config.c_model)
        self.hybrid = HybridBranch(self.config, self.vocab) if self.uses_hybrid else None
        self.position = PositionBranch(self.config) if self.uses_position else None
        self.head = FusionHead(self.config.fusion.mode, self.config.c_model, self.vocab.num_classes)

    @property
    def variant(self) -> str:
        return self.config.variant

    @property
    def uses_hybrid(self) -> bool:
        return self.config.variant != "no_hb"

    @property
    def uses_position(self) -> bool:
        return self.config.variant != "no_peb"

    @property
    def t_max(self) -> int:
        return self.config.position.t_max

    @classmethod
    def build(
        cls,
        config: ModelConfig,
        seed: int,
        encoder_config: Optional[EncoderConfig] = None,
        input_config: Optional[InputConfig] = None,
        vocab: Optional[Vocab] = None,
    ) -> "RobustScanner":
        """Deterministic initialization from seed"""
        model = cls(config, encoder_config, input_config, vocab)
        init = Initializer(model.params, SplitMix64(derive_seed(seed, "model.init")))
        model.encoder.init_params(init)
        if model.hybrid is not None:
            model.hybrid.init_params(init)
        if model.position is not None:
            model.position.init_params(init)
        model.head.init_params(init, fuse=model.variant == "full")
        logger.info(f"Built {model.variant} model ({model.config.position.mode}, "
                    f"{model.config.fusion.mode}): {model.params.num_params():,} parameters")
        return model

    # ------------------------------------------------------------------ forward pieces

    def features(self, images) -> FeatureMap:
        return self.encoder(as_images(images))

    def _step(self, t: int, prev_tokens, state, features, pos_keys, pos_values):
        """One decoding step; returns (logits, new hybrid state, record)"""
        record = DecoderStepRecord(t=t)
        g = g_pos = None
        if self.hybrid is not None:
            h, state = self.hybrid.step_query(prev_tokens, state)
            hybrid_att = self.hybrid.attend(h, features)
            g = hybrid_att.glimpse
            record.h, record.alpha, record.g = _numpy(h), _numpy(hybrid_att.alpha), _numpy(g)
        if self.position is not None:
            q = self.position.query(t)
            pos_att = self.position.position_attend(q, pos_keys, pos_values)
            g_pos = pos_att.glimpse
            record.q = _numpy(self.position.position_embed(t))
            record.alpha_pos, record.g_pos = _numpy(pos_att.alpha), _numpy(g_pos)

        if g is not None and g_pos is not None:
            g_f, w = self.head.fuse(g, g_pos)
            record.w = _numpy(w)
        else:
            # single-branch ablations feed their glimpse straight to the classifier
            g_f = g if g is not None else g_pos
        record.g_f = _numpy(g_f)
        logits = self.head.logits(g_f)
        probs = softmax(logits.detach(), axis=-1).data
        record.pred = argmax_lowest(probs)
        record.prob = probs[np.arange(probs.shape[0]), record.pred]
        return logits, state, record

    def _prepare(self, images):
        features = self.features(images)
        pos_keys = pos_values = None
        if self.position is not None:
            pos_keys, pos_values = self.position.prepare(features)
        state = self.hybrid.initial_state(features.batch) if self.hybrid is not None else None
        return features, pos_keys, pos_values, state

    # ------------------------------------------------------------------ public ops

    def encode_targets(self, targets: Sequence[str]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(inputs, labels, mask), each (B, L) with L = longest target + 1 for <EOS>"""
        encoded = [self.vocab.encode(text) for text in targets]
        steps = max(len(ids) for ids in encoded) + 1
        if steps > self.t_max:
            raise StepOverflowError(f"target of length {steps - 1} needs {steps} steps > T_max={self.t_max}")
        batch = len(encoded)
        labels = np.full((batch, steps), self.vocab.pad_id, dtype=np.int64)
        mask = np.zeros((batch, steps))
        for i, ids in enumerate(encoded):
            labels[i, :len(ids)] = ids
            labels[i, len(ids)] = self.vocab.eos_id
            mask[i, :len(ids) + 1] = 1.0
        inputs = np.concatenate([np.full((batch, 1), self.vocab.start_id), labels[:, :-1]], axis=1)
        return inputs, labels, mask

    def forward_teacher_forced(self, images, targets: Sequence[str]) -> Tuple[Tensor, List[DecoderStepRecord]]:
        """Mean cross-entropy over non-pad steps (EOS supervised) plus per-step records"""
        images = as_images(images)
        if images.shape[0] != len(targets):
            raise InputError(f"{images.shape[0]} images but {len(targets)} targets")
        inputs, labels, mask = self.encode_targets(targets)
        features, pos_keys, pos_values, state = self._prepare(images)
        batch, steps = labels.shape

        step_logits, records = [], []
        for t in range(1, steps + 1):
            logits, state, record = self._step(t, inputs[:, t - 1], state, features, pos_keys, pos_values)
            step_logits.append(logits)
            records.append(record)

        all_logits = stack(step_logits, axis=1).reshape(batch * steps, self.vocab.num_classes)
        # pad labels are masked; map them to class 0 so indexing stays in range
        flat_labels = np.where(labels == self.vocab.pad_id, 0, labels).reshape(-1)
        loss = cross_entropy(all_logits, flat_labels, mask.reshape(-1))
        return loss, records

    def decode_greedy(self, images, max_len: Optional[int] = None) -> Tuple[List[str], List[DecoderStepRecord]]:
        """Feed back argmax predictions until <EOS> or max_len (never beyond T_max)"""
        max_len = self.t_max if max_len is None else min(max_len, self.t_max)
        with no_grad():
            features, pos_keys, pos_values, state = self._prepare(images)
            batch = features.batch
            prev = np.full(batch, self.vocab.start_id, dtype=np.int64)
            finished = np.zeros(batch, dtype=bool)
            tokens: List[np.ndarray] = []
            records: List[DecoderStepRecord] = []
            for t in range(1, max_len + 1):
                _, state, record = self._step(t, prev, state, features, pos_keys, pos_values)
                records.append(record)
                tokens.append(record.pred)
                finished |= record.pred == self.vocab.eos_id
                prev = record.pred
                if finished.all():
                    break
        sequences = np.stack(tokens, axis=1) if tokens else np.zeros((batch, 0), dtype=np.int64)
        return [self.vocab.decode(row) for row in sequences], records

    def teacher_forced_strings(self, records: List[DecoderStepRecord]) -> List[str]:
        """Argmax sequence under teacher forcing, cut at the first <EOS>"""
        if not records:
            return []
        preds = np.stack([r.pred for r in records], axis=1)
        return [self.vocab.decode(row) for row in preds]

    @property
    def num_params(self) -> int:
        return self.params.num_params()
