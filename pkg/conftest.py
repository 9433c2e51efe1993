"""
Shared pytest fixtures for RSLab
Desk-sized configurations so every suite runs in seconds on one CPU
"""

import sys
import os

import numpy as np
import pytest

# Add the project root to the path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config.schema import EncoderConfig, InputConfig, SynthConfig
from datasynth.dataset import Dataset
from datasynth.generate import gen_contextless
from datasynth.render import render_string
from scanner.model import RobustScanner
from trainer.batching import pad_images

TINY_MODEL = {
    "c_model": 8,
    "hidden": 8,
    "embed": 8,
    "lstm_layers": 2,
    "vocab": "digits",
    "position": {"t_max": 8, "sincos_dim": 8},
}

TINY_FLAT = {
    "model.c_model": 8,
    "model.hidden": 8,
    "model.embed": 8,
    "model.vocab": "digits",
    "model.position.t_max": 8,
    "model.position.sincos_dim": 8,
    "encoder.blocks": 2,
    "encoder.channels": [4, 8],
    "encoder.pool": [True, True],
    "input.max_width": 32,
    "train.batch_size": 4,
    "train.epochs": 1,
}


def tiny_model_config(**overrides) -> dict:
    """TINY_MODEL with nested `position`/`fusion` dicts merged rather than replaced"""
    fields = {k: (dict(v) if isinstance(v, dict) else v) for k, v in TINY_MODEL.items()}
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(fields.get(key), dict):
            fields[key].update(value)
        else:
            fields[key] = value
    return fields


@pytest.fixture
def tiny_input() -> InputConfig:
    return InputConfig(height=16, min_width=16, max_width=32)


@pytest.fixture
def tiny_encoder() -> EncoderConfig:
    return EncoderConfig(blocks=2, channels=[4, 8], pool=[True, True])


@pytest.fixture
def synth_config() -> SynthConfig:
    return SynthConfig()


@pytest.fixture
def make_model(tiny_input, tiny_encoder):
    """Factory: make_model(seed=0, **ModelConfig overrides) -> RobustScanner"""

    def _make(seed: int = 0, **overrides) -> RobustScanner:
        return RobustScanner.build(tiny_model_config(**overrides), seed, tiny_encoder, tiny_input)

    return _make


@pytest.fixture
def render_batch(tiny_input, synth_config):
    """Factory: render_batch(texts, seed=None) -> (B, 1, 16, 32) right-padded images"""

    def _render(texts, seed=None) -> np.ndarray:
        images = [render_string(t, synth_config, tiny_input, seed=seed) for t in texts]
        return pad_images(images, tiny_input.max_width)

    return _render


@pytest.fixture
def tiny_dataset(tiny_input, synth_config) -> Dataset:
    manifest = gen_contextless(12, (1, 3), "digits", seed=3, config=synth_config,
                               input_config=tiny_input, t_max=8, workers=1)
    return Dataset.from_manifest(manifest)


@pytest.fixture
def dataset_dir(tmp_path, tiny_input, synth_config):
    """A small contextless dataset written to disk"""
    out = tmp_path / "data"
    gen_contextless(10, (1, 3), "digits", seed=5, out=out, config=synth_config,
                    input_config=tiny_input, t_max=8, workers=1)
    return out
