#!/usr/bin/env python3
"""
Finite-difference gradient tests for RSLab
Every differentiable building block, then whole-model losses per variant
"""

import sys
import os

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config.schema import EncoderConfig, InputConfig, ModelConfig, SynthConfig
from datasynth.render import render_string
from numerics import (
    Initializer, ParamSet, SplitMix64, Tensor, conv2d, cross_entropy, grad_check, linear, lstm_cell,
)
from scanner.attention import dot_attention
from scanner.encoder import FeatureMap
from scanner.fusion_head import FusionHead
from scanner.model import RobustScanner
from scanner.position_branch import PositionBranch
from utils.logger import get_logger

logger = get_logger("test_gradcheck")

SEEDS = [0, 1, 2, 3, 4]


def _tensor(rng, low, high, shape):
    return Tensor(np.ascontiguousarray(rng.uniform(low, high, shape)))


def test_quadratic():
    params = ParamSet({"p": Tensor(np.array([1.5, -0.75]))})
    err = grad_check(lambda ps: (ps["p"] * ps["p"]).sum(), params, samples_per_param=None)
    assert err < 1e-9


@pytest.mark.parametrize("seed", SEEDS)
def test_linear_softmax_cross_entropy(seed):
    rng = SplitMix64(seed)
    params = ParamSet({
        "x": _tensor(rng, 1.0, 2.0, (1, 4)),
        "W": _tensor(rng, -0.1, 0.1, (3, 4)),
        "b": Tensor(np.zeros(3)),
    })
    f = lambda ps: cross_entropy(linear(ps["x"], ps["W"], ps["b"]), np.array([1]))  # noqa: E731
    assert grad_check(f, params, samples_per_param=None) < 1e-6


@pytest.mark.parametrize("seed", SEEDS)
def test_conv2d(seed):
    rng = SplitMix64(seed)
    r = rng.uniform(0.5, 1.5, (1, 3, 4, 5))
    params = ParamSet({
        "x": _tensor(rng, 0.5, 1.5, (1, 2, 4, 5)),
        "k": _tensor(rng, 0.1, 1.0, (3, 2, 3, 3)),
        "b": _tensor(rng, -0.5, 0.5, (3,)),
    })
    f = lambda ps: (conv2d(ps["x"], ps["k"], ps["b"], padding=1) * r).sum()  # noqa: E731
    assert grad_check(f, params, samples_per_param=None) < 1e-6


@pytest.mark.parametrize("seed", SEEDS)
def test_lstm_cell(seed):
    rng = SplitMix64(seed)
    params = ParamSet({
        "x": _tensor(rng, 0.5, 1.0, (2, 3)),
        "h": _tensor(rng, 0.5, 1.0, (2, 4)),
        "c": _tensor(rng, 0.5, 1.0, (2, 4)),
        "W_ih": _tensor(rng, -0.5, 0.5, (16, 3)),
        "W_hh": _tensor(rng, -0.5, 0.5, (16, 4)),
        "b": _tensor(rng, -0.1, 0.1, (16,)),
    })

    def f(ps):
        h_next, _ = lstm_cell(ps["x"], ps["h"], ps["c"], {k: ps[k] for k in ("W_ih", "W_hh", "b")})
        return h_next.sum()

    assert grad_check(f, params, samples_per_param=None) < 1e-5


@pytest.mark.parametrize("seed", SEEDS)
def test_attention_glimpse(seed):
    rng = SplitMix64(seed)
    r = rng.uniform(0.5, 1.5, (2, 5))
    params = ParamSet({
        "q": _tensor(rng, -1.0, 1.0, (2, 5)),
        "keys": _tensor(rng, -1.0, 1.0, (2, 3, 4, 5)),
        "values": _tensor(rng, 0.5, 1.5, (2, 3, 4, 5)),
    })

    def f(ps):
        att = dot_attention(ps["q"], FeatureMap(ps["keys"]), FeatureMap(ps["values"]))
        return (att.glimpse * r).sum()

    assert grad_check(f, params, samples_per_param=None) < 1e-5


@pytest.mark.parametrize("seed", SEEDS)
def test_position_aware_keys(seed):
    rng = SplitMix64(seed)
    config = ModelConfig(c_model=3, hidden=3, embed=3, position={"t_max": 4})
    params = ParamSet()
    branch = PositionBranch(config)
    branch.init_params(Initializer(params, SplitMix64(seed + 100)))
    params.add("F", _tensor(rng, -1.0, 1.0, (1, 2, 3, 3)))
    r = rng.uniform(0.5, 1.5, (1, 2, 3, 3))

    f = lambda ps: (branch.position_aware(FeatureMap(ps["F"])).f_hat.tensor * r).sum()  # noqa: E731
    assert grad_check(f, params, samples_per_param=6, seed=seed) < 1e-4


@pytest.mark.parametrize("seed", SEEDS)
def test_dynamic_gate(seed):
    rng = SplitMix64(seed)
    params = ParamSet()
    head = FusionHead("dynamic", 3, 5)
    head.init_params(Initializer(params, SplitMix64(seed + 100)))
    params.add("g", _tensor(rng, 0.5, 1.5, (2, 3)))
    params.add("g_prime", _tensor(rng, 0.5, 1.5, (2, 3)))
    r = rng.uniform(1.0, 2.0, (2, 3))

    def f(ps):
        g_f, _ = head.dynamic_fuse(ps["g"], ps["g_prime"])
        return (g_f * r).sum()

    assert grad_check(f, params, samples_per_param=None) < 1e-5


@pytest.mark.parametrize("seed", SEEDS)
def test_fused_classifier_loss(seed):
    rng = SplitMix64(seed)
    params = ParamSet()
    head = FusionHead("dynamic", 3, 5)
    head.init_params(Initializer(params, SplitMix64(seed + 100)))
    params.add("g", _tensor(rng, 0.5, 1.5, (2, 3)))
    params.add("g_prime", _tensor(rng, 0.5, 1.5, (2, 3)))

    def f(ps):
        g_f, _ = head.dynamic_fuse(ps["g"], ps["g_prime"])
        return cross_entropy(head.logits(g_f), np.array([0, 3]))

    assert grad_check(f, params, samples_per_param=None) < 1e-5


MODEL_CASES = [
    {"variant": "full"},
    {"variant": "full", "fusion": {"mode": "concat"}},
    {"variant": "full", "fusion": {"mode": "add"}},
    {"variant": "full", "position": {"mode": "sincos", "sincos_dim": 4, "t_max": 4}},
    {"variant": "full", "position": {"mode": "learned_pam", "values": "F_hat", "t_max": 4}},
    {"variant": "no_hb"},
    {"variant": "no_peb"},
]


@pytest.mark.parametrize("case", MODEL_CASES, ids=lambda c: "-".join(str(v) for v in c.values()))
def test_whole_model_loss(case):
    input_config = InputConfig(height=8, min_width=8, max_width=12)
    synth = SynthConfig(scale_x=1, scale_y=1, jitter=0, margin=0)
    image = render_string("12", synth, input_config)
    noise = SplitMix64(9).uniform(0.0, 1.0, image.shape)
    # keep pixels strictly inside (0, 1) so no ReLU sits exactly on its kink
    image = image * 0.8 + 0.1 + 0.05 * noise

    fields = {"c_model": 4, "hidden": 4, "embed": 4, "lstm_layers": 1, "vocab": "digits",
              "position": {"t_max": 4}}
    fields.update(case)
    model = RobustScanner.build(fields, 3, EncoderConfig(blocks=1, channels=[2], pool=[True]), input_config)

    f = lambda ps: model.forward_teacher_forced(image, ["12"])[0]  # noqa: E731
    assert grad_check(f, model.params, samples_per_param=3, floor=1e-5) < 1e-4
