#!/usr/bin/env python3
"""
Hybrid branch and attention tests for RSLab
"""

import sys
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from numerics import SplitMix64, Tensor
from scanner.attention import dot_attention
from scanner.encoder import FeatureMap
from utils.errors import DimensionError, InputError
from utils.logger import get_logger

logger = get_logger("test_hybrid_branch")


@pytest.fixture
def model(make_model):
    return make_model(variant="no_peb")


def test_parameters_and_initial_state(model):
    hybrid = model.hybrid
    assert model.params["hybrid.embedding"].shape == (13, 8)   # 10 digits + EOS, start, pad
    assert "hybrid.lstm1.W_hh" in model.params
    state = hybrid.initial_state(3)
    assert len(state.layers) == 2
    assert_array_equal(state.query.data, np.zeros((3, 8)))


def test_same_token_and_state_give_identical_rows(model):
    hybrid = model.hybrid
    start = np.full(4, model.vocab.start_id)
    h, state = hybrid.step_query(start, hybrid.initial_state(4))
    assert h.shape == (4, 8)
    for row in range(1, 4):
        assert_array_equal(h.data[row], h.data[0])
    # a different previous token changes the query
    h2, _ = hybrid.step_query(np.array([0, 1, 2, 3]), state)
    assert not np.array_equal(h2.data[0], h2.data[1])


@pytest.mark.parametrize("seed", range(5))
def test_second_query_depends_on_the_previous_token(make_model, seed):
    hybrid = make_model(seed=seed, variant="no_peb").hybrid
    start = np.full(2, hybrid.vocab.start_id)
    _, state = hybrid.step_query(start, hybrid.initial_state(2))
    h2, _ = hybrid.step_query(np.array([3, 7]), state)
    assert np.max(np.abs(h2.data[0] - h2.data[1])) > 1e-6


@pytest.mark.parametrize("token", [-1, 13, 999])
def test_out_of_range_token(model, token):
    with pytest.raises(InputError):
        model.hybrid.step_query(np.array([token]), model.hybrid.initial_state(1))


def test_attend_weights_and_glimpse(model, render_batch):
    features = model.features(render_batch(["0", "98"]))
    query = Tensor(SplitMix64(1).uniform(-1, 1, (2, 8)))
    result = model.hybrid.attend(query, features)
    assert result.alpha.shape == (2, 4, 8)
    assert_allclose(result.alpha.data.sum(axis=(1, 2)), [1.0, 1.0], atol=1e-12)
    expected = np.einsum("bhw,bhwc->bc", result.alpha.data, features.tensor.data)
    assert_allclose(result.glimpse.data, expected, atol=1e-12)


def test_constant_keys_give_uniform_attention():
    values = SplitMix64(2).uniform(-1, 1, (1, 2, 3, 4))
    result = dot_attention(Tensor(np.ones(4)), FeatureMap(Tensor(np.zeros((1, 2, 3, 4)))),
                           FeatureMap(Tensor(values)))
    assert_allclose(result.alpha.data, np.full((1, 2, 3), 1.0 / 6.0), atol=1e-15)
    assert_allclose(result.glimpse.data[0], values[0].mean(axis=(0, 1)), atol=1e-12)


def test_dominant_key_takes_the_attention():
    keys = np.zeros((1, 2, 2, 3))
    keys[0, 1, 0] = [50.0, 0.0, 0.0]
    values = np.arange(12.0).reshape(1, 2, 2, 3)
    result = dot_attention(Tensor(np.array([1.0, 0.0, 0.0])), FeatureMap(Tensor(keys)), FeatureMap(Tensor(values)))
    assert result.alpha.data[0, 1, 0] > 1.0 - 1e-12
    assert_allclose(result.glimpse.data[0], values[0, 1, 0], atol=1e-9)


def test_attention_shape_errors():
    keys = FeatureMap(Tensor(np.zeros((2, 2, 2, 3))))
    with pytest.raises(DimensionError):
        dot_attention(Tensor(np.ones(4)), keys, keys)
    with pytest.raises(DimensionError):
        dot_attention(Tensor(np.ones((3, 3))), keys, keys)
    with pytest.raises(DimensionError):
        dot_attention(Tensor(np.ones(3)), keys, FeatureMap(Tensor(np.zeros((2, 1, 2, 3)))))
