#!/usr/bin/env python3
"""
Tensor kernel tests for RSLab
Tape semantics, op values, parameter sets and the splitmix streams
"""

import sys
import os
import threading

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from numerics import (
    Initializer, ParamSet, SplitMix64, Tensor, concat, conv2d, cross_entropy, derive_seed, linear,
    log_softmax, lstm_cell, matmul, max_pool2d, no_grad, set_debug, sincos_table, softmax, stack,
)
from utils.errors import ContractError, DimensionError, NumericError
from utils.logger import get_logger

logger = get_logger("test_numerics")


def _naive_conv(x, w, b, padding):
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    bsz, _, h, wd = xp.shape
    c_out, c_in, k, _ = w.shape
    out = np.zeros((bsz, c_out, h - k + 1, wd - k + 1))
    for n in range(bsz):
        for o in range(c_out):
            for i in range(h - k + 1):
                for j in range(wd - k + 1):
                    out[n, o, i, j] = np.sum(xp[n, :, i:i + k, j:j + k] * w[o]) + b[o]
    return out


# ---------------------------------------------------------------------- tape


def test_broadcast_add_gradient_sums_over_expanded_axis():
    a = Tensor(np.ones((3, 2)), requires_grad=True)
    b = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    (a + b).sum().backward()
    assert_array_equal(a.grad, np.ones((3, 2)))
    assert_array_equal(b.grad, [3.0, 3.0])


def test_gradients_accumulate_until_zero_grad():
    x = Tensor(np.array([2.0]), requires_grad=True)
    (x * x).sum().backward()
    (x * x).sum().backward()
    assert_array_equal(x.grad, [8.0])
    x.zero_grad()
    assert x.grad is None


def test_backward_needs_scalar_tracked_loss():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        (x * 2.0).backward()
    with pytest.raises(ContractError):
        Tensor(np.ones(1)).sum().backward()


def test_shared_subexpression_gets_both_paths():
    x = Tensor(np.array([3.0]), requires_grad=True)
    y = x * x
    (y + y).sum().backward()
    assert_array_equal(x.grad, [12.0])


def test_no_grad_stops_recording():
    x = Tensor(np.ones(2), requires_grad=True)
    with no_grad():
        y = x * 3.0
    assert not y.requires_grad
    assert (x * 3.0).requires_grad


def test_no_grad_is_per_thread():
    x = Tensor(np.ones(2), requires_grad=True)
    seen = {}

    def worker():
        seen["tracked"] = (x * 2.0).requires_grad

    with no_grad():
        thread = threading.Thread(target=worker)
        thread.start()
        thread.join()
    assert seen["tracked"] is True


def test_fancy_index_accumulates_repeated_rows():
    table = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
    table[np.array([0, 0, 2])].sum().backward()
    assert_array_equal(table.grad, [[2.0, 2.0], [0.0, 0.0], [1.0, 1.0]])


def test_debug_mode_rejects_non_finite_outputs():
    previous = set_debug(True)
    try:
        with pytest.raises(NumericError):
            Tensor(np.array([np.inf])) + 1.0
    finally:
        set_debug(previous)
    # validation off again: the same op passes through
    assert not np.isfinite((Tensor(np.array([np.inf])) + 1.0).data).all()


def test_matmul_shape_errors():
    with pytest.raises(DimensionError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))
    with pytest.raises(DimensionError):
        matmul(Tensor(np.ones(3)), Tensor(np.ones((3, 2))))


def test_concat_and_stack_split_gradients():
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    b = Tensor(np.ones((2, 3)), requires_grad=True)
    weights = np.arange(10.0).reshape(2, 5)
    (concat([a, b], axis=1) * weights).sum().backward()
    assert_array_equal(a.grad, weights[:, :2])
    assert_array_equal(b.grad, weights[:, 2:])

    c = Tensor(np.zeros(3), requires_grad=True)
    d = Tensor(np.zeros(3), requires_grad=True)
    (stack([c, d], axis=0) * np.array([[1.0], [2.0]])).sum().backward()
    assert_array_equal(d.grad, [2.0, 2.0, 2.0])
    with pytest.raises(DimensionError):
        stack([Tensor(np.ones(2)), Tensor(np.ones(3))])


# ---------------------------------------------------------------------- ops


def test_softmax_is_stable_for_large_scores():
    p = softmax(Tensor(np.array([[1000.0, 1000.0, -1000.0]])))
    assert np.all(np.isfinite(p.data))
    assert_allclose(p.data, [[0.5, 0.5, 0.0]], atol=1e-15)
    assert_allclose(np.exp(log_softmax(Tensor(np.array([[1.0, 2.0, 3.0]]))).data).sum(), 1.0)


def test_cross_entropy_uniform_logits_is_log_vocab():
    loss = cross_entropy(Tensor(np.zeros((4, 7))), np.array([0, 1, 2, 3]))
    assert loss.item() == pytest.approx(np.log(7.0), rel=1e-12)


def test_cross_entropy_ignores_masked_rows():
    logits = np.array([[2.0, 0.0, -1.0], [50.0, -50.0, 0.0]])
    full = cross_entropy(Tensor(logits[:1]), np.array([1])).item()
    masked = cross_entropy(Tensor(logits), np.array([1, 1]), mask=np.array([1.0, 0.0])).item()
    assert masked == pytest.approx(full, rel=1e-12)


def test_cross_entropy_contract_errors():
    with pytest.raises(ContractError):
        cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 1]), mask=np.zeros(2))
    with pytest.raises(DimensionError):
        cross_entropy(Tensor(np.zeros(3)), np.array([0]))


def test_conv2d_matches_direct_loops():
    rng = SplitMix64(11)
    x = rng.uniform(-1, 1, (2, 2, 5, 6))
    w = rng.uniform(-1, 1, (3, 2, 3, 3))
    b = rng.uniform(-1, 1, 3)
    out = conv2d(Tensor(x), Tensor(w), Tensor(b), padding=1)
    assert out.shape == (2, 3, 5, 6)
    assert_allclose(out.data, _naive_conv(x, w, b, 1), atol=1e-12)


def test_conv2d_squeezes_unbatched_input_and_checks_channels():
    x = Tensor(np.ones((2, 4, 4)))
    w = Tensor(np.ones((1, 2, 3, 3)))
    assert conv2d(x, w).shape == (1, 2, 2)
    with pytest.raises(DimensionError):
        conv2d(Tensor(np.ones((1, 3, 4, 4))), w)


def test_max_pool_routes_gradient_to_first_maximum():
    x = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
    out = max_pool2d(x, 2)
    assert out.shape == (1, 1, 1, 1)
    out.sum().backward()
    assert_array_equal(x.grad[0, 0], [[1.0, 0.0], [0.0, 0.0]])


def test_max_pool_drops_ragged_edge():
    x = Tensor(np.arange(15.0).reshape(1, 1, 3, 5))
    out = max_pool2d(x, 2)
    assert_array_equal(out.data[0, 0], [[6.0, 8.0]])


def test_lstm_cell_with_zero_weights():
    d_h = 3
    params = {"W_ih": Tensor(np.zeros((4 * d_h, 2))), "W_hh": Tensor(np.zeros((4 * d_h, d_h))),
              "b": Tensor(np.zeros(4 * d_h))}
    c = np.array([0.4, -1.0, 2.0])
    h_next, c_next = lstm_cell(Tensor(np.ones(2)), Tensor(np.zeros(d_h)), Tensor(c), params)
    # every sigmoid gate is 0.5 and the candidate is tanh(0) = 0
    assert h_next.shape == (d_h,)
    assert_allclose(c_next.data, 0.5 * c, atol=1e-15)
    assert_allclose(h_next.data, 0.5 * np.tanh(0.5 * c), atol=1e-15)


def test_lstm_cell_rejects_inconsistent_params():
    params = {"W_ih": Tensor(np.zeros((8, 2))), "W_hh": Tensor(np.zeros((8, 3))), "b": Tensor(np.zeros(8))}
    with pytest.raises(DimensionError):
        lstm_cell(Tensor(np.ones(2)), Tensor(np.zeros(3)), Tensor(np.zeros(3)), params)


def test_linear_uses_out_in_weight_layout():
    x = Tensor(np.array([[1.0, 2.0]]))
    w = Tensor(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
    assert_array_equal(linear(x, w, Tensor(np.ones(3))).data, [[2.0, 3.0, 4.0]])


def test_sincos_table_values():
    table = sincos_table(np.arange(3), 4)
    assert table.shape == (3, 4)
    assert_array_equal(table[0], [0.0, 1.0, 0.0, 1.0])
    assert table[2, 0] == pytest.approx(np.sin(2.0))
    assert table[2, 3] == pytest.approx(np.cos(2.0 / 1000.0 ** 0.5))


def test_sigmoid_keeps_tails_inside_the_open_interval():
    x = np.array([-800.0, -100.0, -40.0, -38.0, -30.0, 0.0, 30.0, 40.0, 800.0])
    out = Tensor(x).sigmoid().data
    assert np.all((out > 0.0) & (out < 1.0))
    assert out[5] == 0.5
    moderate = slice(1, 6)
    assert_allclose(out[moderate], np.exp(x[moderate]) / (1.0 + np.exp(x[moderate])), rtol=1e-12)
    assert np.all(np.diff(out[:6]) > 0.0)


# ---------------------------------------------------------------------- parameters


def test_param_set_orders_and_scopes():
    params = ParamSet()
    params.add("b.weight", Tensor(np.zeros((2, 3))))
    params.add("a.bias", Tensor(np.zeros(4)))
    assert list(params) == ["a.bias", "b.weight"]
    assert params["a.bias"].requires_grad
    assert list(params.scope("b")) == ["weight"]
    assert params.num_params() == 10
    with pytest.raises(ContractError):
        params.add("a.bias", Tensor(np.zeros(1)))


def test_load_state_checks_names_and_shapes():
    params = ParamSet({"w": Tensor(np.zeros(2))})
    params.load_state({"w": np.array([1.0, 2.0])})
    assert_array_equal(params["w"].data, [1.0, 2.0])
    with pytest.raises(ContractError):
        params.load_state({"v": np.zeros(2)})
    with pytest.raises(ContractError):
        params.load_state({"w": np.zeros(3)})


def test_initializer_is_seeded():
    def build(seed):
        params = ParamSet()
        init = Initializer(params, SplitMix64(seed))
        init.lstm("cell", 3, 4)
        init.conv("conv", 1, 2, 3)
        return params

    a, b, c = build(1), build(1), build(2)
    assert list(a) == ["cell.W_hh", "cell.W_ih", "cell.b", "conv.bias", "conv.weight"]
    assert a["cell.W_ih"].shape == (16, 3)
    for name in a:
        assert_array_equal(a[name].data, b[name].data)
    assert not np.array_equal(a["cell.W_ih"].data, c["cell.W_ih"].data)
    assert np.all(np.abs(a["cell.W_hh"].data) <= 0.5)


# ---------------------------------------------------------------------- random streams


def test_splitmix_streams_are_reproducible():
    assert_array_equal(SplitMix64(5).next_u64(8), SplitMix64(5).next_u64(8))
    assert not np.array_equal(SplitMix64(5).next_u64(8), SplitMix64(6).next_u64(8))
    # drawing in two blocks continues the same stream
    rng = SplitMix64(5)
    assert_array_equal(np.concatenate([rng.next_u64(3), rng.next_u64(5)]), SplitMix64(5).next_u64(8))


def test_splitmix_ranges():
    rng = SplitMix64(123)
    u = rng.random(10000)
    assert u.min() >= 0.0 and u.max() < 1.0
    ints = rng.integers(3, 7, 5000)
    assert set(ints.tolist()) == {3, 4, 5, 6}
    assert sorted(rng.permutation(50).tolist()) == list(range(50))
    assert set(rng.choice("xyz", 100)) <= set("xyz")
    with pytest.raises(ValueError):
        rng.integers(4, 4, 1)


def test_derive_seed_separates_purposes():
    assert derive_seed(7, "model.init") == derive_seed(7, "model.init")
    assert derive_seed(7, "model.init") != derive_seed(7, "data.split")
    assert derive_seed(7, "model.init") != derive_seed(8, "model.init")
    assert 0 <= derive_seed(-1, "x") < 2 ** 64
