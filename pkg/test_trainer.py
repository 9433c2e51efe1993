#!/usr/bin/env python3
"""
Training and evaluation tests for RSLab
Adam arithmetic, batching, the epoch loop and accuracy bookkeeping
"""

import sys
import os
import csv

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_array_equal

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config.schema import TrainConfig
from datasynth.dataset import Dataset
from numerics import ParamSet, Tensor
from trainer.adam import Adam, AdamHyper, AdamState, adam_step, clip_grad_norm
from trainer.batching import epoch_order, iter_batches, pad_images
from trainer.evaluate import evaluate, is_correct, position_error_profile, predict, write_predictions
from trainer.loop import METRICS_COLUMNS, train
from utils.errors import DimensionError, InputError, NumericError
from utils.logger import get_logger

logger = get_logger("test_trainer")


# ---------------------------------------------------------------------- Adam


def test_first_adam_step_moves_by_lr():
    params = ParamSet({"p": Tensor(np.zeros(1))})
    adam_step(params, {"p": np.ones(1)}, AdamState(), AdamHyper())
    assert params["p"].data[0] == pytest.approx(-1e-3 / (1 + 1e-8), rel=1e-12)


def test_zero_gradient_leaves_parameters_unchanged():
    start = np.array([0.25, -4.0, 7.5])
    params = ParamSet({"p": Tensor(start.copy())})
    state = adam_step(params, {"p": np.zeros(3)}, AdamState(), AdamHyper())
    assert_array_equal(params["p"].data, start)
    assert state.step == 1


def test_missing_gradients_are_skipped():
    params = ParamSet({"a": Tensor(np.ones(2)), "b": Tensor(np.ones(2))})
    state = adam_step(params, {"a": np.ones(2)}, AdamState(), AdamHyper())
    assert_array_equal(params["b"].data, np.ones(2))
    assert "b" not in state.m
    with pytest.raises(DimensionError):
        adam_step(params, {"a": np.ones(3)}, state, AdamHyper())


def test_adam_trajectory_matches_reference():
    target = np.array([1.0, -2.0, 0.5])
    params = ParamSet({"p": Tensor(np.zeros(3))})
    state, hyper = AdamState(), AdamHyper(lr=0.05)

    p, m, v = np.zeros(3), np.zeros(3), np.zeros(3)
    for t in range(1, 11):
        g = 2.0 * (params["p"].data - target)
        adam_step(params, {"p": g}, state, hyper)

        g_ref = 2.0 * (p - target)
        m = 0.9 * m + (1.0 - 0.9) * g_ref
        v = 0.999 * v + (1.0 - 0.999) * (g_ref * g_ref)
        m_hat = m / (1.0 - 0.9 ** t)
        v_hat = v / (1.0 - 0.999 ** t)
        p = p - 0.05 * m_hat / (np.sqrt(v_hat) + 1e-8)
        assert_array_equal(params["p"].data, p)


def test_adam_wrapper_reads_tensor_grads():
    params = ParamSet({"p": Tensor(np.array([3.0]))})
    optimizer = Adam(params, lr=0.1)
    (params["p"] * params["p"]).sum().backward()
    optimizer.step()
    assert params["p"].data[0] == pytest.approx(2.9, abs=1e-6)
    optimizer.lr = 0.01
    assert optimizer.hyper.lr == 0.01
    optimizer.zero_grad()
    assert params["p"].grad is None


def test_clip_grad_norm():
    params = ParamSet({"a": Tensor(np.zeros(2))})
    params["a"].grad = np.array([3.0, 4.0])
    assert clip_grad_norm(params, 1.0) == pytest.approx(5.0)
    assert np.allclose(params["a"].grad, [0.6, 0.8])
    assert clip_grad_norm(params, 10.0) == pytest.approx(1.0)


# ---------------------------------------------------------------------- schedule and batching


def test_default_schedule_scales_with_epochs():
    assert TrainConfig(epochs=5).resolved_schedule() == [(3, 1e-4), (4, 1e-5)]
    assert TrainConfig(epochs=10).resolved_schedule() == [(6, 1e-4), (8, 1e-5)]
    cfg = TrainConfig(epochs=5)
    assert [cfg.lr_at(e) for e in range(1, 6)] == [1e-3, 1e-3, 1e-4, 1e-5, 1e-5]
    assert TrainConfig(epochs=4, schedule=[]).lr_at(4) == 1e-3


def test_pad_images():
    batch = pad_images([np.zeros((1, 4, 3)), np.zeros((1, 4, 5))], 6)
    assert batch.shape == (2, 1, 4, 6)
    assert np.all(batch[0, 0, :, 3:] == 1.0) and np.all(batch[0, 0, :, :3] == 0.0)
    with pytest.raises(InputError):
        pad_images([np.zeros((1, 4, 7))], 6)
    with pytest.raises(InputError):
        pad_images([np.zeros((1, 4, 3)), np.zeros((1, 5, 3))], 6)
    with pytest.raises(InputError):
        pad_images([], 6)


def test_batches_cover_each_sample_once(tiny_dataset):
    batches = list(iter_batches(tiny_dataset, 5, 32, seed=1, epoch=2))
    assert [len(b.indices) for b in batches] == [5, 5, 2]
    assert sorted(i for b in batches for i in b.indices) == list(range(12))
    assert len({b.seed for b in batches}) == 3
    assert_array_equal(epoch_order(12, 1, 2), epoch_order(12, 1, 2))
    assert not np.array_equal(epoch_order(12, 1, 2), epoch_order(12, 1, 3))
    ordered = list(iter_batches(tiny_dataset, 5, 32, seed=1, shuffle=False))
    assert ordered[0].indices == [0, 1, 2, 3, 4]


# ---------------------------------------------------------------------- training loop


def _tiny_train_config(**kw):
    fields = {"epochs": 3, "batch_size": 4, "seed": 1}
    fields.update(kw)
    return TrainConfig(**fields)


def test_training_writes_metrics_and_checkpoints(tmp_path, make_model, tiny_dataset):
    config = _tiny_train_config()
    result = train(make_model(), tiny_dataset, config, tmp_path)

    metrics = pd.read_csv(tmp_path / "metrics.csv")
    assert list(metrics.columns) == METRICS_COLUMNS
    assert metrics["epoch"].tolist() == [1, 2, 3]
    assert metrics["step"].tolist() == [3, 6, 9]
    assert metrics["lr"].tolist() == pytest.approx([config.lr_at(e) for e in (1, 2, 3)], rel=1e-12)
    assert metrics["seconds"].isna().all()
    assert metrics["val_acc"].isna().all()
    assert (tmp_path / "best.ckpt").is_file() and (tmp_path / "last.ckpt").is_file()
    assert result.steps == 9 and 1 <= result.best_epoch <= 3


def test_training_is_reproducible(tmp_path, make_model, tiny_dataset):
    for name in ("a", "b"):
        train(make_model(seed=3), tiny_dataset, _tiny_train_config(), tmp_path / name)
    for artifact in ("metrics.csv", "last.ckpt", "best.ckpt"):
        assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()


def test_validation_and_timing_columns(tmp_path, make_model, tiny_dataset):
    train_set, val_set = tiny_dataset.split(0.25, seed=0)
    result = train(make_model(), train_set, _tiny_train_config(epochs=1, record_time=True), tmp_path, val_set)
    row = result.metrics.iloc[0]
    assert 0.0 <= row["val_acc"] <= 1.0
    assert row["seconds"] >= 0.0


def test_single_sample_loss_goes_down(make_model, render_batch):
    data = Dataset([render_batch(["37"])[0]], ["37"])
    config = _tiny_train_config(epochs=5, batch_size=1, schedule=[])
    result = train(make_model(seed=2), data, config)
    losses = result.metrics["loss"].tolist()
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_training_errors(make_model, tiny_dataset):
    with pytest.raises(InputError):
        train(make_model(), Dataset([], []), _tiny_train_config())
    model = make_model()
    model.params["classifier.b"].data[:] = np.nan
    with pytest.raises(NumericError, match="batch seed"):
        train(model, tiny_dataset, _tiny_train_config(epochs=1))


# ---------------------------------------------------------------------- evaluation


def test_own_predictions_score_perfectly(make_model, tiny_dataset):
    model = make_model(seed=4)
    predictions = predict(model, tiny_dataset)
    relabelled = Dataset(tiny_dataset.images, predictions)
    report = evaluate(model, relabelled)
    assert report.accuracy == 1.0 and report.correct == report.total == 12


def test_prediction_file_recount(tmp_path, make_model, tiny_dataset):
    report = evaluate(make_model(seed=4), tiny_dataset)
    path = write_predictions(report, tmp_path / "predictions.tsv")
    rows = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False, quoting=csv.QUOTE_NONE,
                       escapechar="\\")
    assert list(rows.columns) == ["label", "prediction", "correct"]
    assert rows["label"].tolist() == tiny_dataset.labels
    recount = sum(is_correct(p, l) for p, l in zip(rows["prediction"], rows["label"]))
    assert recount == report.correct == int((rows["correct"] == "1").sum())


def test_case_mode_changes_scoring_not_predictions(make_model, tiny_dataset):
    model = make_model(seed=4)
    lenient = evaluate(model, tiny_dataset, case_sensitive=False)
    strict = evaluate(model, tiny_dataset, case_sensitive=True)
    assert lenient.rows["prediction"].tolist() == strict.rows["prediction"].tolist()
    assert is_correct("AbC", "abc") and not is_correct("AbC", "abc", case_sensitive=True)


def test_parallel_evaluation_matches_serial(make_model, tiny_dataset):
    model = make_model(seed=4)
    assert predict(model, tiny_dataset, batch_size=3, workers=1) == \
        predict(model, tiny_dataset, batch_size=3, workers=4)


def test_empty_evaluation(make_model):
    with pytest.raises(InputError):
        evaluate(make_model(), Dataset([], []))


def test_position_error_profile():
    rows = pd.DataFrame({"label": ["abc", "ab"], "prediction": ["abd", "a"]})
    profile = position_error_profile(rows)
    assert profile["position"].tolist() == [1, 2, 3]
    assert profile["errors"].tolist() == [0, 1, 1]
    assert profile["n"].tolist() == [2, 2, 1]
    assert profile["error_rate"].tolist() == [0.0, 0.5, 1.0]
