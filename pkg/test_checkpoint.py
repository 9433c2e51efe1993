#!/usr/bin/env python3
"""
Checkpoint container tests for RSLab
"""

import sys
import os
import json
import struct

import numpy as np
import pytest
from numpy.testing import assert_array_equal

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from scanner.checkpoint import MAGIC, load_checkpoint, read_checkpoint, save_checkpoint
from utils.errors import ConfigError, DataIOError
from utils.logger import get_logger

logger = get_logger("test_checkpoint")


def test_float64_round_trip_is_bit_exact(tmp_path, make_model, render_batch):
    model = make_model(seed=8)
    path = save_checkpoint(model, tmp_path / "model.ckpt")
    loaded = load_checkpoint(path)

    assert list(loaded.params) == list(model.params)
    for name, tensor in model.params.items():
        assert_array_equal(loaded.params[name].data, tensor.data)
    assert loaded.config == model.config
    assert loaded.encoder_config == model.encoder_config
    assert loaded.input_config == model.input_config
    assert loaded.vocab.characters == model.vocab.characters

    images = render_batch(["42", "7"])
    assert loaded.decode_greedy(images)[0] == model.decode_greedy(images)[0]


def test_float32_payload(tmp_path, make_model):
    model = make_model(seed=8)
    header, arrays = read_checkpoint(save_checkpoint(model, tmp_path / "half.ckpt", dtype="float32"))
    assert {entry["dtype"] for entry in header["manifest"]} == {"float32"}
    for name, tensor in model.params.items():
        assert arrays[name].dtype == np.float64
        assert_array_equal(arrays[name], tensor.data.astype(np.float32).astype(np.float64))


def test_variant_and_extra_survive(tmp_path, make_model):
    model = make_model(variant="no_hb", position={"mode": "sincos"})
    path = save_checkpoint(model, tmp_path / "nohb.ckpt", extra={"epoch": 3})
    header, _ = read_checkpoint(path)
    assert header["extra"] == {"epoch": 3}
    loaded = load_checkpoint(path)
    assert loaded.variant == "no_hb"
    assert loaded.config.position.mode == "sincos"
    assert loaded.hybrid is None


def test_unknown_dtype(tmp_path, make_model):
    with pytest.raises(ConfigError):
        save_checkpoint(make_model(), tmp_path / "x.ckpt", dtype="float16")


def test_missing_file(tmp_path):
    with pytest.raises(DataIOError):
        load_checkpoint(tmp_path / "absent.ckpt")


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTACKPT" + b"\x00" * 32)
    with pytest.raises(DataIOError):
        read_checkpoint(path)


def test_unsupported_version(tmp_path):
    path = tmp_path / "v2.ckpt"
    path.write_bytes(MAGIC + struct.pack("<IQ", 2, 2) + b"{}")
    with pytest.raises(DataIOError):
        read_checkpoint(path)


def test_corrupt_header(tmp_path):
    path = tmp_path / "header.ckpt"
    path.write_bytes(MAGIC + struct.pack("<IQ", 1, 5) + b"{bad")
    with pytest.raises(DataIOError):
        read_checkpoint(path)


@pytest.mark.parametrize("keep", [4, 12, None])
def test_truncated_file(tmp_path, make_model, keep):
    path = save_checkpoint(make_model(), tmp_path / "full.ckpt")
    blob = path.read_bytes()
    cut = tmp_path / "cut.ckpt"
    cut.write_bytes(blob[:keep] if keep is not None else blob[:-8])
    with pytest.raises(DataIOError):
        read_checkpoint(cut)


def _with_header(path, header):
    raw = json.dumps(header).encode("utf-8")
    path.write_bytes(MAGIC + struct.pack("<IQ", 1, len(raw)) + raw)
    return path


@pytest.mark.parametrize("header", [
    {},
    [1, 2],
    {"manifest": [{"name": "x"}]},
    {"manifest": [{"name": "x", "dtype": "float16", "shape": [1], "offset": 0}]},
])
def test_header_without_a_usable_manifest(tmp_path, header):
    with pytest.raises(DataIOError):
        read_checkpoint(_with_header(tmp_path / "partial.ckpt", header))


def test_header_without_config_or_vocab(tmp_path, make_model):
    path = _with_header(tmp_path / "noconfig.ckpt", {"manifest": []})
    with pytest.raises(DataIOError):
        load_checkpoint(path)

    header, _ = read_checkpoint(save_checkpoint(make_model(), tmp_path / "full.ckpt"))
    header["config"].pop("encoder")
    with pytest.raises(DataIOError):
        load_checkpoint(_with_header(tmp_path / "noencoder.ckpt", {**header, "manifest": []}))


def test_payload_that_does_not_match_the_config(tmp_path, make_model):
    header, _ = read_checkpoint(save_checkpoint(make_model(), tmp_path / "full.ckpt"))
    with pytest.raises(DataIOError):
        load_checkpoint(_with_header(tmp_path / "empty.ckpt", {**header, "manifest": []}))
