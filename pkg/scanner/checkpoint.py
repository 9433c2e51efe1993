"""
Checkpoint Container for RSLab
Versioned binary: magic, header (version, config echo, vocab, manifest), raw little-endian payloads
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from config.schema import EncoderConfig, InputConfig, ModelConfig
from scanner.model import RobustScanner
from scanner.vocab import Vocab
from utils.errors import ConfigError, ContractError, DataIOError
from utils.logger import get_logger

logger = get_logger("checkpoint")

MAGIC = b"RSLBCKPT"
FORMAT_VERSION = 1
_DTYPES = {"float64": "<f8", "float32": "<f4"}


def save_checkpoint(
    model: RobustScanner,
    path: Path,
    dtype: str = "float64",
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write the model; float64 round-trips bit-exactly"""
    if dtype not in _DTYPES:
        raise ConfigError(f"checkpoint dtype must be one of {sorted(_DTYPES)}, got {dtype}")
    manifest, payloads, offset = [], [], 0
    for name, tensor in model.params.items():
        raw = np.ascontiguousarray(tensor.data, dtype=_DTYPES[dtype]).tobytes()
        manifest.append({"name": name, "dtype": dtype, "shape": list(tensor.shape), "offset": offset})
        payloads.append(raw)
        offset += len(raw)

    header = {
        "format_version": FORMAT_VERSION,
        "config": {
            "model": model.config.model_dump(mode="json"),
            "encoder": model.encoder_config.model_dump(mode="json"),
            "input": model.input_config.model_dump(mode="json"),
        },
        "vocab": model.vocab.to_dict(),
        "manifest": manifest,
        "extra": extra or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IQ", FORMAT_VERSION, len(header_bytes)))
            fh.write(header_bytes)
            for raw in payloads:
                fh.write(raw)
    except OSError as e:
        raise DataIOError(f"cannot write checkpoint {path}: {e}") from e
    logger.artifact_written("checkpoint", path)
    return path


def read_checkpoint(path: Path) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """(header, name -> float64 array)"""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataIOError(f"cannot read checkpoint {path}: {e}") from e
    if not blob.startswith(MAGIC):
        raise DataIOError(f"{path} is not an RSLab checkpoint")
    cursor = len(MAGIC)
    if len(blob) < cursor + struct.calcsize("<IQ"):
        raise DataIOError(f"checkpoint {path} truncated in the preamble")
    version, header_len = struct.unpack_from("<IQ", blob, cursor)
    if version != FORMAT_VERSION:
        raise DataIOError(f"checkpoint format version {version} unsupported (expected {FORMAT_VERSION})")
    cursor += struct.calcsize("<IQ")
    try:
        header = json.loads(blob[cursor:cursor + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataIOError(f"checkpoint {path} has a corrupt header: {e}") from e
    base = cursor + header_len

    if not isinstance(header, dict):
        raise DataIOError(f"checkpoint {path} header is not a JSON object")

    arrays: Dict[str, np.ndarray] = {}
    try:
        for entry in header["manifest"]:
            dt = np.dtype(_DTYPES[entry["dtype"]])
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            start = base + entry["offset"]
            if start + count * dt.itemsize > len(blob):
                raise DataIOError(f"checkpoint {path} truncated at {entry['name']}")
            flat = np.frombuffer(blob, dtype=dt, count=count, offset=start)
            arrays[entry["name"]] = flat.astype(np.float64).reshape(entry["shape"])
    except (KeyError, TypeError, ValueError) as e:
        raise DataIOError(f"checkpoint {path} has a malformed manifest: {e!r}") from e
    return header, arrays


def load_checkpoint(path: Path) -> RobustScanner:
    """Rebuild the model from the config echo and load its parameters"""
    header, arrays = read_checkpoint(path)
    try:
        config = header["config"]
        model_config = ModelConfig.model_validate(config["model"])
        encoder_config = EncoderConfig.model_validate(config["encoder"])
        input_config = InputConfig.model_validate(config["input"])
        vocab = Vocab.from_dict(header["vocab"])
    except (KeyError, TypeError, ValidationError) as e:
        raise DataIOError(f"checkpoint {path} has an incomplete header: {e!r}") from e
    # seed is irrelevant: every value is overwritten below
    model = RobustScanner.build(model_config, 0, encoder_config, input_config, vocab)
    try:
        model.params.load_state(arrays)
    except ContractError as e:
        raise DataIOError(f"checkpoint {path} does not match its config: {e}") from e
    logger.debug(f"loaded {len(arrays)} tensors from {path}")
    return model
