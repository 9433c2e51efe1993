"""
RSLab Run Configuration
pydantic models for every configurable module, addressable by flat dotted keys
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from utils.errors import ConfigError, DataIOError


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class InputConfig(_Section):
    height: int = Field(16, ge=4)
    min_width: int = Field(16, ge=4)
    max_width: int = Field(64, ge=4)

    @model_validator(mode="after")
    def _widths(self):
        if self.min_width > self.max_width:
            raise ValueError(f"input.min_width {self.min_width} > input.max_width {self.max_width}")
        return self

    @classmethod
    def full_size(cls) -> "InputConfig":
        """Height 48, width 48-160"""
        return cls(height=48, min_width=48, max_width=160)


class EncoderConfig(_Section):
    blocks: int = Field(4, ge=1)
    channels: List[int] = Field(default_factory=lambda: [16, 32, 64, 128])
    pool: List[bool] = Field(default_factory=lambda: [True, True, False, False])

    @model_validator(mode="after")
    def _lengths(self):
        if len(self.channels) != self.blocks or len(self.pool) != self.blocks:
            raise ValueError(
                f"encoder.channels ({len(self.channels)}) and encoder.pool ({len(self.pool)}) "
                f"must both have encoder.blocks={self.blocks} entries"
            )
        if any(c < 1 for c in self.channels):
            raise ValueError("encoder.channels must be positive")
        return self

    @property
    def stride(self) -> int:
        return 2 ** sum(self.pool)


class PositionConfig(_Section):
    t_max: int = Field(36, ge=2)
    mode: Literal["learned_pam", "sincos", "none"] = "learned_pam"
    values: Literal["F", "F_hat"] = "F"
    sincos_dim: int = Field(128, ge=2)


class FusionConfig(_Section):
    mode: Literal["dynamic", "add", "concat"] = "dynamic"


class ModelConfig(_Section):
    variant: Literal["full", "no_hb", "no_peb"] = "full"
    c_model: int = Field(128, ge=1)
    hidden: int = Field(128, ge=1)
    embed: int = Field(128, ge=1)
    lstm_layers: int = Field(2, ge=1)
    vocab: str = "default"
    position: PositionConfig = Field(default_factory=PositionConfig)
    fusion: FusionConfig = Field(default_factory=FusionConfig)

    @model_validator(mode="after")
    def _variant_rules(self):
        if self.variant == "no_hb" and self.position.mode == "none":
            raise ValueError("variant no_hb requires position.mode != none")
        if self.position.values == "F_hat" and self.position.mode == "sincos":
            raise ValueError("position.values=F_hat is incompatible with position.mode=sincos")
        if self.hidden != self.c_model:
            raise ValueError(f"model.hidden ({self.hidden}) must equal model.c_model ({self.c_model})")
        return self


class TrainConfig(_Section):
    base_lr: float = Field(1e-3, gt=0)
    schedule: Optional[List[Tuple[int, float]]] = None
    batch_size: int = Field(32, ge=1)
    epochs: int = Field(8, ge=1)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    clip_norm: Optional[float] = Field(None, gt=0)
    val_fraction: float = Field(0.1, ge=0, lt=1)
    val_data: Optional[str] = None
    record_time: bool = False
    case_sensitive: bool = False
    seed: int = 0

    @field_validator("schedule")
    @classmethod
    def _schedule(cls, value):
        if value is None:
            return value
        epochs = [e for e, _ in value]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise ValueError("train.schedule epochs must be strictly increasing")
        if any(lr <= 0 for _, lr in value):
            raise ValueError("train.schedule learning rates must be > 0")
        return value

    def resolved_schedule(self) -> List[Tuple[int, float]]:
        """Explicit schedule, or the 5-epoch boundaries (3 -> 1e-4, 4 -> 1e-5) scaled to self.epochs"""
        if self.schedule is not None:
            return list(self.schedule)
        out: List[Tuple[int, float]] = []
        for epoch, lr in ((3, 1e-4), (4, 1e-5)):
            scaled = max(2, round(epoch * self.epochs / 5))
            if scaled <= self.epochs and (not out or scaled > out[-1][0]):
                out.append((scaled, lr))
        return out

    def lr_at(self, epoch: int) -> float:
        """Learning rate in effect during 1-based `epoch`"""
        lr = self.base_lr
        for boundary, value in self.resolved_schedule():
            if epoch >= boundary:
                lr = value
        return lr


class SynthConfig(_Section):
    kind: Literal["contextless", "lexicon"] = "contextless"
    n: int = Field(500, ge=1)
    len_min: int = Field(3, ge=1)
    len_max: int = Field(8, ge=1)
    charset: str = "alnum62"
    wordlist: Optional[str] = None
    scale_x: int = Field(1, ge=1)
    scale_y: int = Field(2, ge=1)
    jitter: int = Field(1, ge=0)
    margin: int = Field(2, ge=0)

    @model_validator(mode="after")
    def _lengths(self):
        if self.len_min > self.len_max:
            raise ValueError(f"synth length range {self.len_min}..{self.len_max} is empty")
        return self


class RunConfig(_Section):
    command: str = ""
    seed: int = 0
    out: str = "out"
    input: InputConfig = Field(default_factory=InputConfig)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    args: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_flat(cls, flat: Dict[str, Any]) -> "RunConfig":
        nested: Dict[str, Any] = {}
        for key, value in flat.items():
            node = nested
            parts = key.split(".")
            # `args` holds command-specific extras verbatim
            if parts[0] == "args" and len(parts) > 1:
                nested.setdefault("args", {})[".".join(parts[1:])] = value
                continue
            for part in parts[:-1]:
                node = node.setdefault(part, {})
                if not isinstance(node, dict):
                    raise ConfigError(f"config key {key} collides with a scalar entry")
            node[parts[-1]] = value
        try:
            return cls.model_validate(nested)
        except ValidationError as e:
            raise ConfigError(describe_error(e)) from e

    def to_flat(self) -> Dict[str, Any]:
        flat: Dict[str, Any] = {}

        def _walk(prefix: str, value: Any):
            if isinstance(value, dict) and prefix != "args":
                for k in sorted(value):
                    _walk(f"{prefix}.{k}" if prefix else k, value[k])
            elif prefix == "args":
                for k in sorted(value):
                    flat[f"args.{k}"] = value[k]
            else:
                flat[prefix] = list(value) if isinstance(value, tuple) else value

        _walk("", self.model_dump(mode="json"))
        return flat

    def with_overrides(self, overrides: Dict[str, Any]) -> "RunConfig":
        flat = self.to_flat()
        flat.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_flat(flat)

    def write(self, path: Path):
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(self.to_flat(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except OSError as e:
            raise DataIOError(f"cannot write {path}: {e}") from e

    @classmethod
    def read(cls, path: Path) -> "RunConfig":
        try:
            flat = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise DataIOError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(flat, dict):
            raise ConfigError(f"config {path} must be a JSON object of dotted keys")
        return cls.from_flat(flat)


def describe_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        loc = ".".join(str(p) for p in item["loc"])
        parts.append(f"{loc}: {item['msg']}" if loc else item["msg"])
    return "; ".join(parts)


def model_config_from(flat_or_model: Any) -> ModelConfig:
    """Validate a ModelConfig from a dict, raising ConfigError"""
    if isinstance(flat_or_model, ModelConfig):
        return flat_or_model
    try:
        return ModelConfig.model_validate(flat_or_model)
    except ValidationError as e:
        raise ConfigError(describe_error(e)) from e
