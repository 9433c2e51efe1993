"""
Convolutional Encoder for RSLab
Stack of 3x3 conv -> ReLU -> optional 2x2 pool blocks, then a 1x1 channel reduction
"""

from dataclasses import dataclass
from typing import Dict, List, Optional

from config.schema import EncoderConfig, InputConfig
from numerics import Initializer, Tensor, conv2d, max_pool2d
from utils.errors import DimensionError, InputError
from utils.logger import get_logger

logger = get_logger("encoder")


@dataclass
class FeatureMap:
    """Encoder output F, channels-last: (B, H, W, C)"""

    tensor: Tensor

    @property
    def batch(self) -> int:
        return self.tensor.shape[0]

    @property
    def height(self) -> int:
        return self.tensor.shape[1]

    @property
    def width(self) -> int:
        return self.tensor.shape[2]

    @property
    def channels(self) -> int:
        return self.tensor.shape[3]

    def flat(self) -> Tensor:
        """(B, H*W, C) view for attention"""
        b, h, w, c = self.tensor.shape
        return self.tensor.reshape(b, h * w, c)

    def nchw(self) -> Tensor:
        return self.tensor.transpose(0, 3, 1, 2)

    @classmethod
    def from_nchw(cls, tensor: Tensor) -> "FeatureMap":
        return cls(tensor.transpose(0, 2, 3, 1))


class Encoder:
    """Desk-scale stand-in for the deep residual backbone"""

    def __init__(self, config: EncoderConfig, input_config: InputConfig, c_model: int):
        self.config = config
        self.input_config = input_config
        self.c_model = c_model
        self.blocks: List[Dict[str, Tensor]] = []
        self.reduce: Dict[str, Tensor] = {}

    def init_params(self, init: Initializer, prefix: str = "encoder"):
        c_in = 1
        for i, c_out in enumerate(self.config.channels):
            self.blocks.append(init.conv(f"{prefix}.block{i}.conv", c_in, c_out, 3))
            c_in = c_out
        self.reduce = init.conv(f"{prefix}.reduce", c_in, self.c_model, 1)
        logger.debug(f"encoder: {len(self.blocks)} blocks, stride {self.stride}, reduce {c_in}->{self.c_model}")

    @property
    def stride(self) -> int:
        return self.config.stride

    def output_size(self, height: int, width: int) -> tuple:
        """Spatial dims of F for an input of the given size"""
        for pooled in self.config.pool:
            if pooled:
                height, width = height // 2, width // 2
        return height, width

    def _check_image(self, images: Tensor):
        _, channels, height, width = images.shape
        if channels != 1:
            raise InputError(f"encoder expects grayscale input, got {channels} channels")
        if height < self.stride or width < self.stride:
            raise InputError(
                f"image {height}x{width} is smaller than one encoder receptive step ({self.stride}px)"
            )
        if height != self.input_config.height:
            raise InputError(f"image height {height} != input.height {self.input_config.height}")
        if width > self.input_config.max_width:
            raise InputError(f"image width {width} exceeds input.max_width {self.input_config.max_width}")
        data = images.data
        if data.min() < 0.0 or data.max() > 1.0:
            raise InputError("pixel values must lie in [0, 1]")

    def encode(self, images: Tensor) -> FeatureMap:
        """Raw backbone features for (B, 1, H0, W0) or (1, H0, W0) images"""
        images = Tensor.lift(images)
        if images.ndim == 3:
            images = images.reshape((1,) + images.shape)
        if images.ndim != 4:
            raise InputError(f"encoder expects (B, 1, H, W) images, got {images.shape}")
        self._check_image(images)

        # ink = 1, background = 0, so zero padding matches the page
        x = 1.0 - images
        for block, pooled in zip(self.blocks, self.config.pool):
            x = conv2d(x, block["weight"], block["bias"], stride=1, padding=1).relu()
            if pooled:
                x = max_pool2d(x, 2)
        return FeatureMap.from_nchw(x)

    def reduce_channels(self, raw: FeatureMap) -> FeatureMap:
        """1x1 conv to c_model channels; spatial dims unchanged"""
        expected = self.reduce["weight"].shape[1]
        if raw.channels != expected:
            raise DimensionError(f"reduce_channels expects {expected} channels, got {raw.channels}")
        return FeatureMap.from_nchw(conv2d(raw.nchw(), self.reduce["weight"], self.reduce["bias"]))

    def __call__(self, images: Tensor) -> FeatureMap:
        return self.reduce_channels(self.encode(images))


def reduce_channels(raw: FeatureMap, weight: Tensor, bias: Optional[Tensor] = None) -> FeatureMap:
    """Standalone 1x1 channel projection, (C_out, C_in, 1, 1) weight"""
    return FeatureMap.from_nchw(conv2d(raw.nchw(), weight, bias))


def count_encoder_params(config: EncoderConfig, c_model: int) -> int:
    """Closed-form parameter count of the encoder"""
    total, c_in = 0, 1
    for c_out in config.channels:
        total += c_out * c_in * 9 + c_out
        c_in = c_out
    return total + c_model * c_in + c_model


__all__ = ["Encoder", "FeatureMap", "reduce_channels", "count_encoder_params"]
