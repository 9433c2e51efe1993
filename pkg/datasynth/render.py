"""
Glyph Renderer for RSLab
Black-on-white fixed-pitch text lines from the built-in bitmap font
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from config.schema import InputConfig, SynthConfig
from datasynth.font import GLYPH_HEIGHT, GLYPH_WIDTH, check_text, glyph_bitmap
from numerics import SplitMix64
from utils.errors import ConfigError

BACKGROUND = 1.0
INK = 0.0


@dataclass
class Layout:
    """Where each glyph landed before any horizontal squeeze"""

    natural_width: int
    width: int
    top: int
    offsets: List[int] = field(default_factory=list)   # per-glyph vertical jitter
    columns: List[int] = field(default_factory=list)   # per-glyph left edge

    @property
    def squeezed(self) -> bool:
        return self.natural_width > self.width


def pitch(config: SynthConfig) -> int:
    """Glyph advance in pixels: glyph width plus one blank column, scaled"""
    return (GLYPH_WIDTH + 1) * config.scale_x


def natural_width(length: int, config: SynthConfig) -> int:
    return 2 * config.margin + length * pitch(config)


def _check_fit(config: SynthConfig, input_config: InputConfig):
    needed = GLYPH_HEIGHT * config.scale_y + 2 * config.jitter
    if needed > input_config.height:
        raise ConfigError(
            f"glyphs need {needed}px (7 x scale_y {config.scale_y} + 2 x jitter {config.jitter}) "
            f"but input.height is {input_config.height}"
        )


def layout(text: str, config: SynthConfig, input_config: InputConfig, seed: Optional[int] = None) -> Layout:
    _check_fit(config, input_config)
    glyph_h = GLYPH_HEIGHT * config.scale_y
    top = (input_config.height - glyph_h) // 2
    nat = natural_width(len(text), config)
    width = min(max(nat, input_config.min_width), input_config.max_width)
    if seed is not None and config.jitter and text:
        offsets = SplitMix64(seed).integers(-config.jitter, config.jitter + 1, len(text)).tolist()
    else:
        offsets = [0] * len(text)
    columns = [config.margin + i * pitch(config) for i in range(len(text))]
    return Layout(natural_width=nat, width=width, top=top, offsets=offsets, columns=columns)


def squeeze_columns(canvas: np.ndarray, width: int) -> np.ndarray:
    """Nearest-neighbor horizontal resample of (H, W_nat) to (H, width)"""
    src = canvas.shape[1]
    idx = np.minimum(((np.arange(width) + 0.5) * src / width).astype(np.int64), src - 1)
    return canvas[:, idx]


def render_string(
    text: str,
    config: Optional[SynthConfig] = None,
    input_config: Optional[InputConfig] = None,
    seed: Optional[int] = None,
) -> np.ndarray:
    """(1, H, W) image in [0, 1]: white background, black glyphs

    Lines narrower than input.min_width are padded with background on the
    right; wider than input.max_width are squeezed horizontally. Vertical
    jitter per glyph is drawn only when a seed is given.
    """
    config = config or SynthConfig()
    input_config = input_config or InputConfig()
    check_text(text)
    plan = layout(text, config, input_config, seed)

    canvas = np.full((input_config.height, max(plan.natural_width, plan.width)), BACKGROUND)
    for ch, left, dy in zip(text, plan.columns, plan.offsets):
        cell = np.kron(glyph_bitmap(ch), np.ones((config.scale_y, config.scale_x), dtype=bool))
        top = plan.top + dy
        region = canvas[top:top + cell.shape[0], left:left + cell.shape[1]]
        region[cell] = INK

    if plan.squeezed:
        canvas = squeeze_columns(canvas, plan.width)
    return canvas[None, :, :plan.width].copy()
