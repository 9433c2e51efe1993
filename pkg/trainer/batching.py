"""
Batching for RSLab
Seeded per-epoch order and right-padding of images to a common width
"""

from dataclasses import dataclass
from typing import Iterator, List, Sequence

import numpy as np

from datasynth.dataset import Dataset
from datasynth.render import BACKGROUND
from numerics import SplitMix64, derive_seed
from utils.errors import InputError


@dataclass
class Batch:
    index: int
    seed: int              # named in diagnostics so a failing batch can be rebuilt
    indices: List[int]
    images: np.ndarray     # (B, 1, H, W_pad)
    labels: List[str]


def pad_images(images: Sequence[np.ndarray], width: int) -> np.ndarray:
    """Stack (1, H, W_i) images right-padded with background to `width`"""
    if not images:
        raise InputError("cannot collate an empty batch")
    heights = {img.shape[-2] for img in images}
    if len(heights) != 1:
        raise InputError(f"images in one batch must share a height, got {sorted(heights)}")
    too_wide = [img.shape[-1] for img in images if img.shape[-1] > width]
    if too_wide:
        raise InputError(f"image width {max(too_wide)} exceeds padded width {width}")
    out = np.full((len(images), 1, heights.pop(), width), BACKGROUND)
    for i, img in enumerate(images):
        out[i, 0, :, :img.shape[-1]] = img.reshape(img.shape[-2:])
    return out


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return SplitMix64(derive_seed(seed, f"epoch:{epoch}")).permutation(n)


def iter_batches(
    dataset: Dataset,
    batch_size: int,
    width: int,
    seed: int,
    epoch: int = 0,
    shuffle: bool = True,
) -> Iterator[Batch]:
    order = epoch_order(len(dataset), seed, epoch) if shuffle else np.arange(len(dataset))
    for k, start in enumerate(range(0, len(order), batch_size)):
        idx = [int(i) for i in order[start:start + batch_size]]
        yield Batch(
            index=k,
            seed=derive_seed(seed, f"epoch:{epoch}:batch:{k}"),
            indices=idx,
            images=pad_images([dataset.images[i] for i in idx], width),
            labels=[dataset.labels[i] for i in idx],
        )
