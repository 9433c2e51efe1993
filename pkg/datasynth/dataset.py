"""
Dataset Storage for RSLab
PGM images, manifest.tsv (path, label) and gen.json, plus the in-memory Dataset used by training
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from PIL import Image

from numerics import SplitMix64, derive_seed
from utils.errors import DataIOError, InputError
from utils.logger import get_logger

logger = get_logger("dataset")

MANIFEST = "manifest.tsv"
GEN_INFO = "gen.json"
IMAGE_DIR = "images"


@dataclass
class Sample:
    image: np.ndarray                   # (1, H, W) in [0, 1]
    label: str
    meta: Dict[str, Any] = field(default_factory=dict)


@dataclass
class DatasetManifest:
    """Rows of (relative image path, label) plus how they were generated"""

    rows: List[Tuple[str, str]]
    charset: str
    seed: int
    kind: str = "contextless"
    root: Optional[Path] = None
    samples: List[Sample] = field(default_factory=list, repr=False)
    info: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def labels(self) -> List[str]:
        return [label for _, label in self.rows]


def write_pgm(path: Path, image: np.ndarray):
    """Binary P5, maxval 255"""
    pixels = np.rint(np.asarray(image).reshape(image.shape[-2:]) * 255.0).astype(np.uint8)
    try:
        Image.fromarray(pixels).save(path, format="PPM")
    except OSError as e:
        raise DataIOError(f"cannot write image {path}: {e}") from e


def read_pgm(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            pixels = np.asarray(img.convert("L"), dtype=np.float64)
    except (OSError, ValueError) as e:
        raise DataIOError(f"cannot read image {path}: {e}") from e
    return (pixels / 255.0)[None, :, :]


def write_manifest(manifest: DatasetManifest, out: Path) -> DatasetManifest:
    """Images, manifest.tsv and gen.json under `out`"""
    out = Path(out)
    images_dir = out / IMAGE_DIR
    try:
        images_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataIOError(f"cannot create {images_dir}: {e}") from e

    for (rel, _), sample in zip(manifest.rows, manifest.samples):
        write_pgm(out / rel, sample.image)

    frame = pd.DataFrame(manifest.rows, columns=["path", "label"])
    try:
        frame.to_csv(out / MANIFEST, sep="\t", index=False, quoting=csv.QUOTE_NONE, escapechar="\\",
                     lineterminator="\n", encoding="utf-8")
        info = dict(manifest.info, kind=manifest.kind, charset=manifest.charset,
                    seed=manifest.seed, n=len(manifest))
        (out / GEN_INFO).write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"cannot write manifest under {out}: {e}") from e
    manifest.root = out
    logger.artifact_written("dataset", out)
    return manifest


def read_manifest(root: Path) -> DatasetManifest:
    root = Path(root)
    path = root / MANIFEST
    if not path.is_file():
        raise DataIOError(f"no {MANIFEST} in {root}")
    try:
        frame = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False,
                            quoting=csv.QUOTE_NONE, escapechar="\\", encoding="utf-8")
    except (OSError, pd.errors.ParserError) as e:
        raise DataIOError(f"cannot parse {path}: {e}") from e
    if list(frame.columns) != ["path", "label"]:
        raise DataIOError(f"{path} must have columns path<TAB>label, got {list(frame.columns)}")

    info: Dict[str, Any] = {}
    if (root / GEN_INFO).is_file():
        try:
            info = json.loads((root / GEN_INFO).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise DataIOError(f"cannot read {root / GEN_INFO}: {e}") from e
    rows = list(zip(frame["path"].tolist(), frame["label"].tolist()))
    return DatasetManifest(rows=rows, charset=info.get("charset", ""), seed=int(info.get("seed", 0)),
                           kind=info.get("kind", "external"), root=root, info=info)


class Dataset:
    """Images and labels in memory, in manifest order"""

    def __init__(self, images: Sequence[np.ndarray], labels: Sequence[str], root: Optional[Path] = None):
        if len(images) != len(labels):
            raise InputError(f"{len(images)} images but {len(labels)} labels")
        self.images = list(images)
        self.labels = list(labels)
        self.root = root

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> Tuple[np.ndarray, str]:
        return self.images[i], self.labels[i]

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "Dataset":
        return cls([s.image for s in samples], [s.label for s in samples])

    @classmethod
    def from_manifest(cls, manifest: DatasetManifest) -> "Dataset":
        if manifest.samples:
            return cls([s.image for s in manifest.samples], manifest.labels, manifest.root)
        if manifest.root is None:
            raise DataIOError("manifest has neither samples nor a root directory")
        missing = [rel for rel, _ in manifest.rows if not (manifest.root / rel).is_file()]
        if missing:
            raise DataIOError(f"{len(missing)} manifest images missing on disk, first: {missing[0]}")
        images = [read_pgm(manifest.root / rel) for rel, _ in manifest.rows]
        return cls(images, manifest.labels, manifest.root)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset([self.images[i] for i in indices], [self.labels[i] for i in indices], self.root)

    def split(self, fraction: float, seed: int) -> Tuple["Dataset", "Dataset"]:
        """(train, held-out) with round(fraction * n) held out by a seeded permutation"""
        n_val = int(round(fraction * len(self)))
        if n_val == 0:
            return self, Dataset([], [], self.root)
        order = SplitMix64(derive_seed(seed, "data.split")).permutation(len(self))
        val_idx = sorted(order[:n_val].tolist())
        train_idx = sorted(order[n_val:].tolist())
        return self.subset(train_idx), self.subset(val_idx)

    def lengths(self) -> np.ndarray:
        return np.array([len(label) for label in self.labels], dtype=np.int64)


def load_dataset(root: Path) -> Dataset:
    """Read manifest.tsv and every image it names"""
    manifest = read_manifest(root)
    dataset = Dataset.from_manifest(manifest)
    logger.info(f"Loaded {len(dataset)} samples from {root}")
    return dataset
