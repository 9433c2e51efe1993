"""
Dataset Generators for RSLab
Contextless random strings and lexicon words, rendered in index-range shards
"""

import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from config.schema import InputConfig, SynthConfig
from config.settings import settings
from datasynth.dataset import IMAGE_DIR, DatasetManifest, Sample, write_manifest
from datasynth.font import check_text
from datasynth.render import render_string
from datasynth.words import builtin_words, read_wordlist
from numerics import SplitMix64, derive_seed
from scanner.vocab import resolve_charset as vocab_charset
from utils.errors import ConfigError, InputError
from utils.logger import get_logger

logger = get_logger("datasynth")


def resolve_charset(name: str) -> str:
    """Charset characters, checked against the built-in font"""
    chars = vocab_charset(name)
    check_text(chars)
    return chars


def _sample_rng(seed: int, index: int) -> SplitMix64:
    return SplitMix64(derive_seed(seed, f"sample:{index}"))


def contextless_labels(n: int, len_range: Tuple[int, int], charset: str, seed: int) -> List[str]:
    """Uniform length in len_range, then i.i.d. uniform characters"""
    lo, hi = len_range
    labels = []
    for i in range(n):
        rng = _sample_rng(seed, i)
        length = int(rng.integers(lo, hi + 1, 1)[0])
        labels.append("".join(rng.choice(charset, length)))
    return labels


def lexicon_labels(n: int, words: Sequence[str], seed: int) -> List[str]:
    """Words drawn with replacement"""
    return [_sample_rng(seed, i).choice(words, 1)[0] for i in range(n)]


def _render_shard(
    start: int, labels: Sequence[str], seed: int, config: SynthConfig, input_config: InputConfig
) -> List[Sample]:
    shard = []
    for offset, label in enumerate(labels):
        index = start + offset
        render_seed = derive_seed(seed, f"render:{index}")
        image = render_string(label, config, input_config, seed=render_seed)
        shard.append(Sample(image=image, label=label, meta={
            "index": index, "seed": render_seed, "scale": [config.scale_x, config.scale_y],
            "jitter": config.jitter,
        }))
    return shard


def render_all(
    labels: Sequence[str],
    seed: int,
    config: SynthConfig,
    input_config: InputConfig,
    workers: Optional[int] = None,
) -> List[Sample]:
    """Render in index-range shards; output is identical for any worker count"""
    workers = max(1, min(workers or settings.THREADS, len(labels) or 1))
    size = math.ceil(len(labels) / workers) if labels else 0
    shards = [(s, labels[s:s + size]) for s in range(0, len(labels), size)] if size else []
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(_render_shard, s, chunk, seed, config, input_config) for s, chunk in shards]
        results = [f.result() for f in futures]
    return [sample for shard in results for sample in shard]


def _check_len_range(len_range: Tuple[int, int], t_max: int):
    lo, hi = len_range
    if lo < 1 or hi < lo or hi > t_max - 1:
        raise ConfigError(f"length range {lo}..{hi} must lie within 1..{t_max - 1} (T_max={t_max})")


def _manifest(kind: str, labels: List[str], samples: List[Sample], charset: str, seed: int,
              config: SynthConfig, input_config: InputConfig, extra: Dict) -> DatasetManifest:
    width = max(6, len(str(len(labels) - 1)))
    rows = [(f"{IMAGE_DIR}/{i:0{width}d}.pgm", label) for i, label in enumerate(labels)]
    info = {
        "font": "builtin-5x7",
        "synth": config.model_dump(mode="json"),
        "input": input_config.model_dump(mode="json"),
        **extra,
    }
    return DatasetManifest(rows=rows, charset=charset, seed=seed, kind=kind, samples=samples, info=info)


def gen_contextless(
    n: int,
    len_range: Tuple[int, int],
    charset: str,
    seed: int,
    out: Optional[Path] = None,
    config: Optional[SynthConfig] = None,
    input_config: Optional[InputConfig] = None,
    t_max: int = 36,
    workers: Optional[int] = None,
) -> DatasetManifest:
    """Random character sequences, written to `out` when given"""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    _check_len_range(len_range, t_max)
    config = config or SynthConfig()
    input_config = input_config or InputConfig()
    chars = resolve_charset(charset)

    logger.module_start("Contextless synthesis")
    started = time.time()
    labels = contextless_labels(n, len_range, chars, seed)
    samples = render_all(labels, seed, config, input_config, workers)
    manifest = _manifest("contextless", labels, samples, chars, seed, config, input_config,
                         {"charset_name": charset, "len_range": list(len_range)})
    if out is not None:
        write_manifest(manifest, out)
    logger.module_complete("Contextless synthesis", time.time() - started)
    return manifest


def gen_lexicon(
    n: int,
    wordlist: Optional[Sequence[str]],
    seed: int,
    out: Optional[Path] = None,
    config: Optional[SynthConfig] = None,
    input_config: Optional[InputConfig] = None,
    t_max: int = 36,
    workers: Optional[int] = None,
) -> DatasetManifest:
    """Words sampled with replacement; None selects the built-in word list"""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    words = builtin_words() if wordlist is None else list(wordlist)
    if not words:
        raise InputError("wordlist is empty")
    for word in words:
        check_text(word)
        if not word or len(word) > t_max - 1:
            raise InputError(f"word {word!r} must have 1..{t_max - 1} characters")
    config = config or SynthConfig()
    input_config = input_config or InputConfig()

    logger.module_start("Lexicon synthesis")
    started = time.time()
    labels = lexicon_labels(n, words, seed)
    samples = render_all(labels, seed, config, input_config, workers)
    charset = "".join(sorted(set("".join(words))))
    manifest = _manifest("lexicon", labels, samples, charset, seed, config, input_config,
                         {"vocabulary_size": len(set(words))})
    if out is not None:
        write_manifest(manifest, out)
    logger.module_complete("Lexicon synthesis", time.time() - started)
    return manifest


def generate(config: SynthConfig, seed: int, out: Optional[Path] = None,
             input_config: Optional[InputConfig] = None, t_max: int = 36) -> DatasetManifest:
    """Dispatch on config.kind"""
    if config.kind == "lexicon":
        words = read_wordlist(config.wordlist) if config.wordlist else None
        return gen_lexicon(config.n, words, seed, out, config, input_config, t_max)
    return gen_contextless(config.n, (config.len_min, config.len_max), config.charset, seed, out,
                           config, input_config, t_max)


def bigram_entropy(labels: Sequence[str]) -> float:
    """Shannon entropy (bits) of adjacent-character pairs pooled over all labels"""
    counts = Counter(pair for label in labels for pair in zip(label, label[1:]))
    total = sum(counts.values())
    if total == 0:
        return 0.0
    return -sum(c / total * math.log2(c / total) for c in counts.values())
