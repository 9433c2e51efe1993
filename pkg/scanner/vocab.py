"""
Token Dictionary for RSLab
91 output classes (10 digits, 52 letters, 28 punctuation, <EOS>) plus internal <start>/<pad>
"""

import string
from typing import Dict, Iterable, List, Sequence

import numpy as np

from utils.errors import ConfigError, InputError

EXCLUDED_PUNCTUATION = "\\`|~"
PUNCTUATION = "".join(ch for ch in string.punctuation if ch not in EXCLUDED_PUNCTUATION)

EOS = "<EOS>"
START = "<start>"
PAD = "<pad>"

CHARSETS: Dict[str, str] = {
    "alnum62": string.digits + string.ascii_lowercase + string.ascii_uppercase,
    "alnum36": string.digits + string.ascii_lowercase,
    "digits": string.digits,
    "lower": string.ascii_lowercase,
    "desk20": "0123456789ABCDEFGHKM",
}


def resolve_charset(name: str) -> str:
    """Named charset, or literal characters after a `chars:` prefix"""
    if name.startswith("chars:"):
        chars = name[len("chars:"):]
    elif name in CHARSETS:
        chars = CHARSETS[name]
    else:
        raise ConfigError(f"unknown charset {name!r}; use one of {sorted(CHARSETS)} or chars:<characters>")
    if not chars or len(set(chars)) != len(chars):
        raise ConfigError(f"charset {name!r} must be non-empty without repeats")
    return chars


class Vocab:
    """Ordered token list; class ids are [0, num_classes), <start>/<pad> follow"""

    def __init__(self, characters: Sequence[str]):
        if len(set(characters)) != len(characters):
            raise InputError("vocab characters must be unique")
        self.characters: List[str] = list(characters)
        self.tokens: List[str] = self.characters + [EOS, START, PAD]
        self._index: Dict[str, int] = {tok: i for i, tok in enumerate(self.tokens)}
        self.eos_id = self._index[EOS]
        self.start_id = self._index[START]
        self.pad_id = self._index[PAD]

    @classmethod
    def default(cls) -> "Vocab":
        return cls(list(string.digits + string.ascii_lowercase + string.ascii_uppercase + PUNCTUATION))

    @classmethod
    def from_spec(cls, spec: str) -> "Vocab":
        """Either "default" (91 classes) or a charset name or chars:<characters>"""
        if spec == "default":
            return cls.default()
        return cls(list(resolve_charset(spec)))

    @property
    def num_classes(self) -> int:
        """Classifier outputs: characters plus <EOS>"""
        return len(self.characters) + 1

    @property
    def num_tokens(self) -> int:
        """Embedding rows: classes plus <start> and <pad>"""
        return len(self.tokens)

    def __contains__(self, ch: str) -> bool:
        return ch in self._index and self._index[ch] < self.eos_id

    def encode(self, text: str) -> List[int]:
        try:
            return [self._index[ch] for ch in text]
        except KeyError as e:
            raise InputError(f"character {e.args[0]!r} is not in the vocabulary") from e

    def decode(self, ids: Iterable[int]) -> str:
        """Characters up to the first <EOS>"""
        out = []
        for i in ids:
            i = int(i)
            if i == self.eos_id:
                break
            if 0 <= i < self.eos_id:
                out.append(self.tokens[i])
        return "".join(out)

    def check_token(self, ids) -> np.ndarray:
        ids = np.atleast_1d(np.asarray(ids, dtype=np.int64))
        if ids.size and (ids.min() < 0 or ids.max() >= self.num_tokens):
            raise InputError(f"token id outside vocab [0, {self.num_tokens}): {ids.tolist()}")
        return ids

    def to_dict(self) -> Dict[str, object]:
        return {"characters": "".join(self.characters), "eos": EOS, "start": START, "pad": PAD}

    @classmethod
    def from_dict(cls, payload: Dict[str, object]) -> "Vocab":
        return cls(list(str(payload["characters"])))


def normalize(text: str, case_sensitive: bool = False) -> str:
    """Benchmark-style scoring normalization; case-insensitive mode keeps alphanumerics only"""
    if case_sensitive:
        return text
    return "".join(ch for ch in text.lower() if ch.isalnum())
