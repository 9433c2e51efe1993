# Built-in lexicon for contextual datasets: common English words, lowercase, 3-8 letters
from pathlib import Path
from typing import List

from utils.errors import DataIOError, InputError

COMMON_WORDS = """
the and for are but not you all any can her was one our out day get has him his how man new now old see
two way who boy did its let put say she too use that with have this will your from they know want been
good much some time very when come here just like long make many over such take than them well were
what about after again also back because before being below between both could down each even every
first found great house into last little might more most must never next only other people place
right same should small sound still story study their there these thing think those three under until
water where which while world would write year years young above across along always animal answer
around began begin below better black bring build carry change city close color country cover cross
earth enough example family father follow food force friend group grow hand hard head hear help high
home hundred kind land large learn leave letter life light line live mother mountain move music name
near need night number often open order paper part picture plant play point power press question read
real river road round school science second seem sentence short show side simple start state stop
street strong table tell thought together town tree turn usually voice walk watch white whole wind
window word work
"""


def builtin_words() -> List[str]:
    return sorted(set(COMMON_WORDS.split()))


def read_wordlist(path: str) -> List[str]:
    """One word per line; blank lines skipped"""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataIOError(f"cannot read wordlist {path}: {e}") from e
    words = [line.strip() for line in lines if line.strip()]
    if not words:
        raise InputError(f"wordlist {path} is empty")
    return words
