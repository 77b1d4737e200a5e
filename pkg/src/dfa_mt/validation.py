"""Input validation helpers shared by the estimators and pipeline functions."""
from __future__ import annotations

from typing import Iterable, List, Optional, Sequence, Tuple

SUPPORTED_LANGS = ("en", "de", "zh")

# Languages whose words are whitespace delimited; everything else is matched
# by substring search.
SPACE_DELIMITED = frozenset({"en", "de"})


def check_lang(lang: str) -> str:
    """Normalize a language code ("EN" -> "en") and reject unknown ones."""
    if not isinstance(lang, str):
        raise TypeError(f"language code must be a string, got {type(lang).__name__}")
    code = lang.strip().lower()
    if code not in SUPPORTED_LANGS:
        raise ValueError(f"unsupported language {lang!r}; expected one of {SUPPORTED_LANGS}")
    return code


def check_pair(pair) -> Tuple[str, str]:
    """Accept "en-zh", ("en", "zh") or ["EN", "ZH"] and return a normalized tuple."""
    if isinstance(pair, str):
        parts = pair.replace("_", "-").split("-")
    else:
        parts = list(pair)
    if len(parts) != 2:
        raise ValueError(f"language pair must have two codes, got {pair!r}")
    src, tgt = check_lang(parts[0]), check_lang(parts[1])
    if src == tgt:
        raise ValueError(f"source and target language are both {src!r}")
    return src, tgt


def pair_key(pair) -> str:
    src, tgt = check_pair(pair)
    return f"{src}-{tgt}"


def check_k(k: Optional[int]) -> Optional[int]:
    """None means no cap; otherwise k must be a positive integer."""
    if k is None:
        return None
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer or None, got {k!r}")
    return k


def check_sentences(sentences: Iterable[str], allow_empty: bool = False) -> List[str]:
    if isinstance(sentences, str):
        raise TypeError("expected a sequence of sentences, got a single string")
    out = list(sentences)
    for i, s in enumerate(out):
        if not isinstance(s, str):
            raise TypeError(f"sentence {i} is {type(s).__name__}, not str")
        if not allow_empty and not s.strip():
            raise ValueError(f"sentence {i} is empty")
    return out


def check_sentence(sentence: str) -> str:
    if not isinstance(sentence, str) or not sentence.strip():
        raise ValueError("sentence must be a non-empty string")
    return sentence


def check_same_length(a: Sequence, b: Sequence, what: str = "inputs") -> None:
    if len(a) != len(b):
        raise ValueError(f"{what} differ in length: {len(a)} != {len(b)}")
