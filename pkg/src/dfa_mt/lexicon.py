"""MUSE-style bilingual lexicon parsing and the multi-translation candidate set."""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import BinaryIO, Dict, FrozenSet, Iterable, Iterator, Mapping, Set, Union

from .validation import check_lang

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LexiconEntry:
    source_word: str
    target_word: str

    def __post_init__(self):
        for name in ("source_word", "target_word"):
            value = getattr(self, name)
            if not value or not value.strip() or any(c.isspace() for c in value):
                raise ValueError(f"{name} must be a non-empty token without whitespace, got {value!r}")


@dataclass(frozen=True)
class TranslationMap:
    """Source word -> distinct target translations. Immutable once built."""

    entries: Mapping[str, FrozenSet[str]]
    source_lang: str
    target_lang: str
    skipped_lines: int = 0

    def __post_init__(self):
        object.__setattr__(self, "source_lang", check_lang(self.source_lang))
        object.__setattr__(self, "target_lang", check_lang(self.target_lang))
        frozen = {s: frozenset(t) for s, t in self.entries.items()}
        for s, targets in frozen.items():
            if not targets:
                raise ValueError(f"source word {s!r} has no translations")
        object.__setattr__(self, "entries", MappingProxyType(frozen))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __getitem__(self, word: str) -> FrozenSet[str]:
        return self.entries[word]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TranslationMap):
            return NotImplemented
        return (
            dict(self.entries) == dict(other.entries)
            and self.source_lang == other.source_lang
            and self.target_lang == other.target_lang
        )

    __hash__ = None

    def target_vocabulary(self, words: Iterable[str] = None) -> Set[str]:
        """Union of translations, restricted to ``words`` when given."""
        keys = self.entries.keys() if words is None else words
        vocab: Set[str] = set()
        for s in keys:
            vocab.update(self.entries.get(s, ()))
        return vocab

    def iter_entries(self) -> Iterator[LexiconEntry]:
        for s in sorted(self.entries):
            for t in sorted(self.entries[s]):
                yield LexiconEntry(s, t)


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    else:
        data = source.read()
        if isinstance(data, str):
            data = data.encode("utf-8")
    # strict decoding: a bad byte raises UnicodeDecodeError
    text = data.decode("utf-8")
    if text.startswith("﻿"):
        text = text[1:]
    for line in text.split("\n"):
        yield line.rstrip("\r")


def parse_lexicon(
    source: Union[BinaryIO, bytes, str, Path],
    source_lang: str,
    target_lang: str,
) -> TranslationMap:
    """Parse a lexicon with one ``source<space|tab>target`` pair per line.

    ``source`` may be a binary stream, raw bytes or a file path. Lines that do
    not have exactly two fields are skipped; the number skipped is stored on
    the result as ``skipped_lines``. Blank lines are ignored without counting.
    """
    src, tgt = check_lang(source_lang), check_lang(target_lang)
    entries: Dict[str, Set[str]] = {}
    skipped = 0
    for line in _iter_lines(source):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 2:
            skipped += 1
            continue
        s, t = fields
        entries.setdefault(s, set()).add(t)
    if skipped:
        logger.info("skipped %d malformed lexicon lines", skipped)
    return TranslationMap(entries, src, tgt, skipped_lines=skipped)


def serialize_lexicon(tmap: TranslationMap) -> bytes:
    """Write a map back to lexicon lines, sorted for stable output."""
    buf = io.StringIO()
    for entry in tmap.iter_entries():
        buf.write(f"{entry.source_word} {entry.target_word}\n")
    return buf.getvalue().encode("utf-8")


def multi_translation_set(tmap: TranslationMap) -> FrozenSet[str]:
    """Source words with at least two distinct translations."""
    return frozenset(s for s, targets in tmap.entries.items() if len(targets) >= 2)


def read_word_list(path: Union[str, Path]) -> FrozenSet[str]:
    """Read a one-word-per-line file such as the output of ``extract-poly``."""
    words = set()
    for line in _iter_lines(Path(path)):
        w = line.strip()
        if w:
            words.add(w)
    return frozenset(words)
