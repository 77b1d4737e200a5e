"""Static word vectors in the fastText ``.vec`` text layout."""
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Dict, Iterable, Iterator, Optional, Union

import numpy as np

logger = logging.getLogger(__name__)


class EmbeddingFormatError(ValueError):
    pass


class ZeroVectorError(ValueError):
    pass


class EmbeddingTable:
    """Read-only word -> vector store backed by one float64 matrix.

    Attributes
    ----------
    dim : int
        Vector dimensionality.
    language : str or None
        Language code of the words, when known.
    zero_dropped : int
        Number of zero vectors discarded while loading.
    """

    def __init__(self, vectors: Dict[str, np.ndarray], dim: int, language: Optional[str] = None,
                 zero_dropped: int = 0):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        self.dim = int(dim)
        self.language = language
        self.zero_dropped = zero_dropped
        words = list(vectors)
        matrix = np.zeros((len(words), self.dim), dtype=np.float64)
        for i, w in enumerate(words):
            v = np.asarray(vectors[w], dtype=np.float64)
            if v.shape != (self.dim,):
                raise EmbeddingFormatError(f"vector for {w!r} has length {v.size}, expected {self.dim}")
            if not np.all(np.isfinite(v)):
                raise EmbeddingFormatError(f"vector for {w!r} has non-finite components")
            matrix[i] = v
        matrix.setflags(write=False)
        self._matrix = matrix
        self._index = {w: i for i, w in enumerate(words)}

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def __getitem__(self, word: str) -> np.ndarray:
        return self._matrix[self._index[word]]

    def get(self, word: str, default=None):
        i = self._index.get(word)
        return default if i is None else self._matrix[i]

    def words(self) -> Iterator[str]:
        return iter(self._index)

    def __repr__(self) -> str:
        return f"EmbeddingTable(n={len(self)}, dim={self.dim}, language={self.language!r})"


def _read_text(source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            for raw in fh:
                yield raw.decode("utf-8")
        return
    if isinstance(source, (bytes, bytearray)):
        for raw in bytes(source).split(b"\n"):
            yield raw.decode("utf-8")
        return
    for raw in source:
        yield raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw


def load_embeddings(
    source: Union[str, Path, bytes, Iterable[bytes]],
    vocab_filter: Optional[Iterable[str]] = None,
    language: Optional[str] = None,
) -> EmbeddingTable:
    """Load vectors from ``count dim`` header plus ``word v1 ... v_dim`` lines.

    Only words in ``vocab_filter`` are kept when it is given; the float parse
    is skipped for the rest, which matters for multi-GB files. Zero vectors
    are dropped and counted. A body line whose value count differs from the
    header's dim raises :class:`EmbeddingFormatError` naming the word.
    """
    keep = None if vocab_filter is None else set(vocab_filter)
    lines = _read_text(source)
    header = next(lines, None)
    if header is None:
        raise EmbeddingFormatError("empty embedding file: missing 'count dim' header")
    parts = header.split()
    try:
        if len(parts) != 2:
            raise ValueError
        int(parts[0])  # the count is not trusted, but it must be a number
        dim = int(parts[1])
        if dim < 1:
            raise ValueError
    except ValueError:
        raise EmbeddingFormatError(f"unparsable embedding header {header.strip()!r}") from None

    vectors: Dict[str, np.ndarray] = {}
    zero = 0
    for lineno, line in enumerate(lines, start=2):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        head = line.split(maxsplit=1)
        word, rest = head[0], (head[1] if len(head) > 1 else "")
        if keep is not None and word not in keep:
            continue
        values = rest.split()
        if len(values) != dim:
            raise EmbeddingFormatError(
                f"line {lineno}: word {word!r} has {len(values)} values, expected {dim}"
            )
        try:
            vec = np.array([float(x) for x in values], dtype=np.float64)
        except ValueError:
            raise EmbeddingFormatError(f"line {lineno}: word {word!r} has a non-numeric value") from None
        if not np.all(np.isfinite(vec)):
            raise EmbeddingFormatError(f"line {lineno}: word {word!r} has non-finite values")
        if not np.any(vec):
            zero += 1
            continue
        if word in vectors:
            # fastText files occasionally repeat a token; first occurrence wins
            continue
        vectors[word] = vec
    if zero:
        logger.warning("dropped %d zero vectors", zero)
    return EmbeddingTable(vectors, dim, language=language, zero_dropped=zero)


def cosine_similarity(u, v) -> float:
    """``u.v / (|u||v|)`` clamped to [-1, 1]. Zero vectors raise ZeroVectorError."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"vectors differ in shape: {u.shape} vs {v.shape}")
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine similarity is undefined for a zero vector")
    sim = float(np.dot(u, v)) / (nu * nv)
    return max(-1.0, min(1.0, sim))


def cosine_distance(u, v) -> float:
    return 1.0 - cosine_similarity(u, v)
