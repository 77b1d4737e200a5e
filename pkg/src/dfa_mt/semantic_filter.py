"""Embedding-space clustering of a word's translations.

A source word with several dictionary translations is only treated as
polysemous when those translations fall into at least two clusters under
cosine distance. Synonym-like translation sets (one cluster) are discarded.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import FrozenSet, Iterable, List, Optional, Set, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from .embeddings import EmbeddingTable
from .lexicon import TranslationMap, multi_translation_set

LINKAGES = ("average", "complete")
POLY_MODES = ("off", "simple", "filtered")


@dataclass(frozen=True)
class ClusterParams:
    distance_threshold: float = 0.5
    linkage: str = "average"
    min_embedded_translations: int = 2

    def __post_init__(self):
        if not (0.0 < self.distance_threshold <= 2.0):
            raise ValueError(f"distance_threshold must be in (0, 2], got {self.distance_threshold}")
        if self.linkage not in LINKAGES:
            raise ValueError(f"linkage must be one of {LINKAGES}, got {self.linkage!r}")
        if self.min_embedded_translations < 1:
            raise ValueError("min_embedded_translations must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ClusterResult:
    clusters: Tuple[FrozenSet[str], ...]
    dropped_oov: FrozenSet[str] = frozenset()

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)


def _normalized_rows(words: List[str], table: EmbeddingTable) -> np.ndarray:
    rows = np.stack([table[w] for w in words])
    norms = np.sqrt(np.einsum("ij,ij->i", rows, rows))
    return rows / norms[:, None]


def _distance_matrix(words: List[str], table: EmbeddingTable) -> np.ndarray:
    unit = _normalized_rows(words, table)
    d = 1.0 - unit @ unit.T
    d = np.clip(d, 0.0, 2.0)
    # exact symmetry and zero diagonal, independent of BLAS rounding
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return d


def _linkage_distance(d: np.ndarray, a: List[int], b: List[int], linkage: str) -> float:
    block = d[np.ix_(a, b)]
    if linkage == "complete":
        return float(block.max())
    return math.fsum(block.ravel().tolist()) / block.size


def cluster_translations(translations: Iterable[str], table: EmbeddingTable,
                         params: ClusterParams = ClusterParams()) -> ClusterResult:
    """Agglomerative clustering of the embedded translations.

    The closest pair of clusters is merged while its linkage distance is at
    most ``params.distance_threshold``. Equal distances are resolved by the
    lexicographically smallest member of each cluster, so results do not
    depend on set iteration order.
    """
    words = sorted(set(translations))
    embedded = [w for w in words if w in table]
    oov = frozenset(w for w in words if w not in table)
    if not embedded:
        return ClusterResult((), oov)

    d = _distance_matrix(embedded, table)
    # clusters hold indices into ``embedded``, which is sorted, so the first
    # index of a cluster is also its lexicographically smallest word
    clusters: List[List[int]] = [[i] for i in range(len(embedded))]
    while len(clusters) > 1:
        best = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                dist = _linkage_distance(d, clusters[i], clusters[j], params.linkage)
                key = (dist, clusters[i][0], clusters[j][0])
                if best is None or key < best[0]:
                    best = (key, i, j)
        (dist, _, _), i, j = best
        if dist > params.distance_threshold:
            break
        merged = sorted(clusters[i] + clusters[j])
        clusters = [c for k, c in enumerate(clusters) if k not in (i, j)]
        clusters.append(merged)
        clusters.sort(key=lambda c: c[0])

    return ClusterResult(tuple(frozenset(embedded[k] for k in c) for c in clusters), oov)


def is_semantically_polysemous(source_word: str, translations: Iterable[str], table: EmbeddingTable,
                               params: ClusterParams = ClusterParams()) -> bool:
    translations = set(translations)
    n_embedded = sum(1 for w in translations if w in table)
    if n_embedded < params.min_embedded_translations:
        return False
    return cluster_translations(translations, table, params).n_clusters >= 2


@dataclass(frozen=True)
class PolysemyExtraction:
    """Filtered polysemous words plus the counts reported alongside them."""

    words: FrozenSet[str]
    candidates: int
    filtered: int
    oov_dropped: int
    insufficient_evidence: int
    params: dict = field(default_factory=dict)

    def stats(self) -> dict:
        return {
            "candidates": self.candidates,
            "filtered": self.filtered,
            "oov_dropped": self.oov_dropped,
            "insufficient_evidence": self.insufficient_evidence,
            "params": self.params,
        }


def build_polysemous_csu_set(tmap: TranslationMap, table: EmbeddingTable,
                             params: ClusterParams = ClusterParams()) -> PolysemyExtraction:
    candidates = sorted(multi_translation_set(tmap))
    kept: Set[str] = set()
    oov_total = 0
    insufficient = 0
    for s in candidates:
        translations = tmap[s]
        n_embedded = sum(1 for w in translations if w in table)
        oov_total += len(translations) - n_embedded
        if n_embedded < params.min_embedded_translations:
            insufficient += 1
            continue
        if cluster_translations(translations, table, params).n_clusters >= 2:
            kept.add(s)
    return PolysemyExtraction(
        words=frozenset(kept),
        candidates=len(candidates),
        filtered=len(kept),
        oov_dropped=oov_total,
        insufficient_evidence=insufficient,
        params=params.to_dict(),
    )


def write_csu_set(extraction: PolysemyExtraction, path, provenance: Optional[dict] = None) -> Tuple[Path, Path]:
    """Write one word per line to ``path`` and a JSON stats sidecar next to it."""
    path = Path(path)
    path.write_text("".join(f"{w}\n" for w in sorted(extraction.words)), encoding="utf-8")
    stats = extraction.stats()
    if provenance:
        stats["provenance"] = provenance
    sidecar = path.with_name(path.name + ".stats.json")
    sidecar.write_text(json.dumps(stats, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                       encoding="utf-8")
    return path, sidecar


class PolysemyFilter(BaseEstimator):
    """Select the polysemous source words of a bilingual lexicon.

    Parameters
    ----------
    mode : {"filtered", "simple", "off"}
        ``filtered`` clusters translations and keeps words with two or more
        clusters; ``simple`` keeps every word with two or more translations;
        ``off`` selects nothing.
    distance_threshold, linkage, min_embedded_translations
        Clustering parameters, see :class:`ClusterParams`.

    Attributes
    ----------
    poly_set_ : frozenset of str
    extraction_ : PolysemyExtraction or None
        Counts from the filtered run; None for the other modes.
    """

    def __init__(self, mode: str = "filtered", distance_threshold: float = 0.5,
                 linkage: str = "average", min_embedded_translations: int = 2):
        self.mode = mode
        self.distance_threshold = distance_threshold
        self.linkage = linkage
        self.min_embedded_translations = min_embedded_translations

    def cluster_params(self) -> ClusterParams:
        return ClusterParams(self.distance_threshold, self.linkage, self.min_embedded_translations)

    def fit(self, X: TranslationMap, y=None, embeddings: Optional[EmbeddingTable] = None):
        if self.mode not in POLY_MODES:
            raise ValueError(f"mode must be one of {POLY_MODES}, got {self.mode!r}")
        self.extraction_ = None
        if self.mode == "off":
            self.poly_set_ = frozenset()
        elif self.mode == "simple":
            self.poly_set_ = multi_translation_set(X)
        else:
            if embeddings is None:
                raise ValueError("mode='filtered' needs an EmbeddingTable passed as embeddings=")
            self.extraction_ = build_polysemous_csu_set(X, embeddings, self.cluster_params())
            self.poly_set_ = self.extraction_.words
        self.source_lang_ = X.source_lang
        return self

    def predict(self, words: Iterable[str]) -> np.ndarray:
        """Boolean mask: is each source word in the selected set."""
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "poly_set_")
        return np.array([w in self.poly_set_ for w in words], dtype=bool)
