"""Corpus BLEU, sentence-averaged BLEU4 and chrF2.

The tokenizers and score formulas follow the sacreBLEU defaults (13a for
Latin-script targets, per-character splitting of CJK for zh, exponential
smoothing, single reference) so scores are comparable with published ones.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .validation import check_lang

NGRAM_ORDER = 4
CHRF_ORDER = 6
CHRF_BETA = 2


@dataclass(frozen=True)
class Corpus:
    hypotheses: Tuple[str, ...]
    references: Tuple[str, ...]
    language: str

    def __post_init__(self):
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        object.__setattr__(self, "references", tuple(self.references))
        object.__setattr__(self, "language", check_lang(self.language))
        if len(self.hypotheses) != len(self.references):
            raise ValueError(f"{len(self.hypotheses)} hypotheses vs {len(self.references)} references")
        if not self.hypotheses:
            raise ValueError("corpus must have at least one segment")

    def __len__(self) -> int:
        return len(self.hypotheses)


# tokenization

_13A_PUNCT = re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])")
_PERIOD_COMMA_PRE = re.compile(r"([^0-9])([\.,])")
_PERIOD_COMMA_POST = re.compile(r"([\.,])([^0-9])")
_DASH_DIGIT = re.compile(r"([0-9])(-)")
_SPACES = re.compile(r"\s+")

_CJK_RANGES = (
    (0x3400, 0x4DB5), (0x4E00, 0x9FA5), (0x9FA6, 0x9FBB), (0xF900, 0xFA2D),
    (0xFA30, 0xFA6A), (0xFA70, 0xFAD9), (0x20000, 0x2A6D6), (0x2F800, 0x2FA1D),
    (0xFF00, 0xFFEF), (0x2E80, 0x2EFF), (0x3000, 0x303F), (0x31C0, 0x31EF),
    (0x2F00, 0x2FDF), (0x2FF0, 0x2FFF), (0x3100, 0x312F), (0x31A0, 0x31BF),
    (0xFE10, 0xFE1F), (0xFE30, 0xFE4F), (0x2600, 0x26FF), (0x2700, 0x27BF),
    (0x3200, 0x32FF), (0x3300, 0x33FF),
)


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def _mteval_punct(text: str) -> str:
    text = _13A_PUNCT.sub(r" \1 ", text)
    text = _PERIOD_COMMA_PRE.sub(r"\1 \2 ", text)
    text = _PERIOD_COMMA_POST.sub(r" \1 \2", text)
    text = _DASH_DIGIT.sub(r"\1 \2 ", text)
    return _SPACES.sub(" ", text).strip()


def _tokenize_13a(line: str) -> str:
    norm = line.replace("<skipped>", "").replace("-\n", "").replace("\n", " ")
    norm = norm.replace("&quot;", '"').replace("&amp;", "&").replace("&lt;", "<").replace("&gt;", ">")
    return _mteval_punct(f" {norm} ")


def _tokenize_zh(line: str) -> str:
    line = line.strip()
    spaced = "".join(f" {ch} " if _is_cjk(ch) else ch for ch in line)
    return _mteval_punct(spaced)


def tokenize_for_bleu(text: str, lang: str) -> List[str]:
    lang = check_lang(lang)
    tokenized = _tokenize_zh(text) if lang == "zh" else _tokenize_13a(text)
    return tokenized.split()


def tokenizer_name(lang: str) -> str:
    return "zh" if check_lang(lang) == "zh" else "13a"


# BLEU

@dataclass(frozen=True)
class BleuStats:
    correct: Tuple[int, ...]
    total: Tuple[int, ...]
    sys_len: int
    ref_len: int

    def __add__(self, other: "BleuStats") -> "BleuStats":
        return BleuStats(
            tuple(a + b for a, b in zip(self.correct, other.correct)),
            tuple(a + b for a, b in zip(self.total, other.total)),
            self.sys_len + other.sys_len,
            self.ref_len + other.ref_len,
        )


@dataclass(frozen=True)
class BleuResult:
    score: float
    precisions: Tuple[float, ...]
    brevity_penalty: float
    sys_len: int
    ref_len: int
    empty_hypothesis: bool = False


def _ngrams(tokens: Sequence[str], max_n: int) -> Counter:
    counts: Counter = Counter()
    for n in range(1, max_n + 1):
        for i in range(len(tokens) - n + 1):
            counts[tuple(tokens[i:i + n])] += 1
    return counts


def segment_bleu_stats(hyp_tokens: Sequence[str], ref_tokens: Sequence[str], max_n: int = NGRAM_ORDER) -> BleuStats:
    hyp = _ngrams(hyp_tokens, max_n)
    ref = _ngrams(ref_tokens, max_n)
    correct = [0] * max_n
    total = [0] * max_n
    for gram, count in hyp.items():
        n = len(gram)
        total[n - 1] += count
        correct[n - 1] += min(count, ref.get(gram, 0))
    return BleuStats(tuple(correct), tuple(total), len(hyp_tokens), len(ref_tokens))


def bleu_from_stats(stats: BleuStats) -> BleuResult:
    """Score from sufficient statistics with exponential smoothing.

    Zero-match orders get precision ``1 / (2^j * total)`` where j counts the
    zero-match orders seen so far. Orders with no hypothesis n-grams at all
    are excluded from the geometric mean. No matches at any order scores 0.
    """
    max_n = len(stats.total)
    precisions = [0.0] * max_n
    sys_len, ref_len = stats.sys_len, stats.ref_len
    if sys_len == 0:
        return BleuResult(0.0, tuple(precisions), 0.0 if ref_len else 1.0, sys_len, ref_len, True)
    bp = 1.0 if sys_len >= ref_len else math.exp(1.0 - ref_len / sys_len)
    if not any(stats.correct):
        return BleuResult(0.0, tuple(precisions), bp, sys_len, ref_len)

    smooth = 1.0
    eff_order = 0
    for n in range(max_n):
        if stats.total[n] == 0:
            break
        eff_order = n + 1
        if stats.correct[n] == 0:
            smooth *= 2.0
            precisions[n] = 1.0 / (smooth * stats.total[n])
        else:
            precisions[n] = stats.correct[n] / stats.total[n]
    log_mean = math.fsum(math.log(p) for p in precisions[:eff_order]) / eff_order
    return BleuResult(100.0 * bp * math.exp(log_mean), tuple(100.0 * p for p in precisions), bp, sys_len, ref_len)


def corpus_bleu_stats(corpus: Corpus, max_n: int = NGRAM_ORDER) -> List[BleuStats]:
    return [
        segment_bleu_stats(tokenize_for_bleu(h, corpus.language), tokenize_for_bleu(r, corpus.language), max_n)
        for h, r in zip(corpus.hypotheses, corpus.references)
    ]


def bleu(corpus: Corpus, max_n: int = NGRAM_ORDER) -> BleuResult:
    per_segment = corpus_bleu_stats(corpus, max_n)
    total = per_segment[0]
    for s in per_segment[1:]:
        total = total + s
    return bleu_from_stats(total)


def sentence_bleu4(corpus: Corpus) -> float:
    """Mean over segments of sentence-level 4-gram BLEU."""
    scores = [bleu_from_stats(s).score for s in corpus_bleu_stats(corpus, NGRAM_ORDER)]
    return math.fsum(scores) / len(scores)


# chrF

def _char_ngrams(text: str, n: int) -> Counter:
    return Counter(text[i:i + n] for i in range(len(text) - n + 1))


def chrf_segment_stats(hyp: str, ref: str, order: int = CHRF_ORDER) -> List[int]:
    """Flat [hyp, ref, match] counts per order over whitespace-free text."""
    hyp = "".join(hyp.split())
    ref = "".join(ref.split())
    stats = []
    for n in range(1, order + 1):
        h, r = _char_ngrams(hyp, n), _char_ngrams(ref, n)
        # hypothesis n-grams of an order the reference lacks are not counted
        n_hyp = sum(h.values()) if r else 0
        stats += [n_hyp, sum(r.values()), sum((h & r).values())]
    return stats


def chrf_from_stats(stats: Sequence[int], order: int = CHRF_ORDER, beta: float = CHRF_BETA) -> float:
    """Average precision and recall over orders that have n-grams, then F_beta."""
    prec = rec = 0.0
    eff = 0
    for n in range(order):
        n_hyp, n_ref, n_match = stats[3 * n: 3 * n + 3]
        if n_hyp > 0 and n_ref > 0:
            prec += n_match / n_hyp
            rec += n_match / n_ref
            eff += 1
    if eff == 0:
        return 0.0
    prec /= eff
    rec /= eff
    if prec + rec == 0:
        return 0.0
    b2 = beta ** 2
    return 100.0 * (1 + b2) * prec * rec / (b2 * prec + rec)


def chrf2(corpus: Corpus) -> float:
    totals = [0] * (3 * CHRF_ORDER)
    for h, r in zip(corpus.hypotheses, corpus.references):
        for i, v in enumerate(chrf_segment_stats(h, r)):
            totals[i] += v
    return chrf_from_stats(totals)


# reports

@dataclass(frozen=True)
class MetricReport:
    bleu: float
    bleu4: float
    chrf2: float
    precisions: Tuple[float, ...]
    brevity_penalty: float
    segment_count: int
    signature: str
    empty_hypothesis: bool = False

    def to_dict(self) -> dict:
        return {
            "bleu": self.bleu,
            "bleu4": self.bleu4,
            "chrf2": self.chrf2,
            "precisions": list(self.precisions),
            "bp": self.brevity_penalty,
            "n_segments": self.segment_count,
            "signature": self.signature,
        }


def metric_signature(lang: str) -> str:
    return (f"bleu:nrefs=1|case=mixed|tok={tokenizer_name(lang)}|smooth=exp|n={NGRAM_ORDER}; "
            f"chrf:nrefs=1|case=mixed|nc={CHRF_ORDER}|nw=0|beta={CHRF_BETA}|space=no")


def score_corpus(corpus: Corpus) -> MetricReport:
    b = bleu(corpus)
    return MetricReport(
        bleu=b.score,
        bleu4=sentence_bleu4(corpus),
        chrf2=chrf2(corpus),
        precisions=b.precisions,
        brevity_penalty=b.brevity_penalty,
        segment_count=len(corpus),
        signature=metric_signature(corpus.language),
        empty_hypothesis=b.empty_hypothesis,
    )
