"""Per-sentence detection of context-sensitive units (CSUs).

Three sources feed a sentence's CSU set: polysemous words matched from the
filtered lexicon set, and domain-specific and culture-specific terms elicited
from the LLM. Elicited terms are kept only if they actually occur in the
sentence. The merged set is deduplicated and capped at ``k`` entries.
"""
from __future__ import annotations

import enum
import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from sklearn.base import BaseEstimator, TransformerMixin

from .validation import SPACE_DELIMITED, check_k, check_lang, check_sentences

logger = logging.getLogger(__name__)


class CsuKind(enum.Enum):
    POLYSEMOUS = "polysemous"
    DOMAIN = "domain"
    CULTURAL = "cultural"

    @property
    def priority(self) -> int:
        return _PRIORITY[self]

    @classmethod
    def parse(cls, value) -> "CsuKind":
        if isinstance(value, CsuKind):
            return value
        key = str(value).strip().lower()
        aliases = {"poly": cls.POLYSEMOUS, "polysemous": cls.POLYSEMOUS,
                   "domain": cls.DOMAIN, "domainspecific": cls.DOMAIN, "domain_specific": cls.DOMAIN,
                   "cultural": cls.CULTURAL, "culture": cls.CULTURAL}
        if key not in aliases:
            raise ValueError(f"unknown CSU kind {value!r}")
        return aliases[key]


_PRIORITY = {CsuKind.POLYSEMOUS: 0, CsuKind.DOMAIN: 1, CsuKind.CULTURAL: 2}
ALL_KINDS = frozenset(CsuKind)


def parse_kinds(kinds: Iterable) -> FrozenSet[CsuKind]:
    return frozenset(CsuKind.parse(k) for k in kinds)


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class TokenizedSentence:
    tokens: Tuple[Token, ...]
    substring_mode: bool


@dataclass(frozen=True)
class CsuRecord:
    surface: str
    kind: CsuKind
    first_offset: int

    def to_dict(self) -> dict:
        return {"surface": self.surface, "kind": self.kind.value, "offset": self.first_offset}

    @classmethod
    def from_dict(cls, d: dict) -> "CsuRecord":
        return cls(d["surface"], CsuKind.parse(d["kind"]), int(d["offset"]))


@dataclass(frozen=True)
class CsuSet:
    records: Tuple[CsuRecord, ...] = ()
    k: Optional[int] = 8

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if self.k is not None and len(self.records) > self.k:
            raise ValueError(f"{len(self.records)} records exceed k={self.k}")
        keys = [_dedup_key(r.surface) for r in self.records]
        if len(set(keys)) != len(keys):
            raise ValueError("CSU surfaces must be distinct")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def surfaces(self) -> List[str]:
        return [r.surface for r in self.records]

    def kinds(self) -> FrozenSet[CsuKind]:
        return frozenset(r.kind for r in self.records)

    def to_json(self, sentence_id) -> str:
        return json.dumps({"sentence_id": sentence_id,
                           "csus": [r.to_dict() for r in self.records],
                           "k": self.k}, ensure_ascii=False)


def _dedup_key(surface: str) -> str:
    # casefold leaves CJK unchanged, so this is case-insensitive only where it matters
    return surface.casefold()


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize_source(sentence: str, lang: str) -> TokenizedSentence:
    """Whitespace tokens with edge punctuation stripped, keeping offsets.

    Languages without word delimiters (zh) return no tokens and set
    ``substring_mode``; callers then search for substrings directly.
    """
    lang = check_lang(lang)
    if lang not in SPACE_DELIMITED:
        return TokenizedSentence((), True)
    tokens = []
    for m in re.finditer(r"\S+", sentence):
        start, end = m.start(), m.end()
        while start < end and _is_punct(sentence[start]):
            start += 1
        while end > start and _is_punct(sentence[end - 1]):
            end -= 1
        if start < end:
            tokens.append(Token(sentence[start:end], start, end))
    return TokenizedSentence(tuple(tokens), False)


def _find_phrase(tokens: Sequence[Token], phrase: Sequence[str]) -> Optional[Tuple[int, int]]:
    """First token span equal (casefolded) to ``phrase``; returns (i, j) token indices."""
    n = len(phrase)
    if n == 0:
        return None
    folded = [p.casefold() for p in phrase]
    for i in range(len(tokens) - n + 1):
        if all(tokens[i + t].text.casefold() == folded[t] for t in range(n)):
            return i, i + n - 1
    return None


def match_polysemous(sentence: str, lang: str, poly_set: Iterable[str]) -> List[CsuRecord]:
    """Find lexicon-derived polysemous words in the sentence.

    Space-delimited languages compare whole tokens case-insensitively. For zh
    the scan is greedy longest-match, left to right, without overlaps. Each
    word is reported once, at its first occurrence.
    """
    lang = check_lang(lang)
    tok = tokenize_source(sentence, lang)
    found: Dict[str, CsuRecord] = {}
    if not tok.substring_mode:
        lookup: Dict[str, bool] = {w.casefold(): True for w in poly_set if w}
        for t in tok.tokens:
            key = t.text.casefold()
            if key in lookup and key not in found:
                found[key] = CsuRecord(t.text, CsuKind.POLYSEMOUS, t.start)
    else:
        by_first: Dict[str, List[str]] = {}
        for w in poly_set:
            if w:
                by_first.setdefault(w[0], []).append(w)
        for words in by_first.values():
            words.sort(key=lambda w: (-len(w), w))
        i = 0
        while i < len(sentence):
            hit = next((w for w in by_first.get(sentence[i], ()) if sentence.startswith(w, i)), None)
            if hit is None:
                i += 1
                continue
            if hit not in found:
                found[hit] = CsuRecord(hit, CsuKind.POLYSEMOUS, i)
            i += len(hit)
    return sorted(found.values(), key=lambda r: r.first_offset)


# elicitation reply parsing

_NONE_MARKERS = {"", "none", "(none)", "n/a", "na", "null", "nil", "-", "无", "（无）", "(无)", "没有"}
_LABEL_RE = re.compile(
    r"(?P<label>domain(?:[\s_-]*specific)?(?:\s+(?:terms?|words?|vocabulary))?"
    r"|cultur(?:al|e|ally)(?:[\s_-]*(?:specific|unique))?(?:\s+(?:terms?|words?|vocabulary))?"
    r"|领域(?:术语|词汇)?|文化(?:词汇|词语)?)\s*[:：]",
    re.IGNORECASE,
)
_ITEM_SPLIT_RE = re.compile(r"[;；,，、\n]")
_BULLET_RE = re.compile(r"^\s*(?:[-*•·]|\d+[.)])\s*")
_QUOTES = "\"'“”‘’「」『』《》`"


@dataclass(frozen=True)
class Elicitation:
    candidates: Tuple[Tuple[str, CsuKind], ...]
    diagnostic: Optional[str] = None
    raw: str = ""


def _label_kind(label: str) -> CsuKind:
    label = label.lower()
    return CsuKind.DOMAIN if label.startswith(("domain", "领域")) else CsuKind.CULTURAL


def _clean_item(item: str) -> str:
    item = _BULLET_RE.sub("", item).strip()
    item = item.strip(_QUOTES).strip()
    item = item.rstrip(".。").strip()
    return item.strip(_QUOTES).strip()


def parse_elicitation_reply(reply: str) -> Elicitation:
    """Parse ``domain: a, b; cultural: c``-style replies.

    Semicolon, newline and comma separated layouts are all read. A reply
    without any recognizable label yields no candidates and a diagnostic.
    """
    text = reply or ""
    matches = list(_LABEL_RE.finditer(text))
    if not matches:
        return Elicitation((), "no 'domain:' or 'cultural:' label found in reply", text)
    out: List[Tuple[str, CsuKind]] = []
    seen = set()
    for idx, m in enumerate(matches):
        kind = _label_kind(m.group("label"))
        end = matches[idx + 1].start() if idx + 1 < len(matches) else len(text)
        body = text[m.end():end]
        for raw_item in _ITEM_SPLIT_RE.split(body):
            item = _clean_item(raw_item)
            if item.lower() in _NONE_MARKERS:
                continue
            key = (item, kind)
            if key not in seen:
                seen.add(key)
                out.append(key)
    return Elicitation(tuple(out), None, text)


def elicit_internal_csus(sentence: str, llm, template, sentence_id=None) -> Elicitation:
    """Ask the backend for domain/cultural terms and parse its reply.

    ``llm`` is anything with ``complete(prompt_spec) -> str``; ``template`` is
    a PromptTemplateSet. Transport errors propagate with ``sentence_id``
    attached; an unparseable reply is logged and produces no candidates.
    """
    from .llm_client import BackendError
    from .prompts import build_elicitation_prompt

    spec = build_elicitation_prompt(sentence, template, sentence_id=sentence_id)
    try:
        reply = llm.complete(spec)
    except BackendError as exc:
        if exc.sentence_id is None:
            exc.sentence_id = sentence_id
        raise
    result = parse_elicitation_reply(reply)
    if result.diagnostic:
        logger.warning("sentence %s: %s", sentence_id, result.diagnostic)
    return result


def filter_in_sentence(candidates: Iterable[Tuple[str, CsuKind]], sentence: str, lang: str) -> List[CsuRecord]:
    """Keep candidates that occur in the sentence; drop the rest.

    Space-delimited languages need a case-insensitive match on a whole token
    run (so phrases work), and the record takes the sentence's casing. For zh
    any substring occurrence counts.
    """
    lang = check_lang(lang)
    tok = tokenize_source(sentence, lang)
    out: List[CsuRecord] = []
    for surface, kind in candidates:
        kind = CsuKind.parse(kind)
        surface = (surface or "").strip()
        if not surface:
            continue
        if tok.substring_mode:
            pos = sentence.find(surface)
            if pos >= 0:
                out.append(CsuRecord(surface, kind, pos))
            continue
        phrase = tokenize_source(surface, lang).tokens
        span = _find_phrase(tok.tokens, [t.text for t in phrase])
        if span is not None:
            first, last = tok.tokens[span[0]], tok.tokens[span[1]]
            out.append(CsuRecord(sentence[first.start:last.end], kind, first.start))
    return out


def assemble_csu_set(poly: Iterable[CsuRecord] = (), dom: Iterable[CsuRecord] = (),
                     cul: Iterable[CsuRecord] = (), k: Optional[int] = 8) -> CsuSet:
    """Merge the three lists, dedupe by surface, order, then cap at ``k``.

    On duplicate surfaces the higher-priority kind wins (polysemous, then
    domain, then cultural) and the earliest offset is kept. Records are
    ordered by (kind priority, offset, surface). ``k=None`` disables the cap.
    """
    k = check_k(k)
    best: Dict[str, CsuRecord] = {}
    for rec in [*poly, *dom, *cul]:
        key = _dedup_key(rec.surface)
        cur = best.get(key)
        if cur is None or (rec.kind.priority, rec.first_offset) < (cur.kind.priority, cur.first_offset):
            best[key] = rec
    ordered = sorted(best.values(), key=lambda r: (r.kind.priority, r.first_offset, r.surface))
    if k is not None:
        ordered = ordered[:k]
    return CsuSet(tuple(ordered), k)


def split_by_kind(records: Iterable[CsuRecord]) -> Dict[CsuKind, List[CsuRecord]]:
    out: Dict[CsuKind, List[CsuRecord]] = {kind: [] for kind in CsuKind}
    for r in records:
        out[r.kind].append(r)
    return out


@dataclass
class SentenceCsus:
    """Everything found for one sentence before the k cap is applied."""

    poly: List[CsuRecord] = field(default_factory=list)
    dom: List[CsuRecord] = field(default_factory=list)
    cul: List[CsuRecord] = field(default_factory=list)
    elicitation: Optional[Elicitation] = None

    def assemble(self, k: Optional[int], enabled: FrozenSet[CsuKind] = ALL_KINDS) -> CsuSet:
        return assemble_csu_set(
            self.poly if CsuKind.POLYSEMOUS in enabled else (),
            self.dom if CsuKind.DOMAIN in enabled else (),
            self.cul if CsuKind.CULTURAL in enabled else (),
            k,
        )


class CsuIdentifier(BaseEstimator, TransformerMixin):
    """Sentence -> CsuSet transformer.

    Parameters
    ----------
    lang : str
        Source language code.
    k : int or None, default=8
        Maximum CSUs per sentence; None for no cap.
    enabled_kinds : iterable of CsuKind or str
        Kinds to include. Elicitation is skipped when neither domain nor
        cultural terms are enabled.
    poly_set : iterable of str, optional
        Polysemous source words, typically ``PolysemyFilter().fit(...).poly_set_``.
    llm : object with ``complete(PromptSpec) -> str``, optional
        Needed only when domain or cultural kinds are enabled.
    templates : PromptTemplateSet, optional
        Supplies the elicitation prompt; defaults to the built-in set for
        ``lang`` paired with ``target_lang``.
    target_lang : str, optional
    """

    def __init__(self, lang: str = "en", k: Optional[int] = 8, enabled_kinds=("polysemous", "domain", "cultural"),
                 poly_set=None, llm=None, templates=None, target_lang: Optional[str] = None):
        self.lang = lang
        self.k = k
        self.enabled_kinds = enabled_kinds
        self.poly_set = poly_set
        self.llm = llm
        self.templates = templates
        self.target_lang = target_lang

    def fit(self, X=None, y=None):
        from .prompts import default_templates

        self.lang_ = check_lang(self.lang)
        self.k_ = check_k(self.k)
        self.enabled_kinds_ = parse_kinds(self.enabled_kinds)
        self.poly_set_ = frozenset(self.poly_set or ())
        needs_llm = bool(self.enabled_kinds_ & {CsuKind.DOMAIN, CsuKind.CULTURAL})
        if needs_llm and self.llm is None:
            raise ValueError("domain/cultural CSUs are enabled but no llm backend was given")
        templates = self.templates
        if templates is None and needs_llm:
            tgt = self.target_lang or ("zh" if self.lang_ != "zh" else "en")
            templates = default_templates((self.lang_, tgt))
        self.templates_ = templates
        return self

    def identify(self, sentence: str, sentence_id=None) -> SentenceCsus:
        """Uncapped per-kind CSU lists for one sentence."""
        found = SentenceCsus()
        if CsuKind.POLYSEMOUS in self.enabled_kinds_ and self.poly_set_:
            found.poly = match_polysemous(sentence, self.lang_, self.poly_set_)
        if self.enabled_kinds_ & {CsuKind.DOMAIN, CsuKind.CULTURAL}:
            el = elicit_internal_csus(sentence, self.llm, self.templates_, sentence_id=sentence_id)
            kept = filter_in_sentence(el.candidates, sentence, self.lang_)
            by_kind = split_by_kind(kept)
            found.dom = by_kind[CsuKind.DOMAIN]
            found.cul = by_kind[CsuKind.CULTURAL]
            found.elicitation = el
        return found

    def transform(self, X) -> List[CsuSet]:
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "lang_")
        sentences = check_sentences(X)
        return [self.identify(s, i).assemble(self.k_, self.enabled_kinds_) for i, s in enumerate(sentences)]
