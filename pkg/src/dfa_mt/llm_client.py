"""Translation/elicitation backends with a record/replay cache.

``LLMClient.complete`` sends a JSON POST to a configurable endpoint, or serves
answers from a JSON Lines cache. In replay mode nothing touches the network,
which is how the test-suite and reproducible reruns work.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, Mapping, Optional, Sequence

import httpx

from .validation import check_lang

logger = logging.getLogger(__name__)

AUTH_ENV_OVERRIDE = "DFA_BACKEND_AUTH"


class BackendError(RuntimeError):
    def __init__(self, message: str, sentence_id=None):
        super().__init__(message)
        self.sentence_id = sentence_id

    def __str__(self):
        base = super().__str__()
        return base if self.sentence_id is None else f"{base} (sentence {self.sentence_id})"


class CacheMissError(BackendError):
    def __init__(self, prompt_hash: str, sentence_id=None):
        super().__init__(f"replay cache has no entry for prompt_hash {prompt_hash}", sentence_id)
        self.prompt_hash = prompt_hash


class NonRetryableHTTPError(BackendError):
    def __init__(self, status: int, body: str, sentence_id=None):
        super().__init__(f"HTTP {status}: {body[:200]}", sentence_id)
        self.status = status


class TransientBackendError(BackendError):
    pass


@dataclass(frozen=True)
class DecodeParams:
    max_length: int = 256
    beam_width: int = 5
    temperature: float = 0.0

    def __post_init__(self):
        if self.max_length < 1 or self.beam_width < 1:
            raise ValueError("max_length and beam_width must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_base: float = 0.5
    max_backoff: float = 30.0

    def delay(self, attempt: int) -> float:
        """Sleep before retry number ``attempt`` (1-based)."""
        return min(self.max_backoff, self.backoff_base * (2 ** (attempt - 1)))


DEFAULT_REQUEST_FIELDS = {
    "model": "model",
    "input": "prompt",
    "max_length": "max_tokens",
    "beam_width": "num_beams",
    "temperature": "temperature",
}


@dataclass(frozen=True)
class BackendConfig:
    """How to reach a model.

    ``kind="replay"`` reads answers from ``cache_path`` only. ``kind="http"``
    posts to ``endpoint``; with ``cache_path`` set it also records each new
    answer there and serves repeats from the cache. ``auth`` names the
    environment variable holding the API key, never the key itself.
    """

    kind: str = "replay"
    endpoint: Optional[str] = None
    model_id: str = "unknown"
    decode: DecodeParams = field(default_factory=DecodeParams)
    auth: Optional[str] = None
    concurrency_limit: int = 4
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    cache_path: Optional[str] = None
    timeout: float = 60.0
    request_fields: Mapping[str, Optional[str]] = field(default_factory=lambda: dict(DEFAULT_REQUEST_FIELDS))
    response_path: str = "choices.0.text"
    chat_format: bool = False

    def __post_init__(self):
        if self.kind not in ("http", "replay"):
            raise ValueError(f"backend kind must be 'http' or 'replay', got {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise ValueError("http backend needs an endpoint")
        if self.kind == "replay" and not self.cache_path:
            raise ValueError("replay backend needs a cache_path")
        if self.concurrency_limit < 1:
            raise ValueError("concurrency_limit must be positive")

    @property
    def backend_id(self) -> str:
        return f"{self.kind}:{self.model_id}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["request_fields"] = dict(self.request_fields)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "BackendConfig":
        d = dict(d)
        if "decode" in d and not isinstance(d["decode"], DecodeParams):
            d["decode"] = DecodeParams(**d["decode"])
        if "retry" in d and not isinstance(d["retry"], RetryPolicy):
            d["retry"] = RetryPolicy(**d["retry"])
        if "request_fields" in d:
            d["request_fields"] = {**DEFAULT_REQUEST_FIELDS, **d["request_fields"]}
        return cls(**d)


def prompt_hash(text: str, decode: DecodeParams) -> str:
    """SHA-256 over prompt text and decoding parameters."""
    payload = json.dumps({"prompt": text, "decode": decode.to_dict()}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ReplayCache:
    """Append-only JSONL store of ``prompt_hash -> raw_output``.

    Later records for the same hash win when the file is read back.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._entries: Dict[str, str] = {}
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        rec = json.loads(line)
                        self._entries[rec["prompt_hash"]] = rec["raw_output"]
                    except (json.JSONDecodeError, KeyError) as exc:
                        raise ValueError(f"{self.path}:{lineno}: bad cache record ({exc})") from None

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> Optional[str]:
        return self._entries.get(key)

    def put(self, key: str, prompt_text: str, decode: DecodeParams, raw_output: str) -> None:
        rec = {
            "prompt_hash": key,
            "prompt_text": prompt_text,
            "decode_params": decode.to_dict(),
            "raw_output": raw_output,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        with self._lock:
            self._entries[key] = raw_output
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    def digest(self) -> Optional[str]:
        if self.path is None or not self.path.exists():
            return None
        return hashlib.sha256(self.path.read_bytes()).hexdigest()


@dataclass(frozen=True)
class TranslationResult:
    sentence_id: object
    prompt_hash: str
    raw_output: str
    extracted: str
    latency_ms: float
    backend_id: str


def _dig(obj, path: str):
    for part in path.split("."):
        if isinstance(obj, list):
            obj = obj[int(part)]
        else:
            obj = obj[part]
    return obj


class LLMClient:
    """Thread-safe completion client; see :class:`BackendConfig`.

    ``transport`` is an optional ``httpx.BaseTransport`` (tests pass an
    ``httpx.MockTransport``); ``sleep`` is injectable so retry tests are fast.
    """

    def __init__(self, config: BackendConfig, transport: Optional[httpx.BaseTransport] = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.cache = ReplayCache(config.cache_path)
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(config.concurrency_limit)
        self._http = None
        if config.kind == "http":
            self._http = httpx.Client(transport=transport, timeout=config.timeout)
        self.live_calls = 0
        self._count_lock = threading.Lock()
        self._key_locks: Dict[str, threading.Lock] = {}

    def close(self) -> None:
        if self._http is not None:
            self._http.close()

    def __enter__(self):
        return self

    def __deepcopy__(self, memo):
        # a live connection pool and cache; sklearn.clone shares it rather than copying
        return self

    def __exit__(self, *exc):
        self.close()

    def hash_for(self, prompt) -> str:
        return prompt_hash(getattr(prompt, "text", prompt), self.config.decode)

    def complete(self, prompt) -> str:
        """Raw model output for a PromptSpec (or plain prompt string)."""
        text = getattr(prompt, "text", prompt)
        sid = getattr(prompt, "sentence_id", None)
        key = prompt_hash(text, self.config.decode)
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        if self.config.kind == "replay":
            raise CacheMissError(key, sid)
        # one live call per distinct prompt even under concurrent identical requests
        with self._count_lock:
            key_lock = self._key_locks.setdefault(key, threading.Lock())
        with key_lock:
            cached = self.cache.get(key)
            if cached is not None:
                return cached
            raw = self._post_with_retry(text, sid)
            if self.config.cache_path:
                self.cache.put(key, text, self.config.decode, raw)
            else:
                self.cache._entries[key] = raw
            return raw

    def translate(self, prompt, target_lang: str) -> TranslationResult:
        t0 = time.perf_counter()
        raw = self.complete(prompt)
        latency = (time.perf_counter() - t0) * 1000.0
        return TranslationResult(
            sentence_id=getattr(prompt, "sentence_id", None),
            prompt_hash=self.hash_for(prompt),
            raw_output=raw,
            extracted=extract_translation(raw, target_lang),
            latency_ms=latency,
            backend_id=self.config.backend_id,
        )

    def _request_body(self, text: str) -> dict:
        fields = self.config.request_fields
        decode = self.config.decode
        body = {}
        if fields.get("model"):
            body[fields["model"]] = self.config.model_id
        value = [{"role": "user", "content": text}] if self.config.chat_format else text
        body[fields.get("input") or "prompt"] = value
        for name in ("max_length", "beam_width", "temperature"):
            if fields.get(name):
                body[fields[name]] = getattr(decode, name)
        return body

    def _headers(self) -> dict:
        env_name = os.environ.get(AUTH_ENV_OVERRIDE) or self.config.auth
        headers = {"Content-Type": "application/json"}
        if env_name:
            token = os.environ.get(env_name)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post_once(self, text: str, sid) -> str:
        with self._slots:
            with self._count_lock:
                self.live_calls += 1
            try:
                resp = self._http.post(self.config.endpoint, json=self._request_body(text), headers=self._headers())
            except httpx.TimeoutException as exc:
                raise TransientBackendError(f"timeout: {exc}", sid) from exc
            except httpx.TransportError as exc:
                raise TransientBackendError(f"transport error: {exc}", sid) from exc
        if resp.status_code >= 500:
            raise TransientBackendError(f"HTTP {resp.status_code}", sid)
        if resp.status_code >= 400:
            raise NonRetryableHTTPError(resp.status_code, resp.text, sid)
        try:
            out = _dig(resp.json(), self.config.response_path)
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"response lacks {self.config.response_path!r}: {exc}", sid) from exc
        if not isinstance(out, str):
            raise BackendError(f"{self.config.response_path!r} is not text", sid)
        return out

    def _post_with_retry(self, text: str, sid) -> str:
        policy = self.config.retry
        for attempt in range(1, policy.max_attempts + 1):
            try:
                return self._post_once(text, sid)
            except TransientBackendError as exc:
                if attempt == policy.max_attempts:
                    raise TransientBackendError(
                        f"gave up after {attempt} attempts: {exc.args[0]}", sid) from exc
                delay = policy.delay(attempt)
                logger.info("retrying in %.2fs after: %s", delay, exc)
                self._sleep(delay)
        raise AssertionError("unreachable")


# output post-processing

_TERMINATORS = {"zh": "。！？"}
_LATIN_TERMINATORS = ".!?"
_QUOTE_CHARS = "\"'“”‘’„‚«»「」『』"
_LABEL_RE = re.compile(
    r"^\s*(?:\*\*)?(?:(?:the\s+)?(?:[a-z]+\s+)?translation|übersetzung|deutsche übersetzung|译文|翻译|中文翻译|英文翻译)"
    r"(?:\*\*)?\s*[:：]\s*",
    re.IGNORECASE,
)


def _cut_first_sentence(line: str, target_lang: str) -> str:
    if target_lang == "zh":
        for i, ch in enumerate(line):
            if ch in _TERMINATORS["zh"]:
                return line[: i + 1]
        return line
    for i, ch in enumerate(line):
        if ch not in _LATIN_TERMINATORS:
            continue
        nxt = line[i + 1] if i + 1 < len(line) else ""
        # "13.5" or "e.g.x" is not a sentence end; a space, quote or line end is
        if nxt == "" or nxt.isspace() or nxt in _QUOTE_CHARS or nxt in _LATIN_TERMINATORS + ")":
            j = i + 1
            while j < len(line) and line[j] in _LATIN_TERMINATORS:
                j += 1
            return line[:j]
    return line


def extract_translation(raw: str, target_lang: str) -> str:
    """Keep only the first sentence of a model reply.

    Takes the first non-empty line, drops a leading "Translation:"-style
    label, cuts after the first sentence-final mark of the target language
    (``.!?``, or ``。！？`` for zh) and strips surrounding quotes. An
    all-whitespace reply gives "".
    """
    target_lang = check_lang(target_lang)
    line = next((ln.strip() for ln in (raw or "").splitlines() if ln.strip()), "")
    if not line:
        return ""
    line = _LABEL_RE.sub("", line, count=1).strip()
    line = line.lstrip(_QUOTE_CHARS).strip()
    line = _cut_first_sentence(line, target_lang)
    return line.strip().strip(_QUOTE_CHARS).strip()


DEFAULT_REFUSAL_PATTERNS = (
    "i'm sorry",
    "i am sorry",
    "not able to",
    "unable to",
    "i cannot",
    "i can't",
    "as an ai",
    "抱歉",
    "无法提供",
    "es tut mir leid",
)

_CJK_RE = re.compile(r"[㐀-䶿一-鿿豈-﫿]")
_LATIN_RE = re.compile(r"[A-Za-zÀ-ÖØ-öø-ÿ]")


def detect_task_failure(extracted: str, source: str, target_lang: str,
                        refusal_patterns: Sequence[str] = DEFAULT_REFUSAL_PATTERNS) -> bool:
    """Heuristic: empty output, source echo, refusal text, or wrong script.

    Only used for reporting failure rates; it never changes an output.
    """
    target_lang = check_lang(target_lang)
    text = (extracted or "").strip()
    if not text:
        return True
    if text == (source or "").strip():
        return True
    lowered = text.lower()
    if any(p in lowered for p in refusal_patterns):
        return True
    script = _CJK_RE if target_lang == "zh" else _LATIN_RE
    return script.search(text) is None
