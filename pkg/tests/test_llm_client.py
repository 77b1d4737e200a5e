import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfa_mt.llm_client import (AUTH_ENV_OVERRIDE, BackendConfig, BackendError, CacheMissError, DecodeParams,
                               LLMClient, NonRetryableHTTPError, ReplayCache, RetryPolicy, TransientBackendError,
                               detect_task_failure, extract_translation, prompt_hash)
from dfa_mt.prompts import PromptSpec

URL = "http://model.invalid/v1/completions"


def _ok(text):
    return httpx.Response(200, json={"choices": [{"text": text}]})


def _client(handler, tmp_path=None, **kw):
    cfg = BackendConfig(kind="http", endpoint=URL, model_id="m",
                        cache_path=str(tmp_path / "c.jsonl") if tmp_path else None, **kw)
    return LLMClient(cfg, transport=httpx.MockTransport(handler), sleep=lambda s: None)


# hashing and cache

def test_prompt_hash_depends_on_decode_params():
    a = prompt_hash("x", DecodeParams())
    assert a == prompt_hash("x", DecodeParams())
    assert a != prompt_hash("x", DecodeParams(beam_width=1))
    assert a != prompt_hash("y", DecodeParams())
    assert len(a) == 64


def test_replay_hit_and_miss(tmp_path):
    path = tmp_path / "cache.jsonl"
    ReplayCache(path).put(prompt_hash("hello", DecodeParams()), "hello", DecodeParams(), "你好")
    client = LLMClient(BackendConfig(kind="replay", cache_path=str(path)))
    assert client.complete(PromptSpec("hello")) == "你好"
    with pytest.raises(CacheMissError) as info:
        client.complete(PromptSpec("unseen", sentence_id=9))
    assert prompt_hash("unseen", DecodeParams()) in str(info.value)
    assert info.value.sentence_id == 9
    assert client.live_calls == 0


def test_cache_last_write_wins_and_bad_records(tmp_path):
    path = tmp_path / "cache.jsonl"
    cache = ReplayCache(path)
    cache.put("k", "p", DecodeParams(), "first")
    cache.put("k", "p", DecodeParams(), "second")
    assert ReplayCache(path).get("k") == "second"
    rec = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert set(rec) == {"prompt_hash", "prompt_text", "decode_params", "raw_output", "timestamp"}
    path.write_text("not json\n", encoding="utf-8")
    with pytest.raises(ValueError, match=":1:"):
        ReplayCache(path)


def test_recording_makes_one_call_per_distinct_prompt(tmp_path):
    seen = []

    def handler(request):
        body = json.loads(request.content)
        seen.append(body["prompt"])
        return _ok("out:" + body["prompt"])

    client = _client(handler, tmp_path)
    for p in ["a", "b", "a", "a", "b"]:
        assert client.complete(p) == "out:" + p
    assert sorted(seen) == ["a", "b"] and client.live_calls == 2
    # the recording replays without a network
    replay = LLMClient(BackendConfig(kind="replay", cache_path=str(tmp_path / "c.jsonl")))
    assert replay.complete("b") == "out:b"


def test_concurrent_identical_prompts_hit_the_network_once(tmp_path):
    def handler(request):
        time.sleep(0.01)
        return _ok("same")

    client = _client(handler, tmp_path, concurrency_limit=8)
    with ThreadPoolExecutor(8) as pool:
        outs = list(pool.map(client.complete, ["p"] * 16))
    assert outs == ["same"] * 16 and client.live_calls == 1


def test_concurrency_limit_is_respected():
    state = {"now": 0, "peak": 0}
    lock = threading.Lock()

    def handler(request):
        with lock:
            state["now"] += 1
            state["peak"] = max(state["peak"], state["now"])
        time.sleep(0.02)
        with lock:
            state["now"] -= 1
        return _ok("x")

    client = _client(handler, concurrency_limit=2)
    with ThreadPoolExecutor(8) as pool:
        list(pool.map(client.complete, [f"p{i}" for i in range(16)]))
    assert state["peak"] == 2


# http behaviour

def test_request_body_shape():
    bodies = []

    def handler(request):
        bodies.append(json.loads(request.content))
        return _ok("ok")

    _client(handler).complete("hi")
    assert bodies == [{"model": "m", "prompt": "hi", "max_tokens": 256, "num_beams": 5, "temperature": 0.0}]


def test_5xx_is_retried_then_succeeds():
    calls = []
    sleeps = []

    def handler(request):
        calls.append(1)
        return httpx.Response(503) if len(calls) < 3 else _ok("fine")

    cfg = BackendConfig(kind="http", endpoint=URL, retry=RetryPolicy(max_attempts=3, backoff_base=0.5))
    client = LLMClient(cfg, transport=httpx.MockTransport(handler), sleep=sleeps.append)
    assert client.complete("x") == "fine"
    assert len(calls) == 3 and sleeps == [0.5, 1.0]


def test_4xx_is_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400, text="bad request")

    with pytest.raises(NonRetryableHTTPError, match="400"):
        _client(handler).complete(PromptSpec("x", sentence_id=2))
    assert len(calls) == 1


def test_timeout_is_retried_and_surfaced():
    calls = []

    def handler(request):
        calls.append(1)
        raise httpx.ReadTimeout("slow", request=request)

    with pytest.raises(TransientBackendError, match="gave up after 3") as info:
        _client(handler).complete(PromptSpec("x", sentence_id=5))
    assert len(calls) == 3 and info.value.sentence_id == 5


def test_malformed_response_is_a_backend_error():
    with pytest.raises(BackendError, match="choices.0.text"):
        _client(lambda r: httpx.Response(200, json={"unexpected": 1})).complete("x")


def test_auth_header_and_env_override(monkeypatch):
    headers = []

    def handler(request):
        headers.append(request.headers.get("authorization"))
        return _ok("x")

    monkeypatch.setenv("MY_KEY", "secret1")
    monkeypatch.setenv("OTHER_KEY", "secret2")
    _client(handler, auth="MY_KEY").complete("a")
    monkeypatch.setenv(AUTH_ENV_OVERRIDE, "OTHER_KEY")
    _client(handler, auth="MY_KEY").complete("b")
    monkeypatch.delenv(AUTH_ENV_OVERRIDE)
    _client(handler).complete("c")
    assert headers == ["Bearer secret1", "Bearer secret2", None]


def test_chat_format_and_response_path():
    bodies = []

    def handler(request):
        bodies.append(json.loads(request.content))
        return httpx.Response(200, json={"choices": [{"message": {"content": "hallo"}}]})

    client = _client(handler, chat_format=True, response_path="choices.0.message.content",
                     request_fields={"model": "model", "input": "messages", "max_length": "max_tokens",
                                     "beam_width": None, "temperature": "temperature"})
    assert client.complete("hello") == "hallo"
    assert bodies[0]["messages"] == [{"role": "user", "content": "hello"}]
    assert "num_beams" not in bodies[0]


def test_backend_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        BackendConfig(kind="http")
    with pytest.raises(ValueError):
        BackendConfig(kind="replay")
    with pytest.raises(ValueError):
        BackendConfig(kind="grpc", cache_path="x")
    cfg = BackendConfig(kind="http", endpoint=URL, decode=DecodeParams(beam_width=1))
    assert BackendConfig.from_dict(cfg.to_dict()) == cfg


def test_translate_result_fields(tmp_path):
    client = _client(lambda r: _ok("译文：我去银行。然后回家。"), tmp_path)
    res = client.translate(PromptSpec("p", sentence_id=1), "zh")
    assert res.extracted == "我去银行。" and res.raw_output == "译文：我去银行。然后回家。"
    assert res.sentence_id == 1 and res.backend_id == "http:m"
    assert res.prompt_hash == client.hash_for("p")


# output post-processing

@pytest.mark.parametrize("raw,lang,expected", [
    ("Die Bank ist geschlossen. Sie öffnet morgen.", "de", "Die Bank ist geschlossen."),
    ("Translation: The bank is closed.\nNote: literal.", "en", "The bank is closed."),
    ("银行关门了。明天开门。", "zh", "银行关门了。"),
    ("\"It costs 13.5 euros.\" That is cheap.", "en", "It costs 13.5 euros."),
    ("No terminator at all", "en", "No terminator at all"),
    ("   \n  ", "en", ""),
    ("Really?! Yes.", "en", "Really?!"),
])
def test_extract_translation_examples(raw, lang, expected):
    assert extract_translation(raw, lang) == expected


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="ab .!?\n\"。，银", max_size=40), st.sampled_from(["en", "de", "zh"]))
def test_extract_translation_is_idempotent(raw, lang):
    once = extract_translation(raw, lang)
    assert extract_translation(once, lang) == once
    assert "\n" not in once


def test_detect_task_failure():
    assert detect_task_failure("", "x", "zh")
    assert detect_task_failure("The bank is closed.", "The bank is closed.", "zh")
    assert detect_task_failure("I'm sorry, I cannot help.", "src", "de")
    assert detect_task_failure("The bank is closed.", "银行关门了。", "zh")
    assert not detect_task_failure("银行关门了。", "The bank is closed.", "zh")
    assert not detect_task_failure("Die Bank ist zu.", "The bank is closed.", "de")
    assert detect_task_failure("Custom no.", "src", "en", refusal_patterns=("custom",))
