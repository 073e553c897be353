from __future__ import annotations

import json
import math

import numpy as np
import pytest

from intentsketch.backends import (
    BackendPool,
    BackendRequest,
    CachingBackend,
    HttpBackend,
    MockBackend,
    RequestParams,
    ResponseCache,
    canonical_request,
    hashed_embedding,
    judge_equivalence,
    load_scenario,
    request_key,
)
from intentsketch.backends.config import BackendConfig, load_backend_configs
from intentsketch.core import PosteriorSource
from intentsketch.errors import (
    ConfigError,
    MalformedResponse,
    NoLikelihoodSupport,
    RateLimited,
    ScenarioMiss,
    TransportError,
    UnparseableVerdict,
)


def _req(prompt="hello", kind="complete", **params) -> BackendRequest:
    return BackendRequest(
        backend_id="b", kind=kind, prompt=prompt, params=RequestParams(**params)
    )


# -- mock backend -------------------------------------------------------------

def test_mock_scripted_completion():
    mock = MockBackend().script_complete(r"hello", "hi there")
    assert mock.complete(_req("hello world")).text == "hi there"
    assert mock.calls["complete"] == 1


def test_mock_unscripted_completion_raises():
    with pytest.raises(ScenarioMiss):
        MockBackend().complete(_req("nothing matches"))


def test_mock_logprob_readout_matches_exp_normalize_oracle():
    logprobs = {"A": -0.223, "B": -1.609, "C": -2.303, "D": -2.303}
    mock = MockBackend().script_posterior(r"pick", {"logprobs": logprobs})
    post = mock.answer_slot_likelihoods(
        _req("pick one", kind="slot_likelihoods", slots=("A", "B", "C", "D"))
    )
    # independent oracle: exponentiate each logprob and normalize over slots
    raw = {k: math.exp(v) for k, v in logprobs.items()}
    total = sum(raw.values())
    expected = [raw[s] / total for s in ("A", "B", "C", "D")]
    assert post.probs == pytest.approx(expected, abs=1e-12)
    assert post.source is PosteriorSource.LOGPROB
    assert abs(sum(post.probs) - 1.0) < 1e-9


def test_mock_sampling_fallback_add_one_smoothing_counting_oracle():
    draws = ["A", "A", "A", "A", "B", "B", "A", "A"]
    mock = MockBackend(supports_logprobs=False).script_posterior(r"pick", {"samples": draws})
    post = mock.answer_slot_likelihoods(
        _req("pick one", kind="slot_likelihoods", slots=("A", "B", "C", "D"))
    )
    # counting oracle: (6+1, 2+1, 0+1, 0+1) / 12
    assert post.probs == pytest.approx((7 / 12, 3 / 12, 1 / 12, 1 / 12), abs=1e-12)
    assert post.source is PosteriorSource.SAMPLED


def test_mock_sampled_posterior_via_real_sampling_path():
    mock = MockBackend(supports_logprobs=False)
    mock.script_complete(r"pick", "ANSWER: B")
    post = mock.answer_slot_likelihoods(
        _req("pick one", kind="slot_likelihoods", slots=("A", "B"), n_samples=6, seed=1)
    )
    # 6 parsed B draws + smoothing over 2 slots -> (1, 7) / 8
    assert post.probs == pytest.approx((1 / 8, 7 / 8), abs=1e-12)
    assert mock.calls["complete"] == 6


def test_single_slot_is_a_precondition_error():
    mock = MockBackend().script_posterior(r".", {"probs": [1.0]})
    with pytest.raises(NoLikelihoodSupport):
        mock.answer_slot_likelihoods(
            _req("pick", kind="slot_likelihoods", slots=("A",))
        )


def test_slot_request_requires_slots():
    with pytest.raises(ConfigError):
        _req("pick", kind="slot_likelihoods")


def test_mock_embed_scripted_and_fallback():
    mock = MockBackend().script("embed", r"scripted", {"vector": [3.0, 4.0]})
    assert mock.embed(_req("scripted text", kind="embed")) == pytest.approx((0.6, 0.8))
    fallback = mock.embed(_req("other text", kind="embed"))
    assert math.isclose(math.fsum(x * x for x in fallback), 1.0, abs_tol=1e-12)


def test_scenario_file_round_trip(tmp_path):
    scenario = {
        "backends": [
            {
                "backend_id": "engine-a",
                "supports_logprobs": True,
                "rules": [
                    {
                        "kind": "complete",
                        "match": {"regex": "greet"},
                        "response": {"text": "howdy"},
                    }
                ],
            }
        ]
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(scenario), encoding="utf-8")
    backends = load_scenario(path)
    assert backends["engine-a"].complete(
        BackendRequest(backend_id="engine-a", kind="complete", prompt="greet me")
    ).text == "howdy"


# -- embeddings ----------------------------------------------------------------

def test_hashed_embedding_deterministic_and_unit():
    a = hashed_embedding("align the audio with video")
    b = hashed_embedding("align the audio with video")
    assert a == b
    assert math.isclose(math.fsum(x * x for x in a), 1.0, abs_tol=1e-12)


def test_hashed_embedding_empty_text_sentinel():
    v = hashed_embedding("")
    assert v[0] == 1.0
    assert all(x == 0.0 for x in v[1:])
    assert hashed_embedding("   ") == v


def test_hashed_embedding_distinct_texts_differ():
    assert hashed_embedding("timbre of the note") != hashed_embedding("order of events")


# -- judge -----------------------------------------------------------------------

def test_judge_reflexive_without_call():
    mock = MockBackend()
    assert judge_equivalence("same text", "same text", mock) is True
    assert mock.total_calls == 0


def test_judge_scripted_verdicts_and_canonical_order():
    mock = MockBackend().script_judge(r"First: x\b.*Second: y\b", "no")
    assert judge_equivalence("y", "x", mock) is False
    assert judge_equivalence("x", "y", mock) is False
    assert mock.calls["judge"] == 2  # canonical order means one rule serves both


def test_judge_unparseable_verdict():
    mock = MockBackend().script_judge(r"First", "maybe?")
    with pytest.raises(UnparseableVerdict):
        judge_equivalence("a", "b", mock)


# -- cache ------------------------------------------------------------------------

def test_cache_round_trip_and_hit_counters(tmp_path):
    cache = ResponseCache(tmp_path / "cache")
    cache.put("k1", {"text": "payload"})
    assert cache.get("k1") == {"text": "payload"}
    assert cache.get("missing") is None
    assert (cache.hits, cache.misses) == (1, 1)


def test_cache_first_write_wins(tmp_path):
    cache = ResponseCache(tmp_path / "cache")
    cache.put("k", {"text": "first"})
    cache.put("k", {"text": "second"})
    assert cache.get("k") == {"text": "first"}


def test_request_keys_stable_and_collision_free_property():
    rng = np.random.default_rng(3)
    seen: dict[str, str] = {}
    kinds = ("complete", "embed", "judge")
    for _ in range(300):
        kind = kinds[rng.integers(0, len(kinds))]
        req = BackendRequest(
            backend_id=f"b{rng.integers(0, 3)}",
            kind=kind,
            prompt=f"prompt {rng.integers(0, 50)}",
            media=tuple(f"m{j}" for j in range(rng.integers(0, 3))),
            params=RequestParams(
                temperature=float(rng.choice([0.0, 0.7, 1.0])),
                max_tokens=int(rng.choice([8, 64])),
                seed=int(rng.integers(0, 4)),
            ),
        )
        canonical = canonical_request(req)
        key = request_key(req)
        if canonical in seen:
            assert seen[canonical] == key
        else:
            for other_canonical, other_key in seen.items():
                assert (other_key == key) == (other_canonical == canonical)
            seen[canonical] = key
    # identical request rebuilt from scratch keys identically
    r1 = _req("same", temperature=0.5, seed=9)
    r2 = _req("same", temperature=0.5, seed=9)
    assert request_key(r1) == request_key(r2)


def test_canonical_request_normalizes_params_not_prompt():
    messy = BackendRequest(
        backend_id="b",
        kind="slot_likelihoods",
        prompt="keep  \n  these bytes",
        params=RequestParams(slots=("A ", " B")),
    )
    tidy = BackendRequest(
        backend_id="b",
        kind="slot_likelihoods",
        prompt="keep  \n  these bytes",
        params=RequestParams(slots=("A", "B")),
    )
    assert request_key(messy) == request_key(tidy)
    # prompt bytes survive canonicalization untouched
    assert json.loads(canonical_request(messy))["prompt"] == "keep  \n  these bytes"


def test_caching_backend_serves_second_call_from_disk(tmp_path):
    mock = MockBackend().script_complete(r"hello", "cached reply")
    backend = CachingBackend(mock, ResponseCache(tmp_path / "cache"))
    req = _req("hello there", seed=1)
    assert backend.complete(req).text == "cached reply"
    assert backend.complete(req).text == "cached reply"
    assert mock.calls["complete"] == 1


def test_caching_backend_caches_posteriors_and_embeddings(tmp_path):
    mock = MockBackend().script_posterior(r"pick", {"probs": [0.9, 0.1]})
    backend = CachingBackend(mock, ResponseCache(tmp_path / "cache"))
    req = _req("pick", kind="slot_likelihoods", slots=("A", "B"))
    first = backend.answer_slot_likelihoods(req)
    second = backend.answer_slot_likelihoods(req)
    assert first == second
    assert mock.calls["slot_likelihoods"] == 1
    emb_req = _req("embed me", kind="embed")
    assert backend.embed(emb_req) == backend.embed(emb_req)
    assert mock.calls["embed"] == 1


# -- http client -----------------------------------------------------------------

class FakeResponse:
    def __init__(self, status_code: int, body: object = None, text: str = ""):
        self.status_code = status_code
        self._body = body
        self.text = text

    def json(self):
        if self._body is None:
            raise ValueError("not json")
        return self._body


class FakeSession:
    """Yields queued responses or exceptions; records every post."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.posts = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.posts.append({"url": url, "json": json})
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


def _http(outcomes, **cfg_kwargs) -> tuple[HttpBackend, FakeSession]:
    config = BackendConfig(
        backend_id="remote",
        base_url="https://example.invalid/v1",
        model_name="m1",
        **cfg_kwargs,
    )
    session = FakeSession(outcomes)
    backend = HttpBackend(config, session=session, sleeper=lambda s: None)
    return backend, session


def _ok_body(text="fine"):
    return {"choices": [{"message": {"content": text}}]}


def test_http_complete_parses_text_and_logprobs():
    body = {
        "choices": [
            {
                "message": {"content": "ANSWER: A"},
                "logprobs": {
                    "content": [
                        {"top_logprobs": [{"token": "A", "logprob": -0.1},
                                          {"token": "B", "logprob": -2.5}]}
                    ]
                },
            }
        ]
    }
    backend, session = _http([FakeResponse(200, body)], supports_logprobs=True)
    comp = backend.complete(_req("question", want_logprobs=True))
    assert comp.text == "ANSWER: A"
    assert comp.top_logprobs == {"A": -0.1, "B": -2.5}
    assert session.posts[0]["json"]["logprobs"] is True


def test_http_retries_timeouts_up_to_three_attempts():
    import requests

    backend, session = _http(
        [requests.Timeout(), requests.ConnectionError(), FakeResponse(200, _ok_body())]
    )
    assert backend.complete(_req("q")).text == "fine"
    assert len(session.posts) == 3


def test_http_gives_up_after_three_transport_failures():
    import requests

    backend, session = _http([requests.Timeout()] * 4)
    with pytest.raises(TransportError):
        backend.complete(_req("q"))
    assert len(session.posts) == 3


def test_http_never_retries_4xx():
    backend, session = _http([FakeResponse(400), FakeResponse(200, _ok_body())])
    with pytest.raises(TransportError):
        backend.complete(_req("q"))
    assert len(session.posts) == 1


def test_http_rate_limited_not_retried():
    backend, session = _http([FakeResponse(429)])
    with pytest.raises(RateLimited):
        backend.complete(_req("q"))
    assert len(session.posts) == 1


def test_http_retries_5xx():
    backend, session = _http([FakeResponse(500), FakeResponse(200, _ok_body())])
    assert backend.complete(_req("q")).text == "fine"
    assert len(session.posts) == 2


def test_http_non_json_body_is_malformed():
    backend, _ = _http([FakeResponse(200, None, text="<html>oops</html>")])
    with pytest.raises(MalformedResponse):
        backend.complete(_req("q"))


def test_http_embeddings_fallback_is_hashing():
    backend, session = _http([])
    vec = backend.embed(_req("evidence first", kind="embed"))
    assert vec == hashed_embedding("evidence first")
    assert session.posts == []


def test_backend_config_loading(tmp_path):
    path = tmp_path / "backends.json"
    path.write_text(
        json.dumps(
            [
                {
                    "backend_id": "engine-a",
                    "base_url": "https://example.invalid",
                    "model_name": "m",
                    "supports_logprobs": True,
                    "concurrency_limit": 2,
                }
            ]
        ),
        encoding="utf-8",
    )
    configs = load_backend_configs(path)
    assert configs["engine-a"].supports_logprobs is True
    assert configs["engine-a"].concurrency_limit == 2


def test_backend_config_rejects_duplicates(tmp_path):
    path = tmp_path / "backends.json"
    entry = {"backend_id": "x", "base_url": "u", "model_name": "m"}
    path.write_text(json.dumps([entry, entry]), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_backend_configs(path)


def test_pool_resolution_and_default():
    named = MockBackend("named")
    fallback = MockBackend("fallback")
    pool = BackendPool({"named": named}, default=fallback)
    assert pool.resolve("named") is named
    assert pool.resolve("anything-else") is fallback
    with pytest.raises(ConfigError):
        BackendPool().resolve("missing")
