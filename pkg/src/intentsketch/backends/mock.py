"""Scripted deterministic mock backend for fully offline runs and tests.

A scenario is an ordered list of rules mapping a prompt digest or regex (plus
an optional request kind) to a canned response.  The first matching rule
wins.  Unscripted completions raise; unscripted embeddings fall back to the
deterministic hashing embedding.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from ..core import AnswerPosterior, PosteriorSource
from ..errors import ConfigError, ScenarioMiss
from .base import (
    Backend,
    BackendRequest,
    Completion,
    hashed_embedding,
    parse_slot_label,
    posterior_from_logprobs,
    posterior_from_samples,
    prompt_digest,
    unit_normalized,
)


@dataclass(frozen=True)
class MockRule:
    """One scripted response; ``kind`` None matches any request kind."""

    response: Mapping[str, Any]
    kind: str | None = None
    regex: str | None = None
    digest: str | None = None
    _compiled: re.Pattern | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if (self.regex is None) == (self.digest is None):
            raise ConfigError("rule needs exactly one of regex or digest")
        if self.regex is not None:
            object.__setattr__(self, "_compiled", re.compile(self.regex, re.S))

    def matches(self, req: BackendRequest) -> bool:
        if self.kind is not None and self.kind != req.kind:
            return False
        if self.digest is not None:
            return prompt_digest(req.prompt).startswith(self.digest)
        assert self._compiled is not None
        return self._compiled.search(req.prompt) is not None


class MockBackend(Backend):
    """Rule-scripted backend; counts every call and never touches a network."""

    def __init__(
        self,
        backend_id: str = "mock",
        rules: Sequence[MockRule] = (),
        *,
        supports_logprobs: bool = True,
    ) -> None:
        super().__init__(backend_id, supports_logprobs=supports_logprobs)
        self.rules: list[MockRule] = list(rules)
        self.calls: Counter[str] = Counter()
        self.requests: list[BackendRequest] = []

    # -- scripting helpers ----------------------------------------------------

    def script(self, kind: str | None, regex: str, response: Mapping[str, Any]) -> "MockBackend":
        self.rules.append(MockRule(kind=kind, regex=regex, response=response))
        return self

    def script_complete(self, regex: str, text: str) -> "MockBackend":
        return self.script("complete", regex, {"text": text})

    def script_judge(self, regex: str, verdict: str) -> "MockBackend":
        return self.script("judge", regex, {"text": verdict})

    def script_posterior(self, regex: str, response: Mapping[str, Any]) -> "MockBackend":
        return self.script("slot_likelihoods", regex, response)

    @property
    def total_calls(self) -> int:
        return sum(self.calls.values())

    def _match(self, req: BackendRequest) -> Mapping[str, Any] | None:
        for rule in self.rules:
            if rule.matches(req):
                return rule.response
        return None

    # -- backend interface ------------------------------------------------------

    def complete(self, req: BackendRequest) -> Completion:
        self.calls[req.kind] += 1
        self.requests.append(req)
        response = self._match(req)
        if response is None:
            raise ScenarioMiss(
                f"no rule for {req.kind} prompt: {req.prompt[:120]!r}"
            )
        if isinstance(response, str):
            return Completion(text=response)
        return Completion(
            text=str(response.get("text", "")),
            top_logprobs=response.get("top_logprobs"),
        )

    def embed(self, req: BackendRequest) -> tuple[float, ...]:
        self.calls["embed"] += 1
        self.requests.append(req)
        response = self._match(req)
        if response is not None and "vector" in response:
            return unit_normalized(response["vector"])
        return hashed_embedding(req.prompt)

    def answer_slot_likelihoods(self, req: BackendRequest) -> AnswerPosterior:
        self.calls["slot_likelihoods"] += 1
        self.requests.append(req)
        slots = req.params.slots or ()
        response = self._match(req)
        if response is None or len(slots) < 2:
            # Unscripted (or invalid): exercise the real readout/sampling path.
            return super().answer_slot_likelihoods(req)
        if "probs" in response:
            probs = response["probs"]
            if isinstance(probs, Mapping):
                probs = [probs.get(s, 0.0) for s in slots]
            return AnswerPosterior.from_probs(slots, probs, PosteriorSource.LOGPROB)
        if "logprobs" in response and self.supports_logprobs:
            posterior = posterior_from_logprobs(slots, response["logprobs"])
            if posterior is None:
                raise ScenarioMiss("scripted logprobs name no slot label")
            return posterior
        if "samples" in response:
            labels = [parse_slot_label(t, slots) for t in response["samples"]]
            return posterior_from_samples(slots, labels)
        raise ConfigError(
            "slot_likelihoods rule needs one of probs/logprobs/samples"
        )


def load_scenario(source: str | Path | Mapping[str, Any]) -> dict[str, MockBackend]:
    """Build mock backends from a scenario file or parsed mapping.

    Shape: {"backends": [{"backend_id", "supports_logprobs", "rules": [
    {"kind", "match": {"regex"|"digest"}, "response": {...}}, ...]}, ...]}.
    A top-level single backend object (no "backends" key) is also accepted.
    """
    if isinstance(source, (str, Path)):
        try:
            obj = json.loads(Path(source).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load scenario {source}: {exc}") from exc
    else:
        obj = source
    specs = obj.get("backends", [obj]) if isinstance(obj, Mapping) else obj
    backends: dict[str, MockBackend] = {}
    for spec in specs:
        rules = []
        for rule in spec.get("rules", ()):
            match = rule.get("match", {})
            rules.append(
                MockRule(
                    kind=rule.get("kind"),
                    regex=match.get("regex"),
                    digest=match.get("digest"),
                    response=rule.get("response", {}),
                )
            )
        backend = MockBackend(
            backend_id=spec.get("backend_id", "mock"),
            rules=rules,
            supports_logprobs=bool(spec.get("supports_logprobs", True)),
        )
        backends[backend.id] = backend
    return backends
