"""Model-backend abstraction: requests, responses, registry, and derived ops.

One request shape covers completions, answer-slot likelihood readouts,
embeddings, and equivalence judging.  Concrete backends implement ``complete``
and ``embed``; slot likelihoods are derived here (logprob readout when the
backend exposes logprobs, otherwise sampling with add-one smoothing).
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from ..core import AnswerPosterior, PosteriorSource
from ..errors import (
    BackendError,
    ConfigError,
    NoLikelihoodSupport,
    UnparseableVerdict,
)

REQUEST_KINDS = ("complete", "slot_likelihoods", "embed", "judge")

#: dimensionality of the deterministic hashing embedding fallback
HASH_EMBED_DIM = 64


@dataclass(frozen=True)
class RequestParams:
    """Decoding parameters; part of the cache identity of a request."""

    temperature: float = 0.0
    max_tokens: int = 1024
    seed: int | None = None
    slots: tuple[str, ...] | None = None
    n_samples: int = 8
    want_logprobs: bool = False


@dataclass(frozen=True)
class BackendRequest:
    backend_id: str
    kind: str
    prompt: str
    media: tuple[str, ...] = ()
    params: RequestParams = field(default_factory=RequestParams)

    def __post_init__(self) -> None:
        if self.kind not in REQUEST_KINDS:
            raise ConfigError(f"unknown request kind {self.kind!r}")
        if self.kind == "slot_likelihoods" and not self.params.slots:
            raise ConfigError("slot_likelihoods request needs params.slots")
        object.__setattr__(self, "media", tuple(self.media))


def _norm_ws(s: str) -> str:
    return " ".join(s.split())


def canonical_request(req: BackendRequest) -> str:
    """Canonical JSON form of a request; stable across process restarts.

    Field order is fixed, whitespace is normalized in params only, and the
    prompt bytes are kept untouched.  Media references enter as digests.
    """
    params = {
        "max_tokens": int(req.params.max_tokens),
        "n_samples": int(req.params.n_samples),
        "seed": None if req.params.seed is None else int(req.params.seed),
        "slots": None
        if req.params.slots is None
        else [_norm_ws(s) for s in req.params.slots],
        "temperature": repr(float(req.params.temperature)),
        "want_logprobs": bool(req.params.want_logprobs),
    }
    payload = {
        "backend_id": req.backend_id,
        "kind": req.kind,
        "media": [hashlib.sha256(m.encode("utf-8")).hexdigest() for m in req.media],
        "params": params,
        "prompt": req.prompt,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_key(req: BackendRequest) -> str:
    """Content-addressed cache key of a request."""
    return hashlib.sha256(canonical_request(req).encode("utf-8")).hexdigest()


def prompt_digest(prompt: str) -> str:
    """Short digest of prompt text, used in logs and mock scenario matching."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Completion:
    """Completion text plus, when available, the first answer token's
    top-logprob alternatives (token -> logprob)."""

    text: str
    top_logprobs: Mapping[str, float] | None = None


def hashed_embedding(text: str, dim: int = HASH_EMBED_DIM) -> tuple[float, ...]:
    """Deterministic bag-of-tokens hashing embedding, unit L2 norm.

    Token-free text maps to a fixed basis vector so downstream cosine math
    stays defined.
    """
    tokens = re.findall(r"[a-z0-9]+", text.lower())
    vec = [0.0] * dim
    for tok in tokens:
        h = hashlib.sha256(tok.encode("utf-8")).digest()
        idx = int.from_bytes(h[:4], "big") % dim
        sign = 1.0 if h[4] % 2 == 0 else -1.0
        vec[idx] += sign
    norm = math.sqrt(math.fsum(x * x for x in vec))
    if norm == 0.0:
        vec = [0.0] * dim
        vec[0] = 1.0
        return tuple(vec)
    return tuple(x / norm for x in vec)


def unit_normalized(vector: Sequence[float]) -> tuple[float, ...]:
    vec = [float(x) for x in vector]
    norm = math.sqrt(math.fsum(x * x for x in vec))
    if norm == 0.0:
        out = [0.0] * len(vec)
        out[0] = 1.0
        return tuple(out)
    return tuple(x / norm for x in vec)


_TRAILER_RE = re.compile(r"(?im)^\s*ANSWER\s*:\s*(.+?)\s*$")


def parse_slot_label(text: str, slots: Sequence[str]) -> str | None:
    """Extract an answer-slot label from completion text.

    Tries the ANSWER: trailer, then the bare stripped text, then the first
    standalone occurrence of any label.  Returns the canonical label or None.
    """
    by_lower = {s.lower(): s for s in slots}
    matches = _TRAILER_RE.findall(text)
    if matches:
        tail = matches[-1].strip().strip(".()[]")
        if tail.lower() in by_lower:
            return by_lower[tail.lower()]
    bare = text.strip().strip(".()[]")
    if bare.lower() in by_lower:
        return by_lower[bare.lower()]
    pattern = re.compile(
        r"(?<![A-Za-z0-9])(" + "|".join(re.escape(s) for s in slots) + r")(?![A-Za-z0-9])"
    )
    m = pattern.search(text)
    return by_lower[m.group(1).lower()] if m else None


class Backend(ABC):
    """Uniform interface to one model endpoint (or its mock)."""

    def __init__(self, backend_id: str, *, supports_logprobs: bool = False) -> None:
        self.id = backend_id
        self.supports_logprobs = supports_logprobs

    @abstractmethod
    def complete(self, req: BackendRequest) -> Completion:
        """Run a text completion.  ``kind`` must be complete or judge."""

    @abstractmethod
    def embed(self, req: BackendRequest) -> tuple[float, ...]:
        """Embed text; the result is unit L2 norm within 1e-6."""

    # -- derived operations -------------------------------------------------

    def answer_slot_likelihoods(self, req: BackendRequest) -> AnswerPosterior:
        """Posterior over answer slots for a readout-style prompt.

        Logprob path: read the slot labels' probabilities from the first
        answer token and renormalize over the slots.  Sampling path: draw
        ``params.n_samples`` completions at temperature 1 and use label
        frequencies with add-one smoothing.
        """
        slots = req.params.slots or ()
        if len(slots) < 2:
            raise NoLikelihoodSupport(f"need >= 2 slots, got {len(slots)}")
        if self.supports_logprobs:
            comp = self.complete(
                replace(
                    req,
                    kind="complete",
                    params=replace(req.params, want_logprobs=True, max_tokens=8),
                )
            )
            posterior = posterior_from_logprobs(slots, comp.top_logprobs)
            if posterior is not None:
                return posterior
        return self._sampled_posterior(req, slots)

    def _sampled_posterior(
        self, req: BackendRequest, slots: tuple[str, ...]
    ) -> AnswerPosterior:
        k = max(1, req.params.n_samples)
        texts = self._sample_completions(req, k)
        return posterior_from_samples(
            slots, [parse_slot_label(t, slots) for t in texts]
        )

    def _sample_completions(self, req: BackendRequest, k: int) -> list[str]:
        """Draw k completions at temperature 1; seeds offset for distinct draws."""
        base_seed = req.params.seed
        texts = []
        for i in range(k):
            seed = None if base_seed is None else base_seed + i
            comp = self.complete(
                replace(
                    req,
                    kind="complete",
                    params=replace(req.params, temperature=1.0, seed=seed, want_logprobs=False),
                )
            )
            texts.append(comp.text)
        return texts


def posterior_from_logprobs(
    slots: Sequence[str], top_logprobs: Mapping[str, float] | None
) -> AnswerPosterior | None:
    """Exp-and-normalize the slot labels found among first-token logprobs.

    Tokens are matched to labels after stripping whitespace, case-insensitively;
    duplicate matches accumulate.  Returns None when no label appears, so the
    caller can fall back to sampling.
    """
    if not top_logprobs:
        return None
    mass = {s: 0.0 for s in slots}
    by_lower = {s.lower(): s for s in slots}
    found = False
    for token, logprob in top_logprobs.items():
        label = by_lower.get(token.strip().lower())
        if label is not None:
            mass[label] += math.exp(float(logprob))
            found = True
    if not found:
        return None
    total = math.fsum(mass.values())
    return AnswerPosterior.from_probs(
        tuple(slots), tuple(mass[s] / total for s in slots), PosteriorSource.LOGPROB
    )


def posterior_from_samples(
    slots: Sequence[str], labels: Sequence[str | None]
) -> AnswerPosterior:
    """Add-one-smoothed label frequencies over the slots.

    Unparseable samples contribute nothing beyond the smoothing prior.
    """
    counts = {s: 1 for s in slots}  # add-one smoothing
    for label in labels:
        if label is not None:
            counts[label] += 1
    total = sum(counts.values())
    return AnswerPosterior.from_probs(
        tuple(slots), tuple(counts[s] / total for s in slots), PosteriorSource.SAMPLED
    )


JUDGE_TEMPLATE = (
    "Do these two strategy descriptions express the same approach?"
    " Reply yes or no.\nFirst: {first}\nSecond: {second}\nVerdict:"
)


def judge_equivalence(a: str, b: str, backend: Backend, *, seed: int | None = None) -> bool:
    """Ask a backend whether two texts are semantically equivalent.

    Byte-identical texts are equivalent without a call.  The pair is always
    queried in canonical (sorted) order so one verdict serves both directions.
    """
    if a == b:
        return True
    lo, hi = sorted((a, b))
    req = BackendRequest(
        backend_id=backend.id,
        kind="judge",
        prompt=JUDGE_TEMPLATE.format(first=lo, second=hi),
        params=RequestParams(temperature=0.0, max_tokens=8, seed=seed),
    )
    verdict = backend.complete(req).text.strip().lower()
    first_word = re.split(r"[^a-z]+", verdict, maxsplit=1)[0] if verdict else ""
    if first_word == "yes":
        return True
    if first_word == "no":
        return False
    raise UnparseableVerdict(f"judge verdict not yes/no: {verdict[:80]!r}")


class BackendPool:
    """Registry resolving backend ids; a default serves unregistered ids."""

    def __init__(
        self,
        backends: Mapping[str, Backend] | None = None,
        *,
        default: Backend | None = None,
    ) -> None:
        self._backends = dict(backends or {})
        self._default = default

    def register(self, backend: Backend) -> None:
        self._backends[backend.id] = backend

    def resolve(self, backend_id: str) -> Backend:
        backend = self._backends.get(backend_id, self._default)
        if backend is None:
            raise ConfigError(f"no backend bound for id {backend_id!r}")
        return backend

    def __iter__(self):
        return iter(self._backends.values())


__all__ = [
    "Backend",
    "BackendPool",
    "BackendRequest",
    "Completion",
    "JUDGE_TEMPLATE",
    "RequestParams",
    "canonical_request",
    "hashed_embedding",
    "judge_equivalence",
    "parse_slot_label",
    "posterior_from_logprobs",
    "posterior_from_samples",
    "prompt_digest",
    "request_key",
    "unit_normalized",
]
