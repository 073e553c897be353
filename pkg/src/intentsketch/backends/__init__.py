"""Model-backend layer: uniform interface, HTTP client, scripted mock, cache."""

from .base import (
    Backend,
    BackendPool,
    BackendRequest,
    Completion,
    RequestParams,
    canonical_request,
    hashed_embedding,
    judge_equivalence,
    parse_slot_label,
    posterior_from_logprobs,
    posterior_from_samples,
    prompt_digest,
    request_key,
    unit_normalized,
)
from .cache import CacheEntry, CachingBackend, ResponseCache
from .config import BackendConfig, load_backend_configs
from .http import HttpBackend
from .mock import MockBackend, MockRule, load_scenario

__all__ = [
    "Backend",
    "BackendConfig",
    "BackendPool",
    "BackendRequest",
    "CacheEntry",
    "CachingBackend",
    "Completion",
    "HttpBackend",
    "MockBackend",
    "MockRule",
    "RequestParams",
    "ResponseCache",
    "canonical_request",
    "hashed_embedding",
    "judge_equivalence",
    "load_backend_configs",
    "load_scenario",
    "parse_slot_label",
    "posterior_from_logprobs",
    "posterior_from_samples",
    "prompt_digest",
    "request_key",
    "unit_normalized",
]
