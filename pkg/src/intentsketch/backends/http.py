"""HTTP client for chat-completion-style endpoints with bearer auth.

One wire dialect covers every backend role: POST {base_url}/chat/completions
with optional logprobs, plus {base_url}/embeddings when the endpoint supports
it.  Transient transport failures (timeouts, connection resets, 5xx) are
retried with exponential backoff, at most 3 attempts in total; 4xx-class
semantic errors are never retried.
"""

from __future__ import annotations

import math
import os
import threading
import time
from typing import Any, Callable, Mapping

import requests

from ..errors import MalformedResponse, RateLimited, TransportError
from .base import Backend, BackendRequest, Completion, hashed_embedding, unit_normalized
from .config import BackendConfig

MAX_ATTEMPTS = 3
BACKOFF_BASE_S = 0.5


class HttpBackend(Backend):
    """Chat-completion endpoint client implementing the Backend interface."""

    def __init__(
        self,
        config: BackendConfig,
        *,
        session: Any | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ) -> None:
        super().__init__(config.backend_id, supports_logprobs=config.supports_logprobs)
        self.config = config
        self._session = session or requests.Session()
        self._sleep = sleeper
        self._semaphore = threading.Semaphore(config.concurrency_limit)

    # -- transport ---------------------------------------------------------------

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env_var:
            key = os.environ.get(self.config.api_key_env_var, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, path: str, payload: Mapping[str, Any]) -> Any:
        url = self.config.base_url.rstrip("/") + path
        last_error: Exception | None = None
        for attempt in range(MAX_ATTEMPTS):
            if attempt:
                self._sleep(BACKOFF_BASE_S * 2 ** (attempt - 1))
            try:
                with self._semaphore:
                    response = self._session.post(
                        url,
                        json=dict(payload),
                        headers=self._headers(),
                        timeout=self.config.timeout_s,
                    )
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_error = exc
                continue
            status = int(response.status_code)
            if status == 429:
                raise RateLimited(f"{self.id}: rate limited by {url}")
            if 400 <= status < 500:
                raise TransportError(f"{self.id}: HTTP {status} from {url}")
            if status >= 500:
                last_error = TransportError(f"{self.id}: HTTP {status} from {url}")
                continue
            try:
                return response.json()
            except ValueError as exc:
                raise MalformedResponse(f"{self.id}: non-JSON body from {url}") from exc
        raise TransportError(
            f"{self.id}: gave up after {MAX_ATTEMPTS} attempts: {last_error}"
        )

    # -- backend interface ----------------------------------------------------------

    def complete(self, req: BackendRequest) -> Completion:
        payload: dict[str, Any] = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.params.temperature,
            "max_tokens": req.params.max_tokens,
        }
        if req.params.seed is not None:
            payload["seed"] = req.params.seed
        if req.params.want_logprobs and self.config.supports_logprobs:
            payload["logprobs"] = True
            payload["top_logprobs"] = 20
        if req.media and self.config.supports_media:
            payload["media"] = list(req.media)
        body = self._post("/chat/completions", payload)
        return _parse_completion(self.id, body)

    def embed(self, req: BackendRequest) -> tuple[float, ...]:
        if not self.config.supports_embeddings:
            return hashed_embedding(req.prompt)
        body = self._post(
            "/embeddings", {"model": self.config.model_name, "input": req.prompt}
        )
        try:
            vector = body["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"{self.id}: embeddings response missing data") from exc
        return unit_normalized(vector)

    def _sample_completions(self, req: BackendRequest, k: int) -> list[str]:
        """One request with n=k choices; cheaper than k round trips."""
        payload: dict[str, Any] = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": 1.0,
            "max_tokens": req.params.max_tokens,
            "n": k,
        }
        if req.params.seed is not None:
            payload["seed"] = req.params.seed
        if req.media and self.config.supports_media:
            payload["media"] = list(req.media)
        body = self._post("/chat/completions", payload)
        try:
            choices = body["choices"]
            return [str(c["message"]["content"]) for c in choices]
        except (KeyError, TypeError) as exc:
            raise MalformedResponse(f"{self.id}: choices missing from response") from exc


def _parse_completion(backend_id: str, body: Any) -> Completion:
    try:
        choice = body["choices"][0]
        text = str(choice["message"]["content"])
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"{backend_id}: completion body missing fields") from exc
    top: dict[str, float] | None = None
    logprobs = choice.get("logprobs") if isinstance(choice, Mapping) else None
    if isinstance(logprobs, Mapping):
        content = logprobs.get("content") or []
        if content:
            entries = content[0].get("top_logprobs") or []
            top = {}
            for entry in entries:
                token = str(entry.get("token", ""))
                lp = float(entry.get("logprob", -math.inf))
                if token not in top or lp > top[token]:
                    top[token] = lp
    return Completion(text=text, top_logprobs=top)
