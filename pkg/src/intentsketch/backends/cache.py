"""Persistent content-addressed cache for backend responses.

Entries live as one JSON file per key digest in an append-only directory.
Keys are stable across process restarts for identical canonical requests, and
temperature>0 calls are cached too: reproducibility beats freshness for
experiment runs.  Writes are atomic (temp file + rename) with a single-writer
lock; reads need no locking.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from ..core import AnswerPosterior
from .base import Backend, BackendRequest, Completion, request_key


@dataclass(frozen=True)
class CacheEntry:
    key: str
    value: Mapping[str, Any]
    created_at: float


class ResponseCache:
    """Append-only directory of response files named by request key digest."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> Mapping[str, Any] | None:
        path = self._path(key)
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
        except OSError:
            self.misses += 1
            return None
        self.hits += 1
        return entry["value"]

    def put(self, key: str, value: Mapping[str, Any]) -> None:
        """Store a value; the first write for a key wins."""
        path = self._path(key)
        with self._write_lock:
            if path.exists():
                return
            entry = {"key": key, "value": value, "created_at": time.time()}
            tmp = path.with_suffix(".tmp")
            tmp.write_text(
                json.dumps(entry, sort_keys=True, ensure_ascii=False), encoding="utf-8"
            )
            os.replace(tmp, path)


class CachingBackend(Backend):
    """Backend wrapper that serves repeated identical requests from disk."""

    def __init__(self, inner: Backend, cache: ResponseCache) -> None:
        super().__init__(inner.id, supports_logprobs=inner.supports_logprobs)
        self.inner = inner
        self.cache = cache

    def complete(self, req: BackendRequest) -> Completion:
        key = request_key(req)
        cached = self.cache.get(key)
        if cached is not None:
            return Completion(text=cached["text"], top_logprobs=cached.get("top_logprobs"))
        comp = self.inner.complete(req)
        self.cache.put(
            key,
            {
                "text": comp.text,
                "top_logprobs": None
                if comp.top_logprobs is None
                else dict(comp.top_logprobs),
            },
        )
        return comp

    def embed(self, req: BackendRequest) -> tuple[float, ...]:
        key = request_key(req)
        cached = self.cache.get(key)
        if cached is not None:
            return tuple(float(x) for x in cached["vector"])
        vector = self.inner.embed(req)
        self.cache.put(key, {"vector": list(vector)})
        return vector

    def answer_slot_likelihoods(self, req: BackendRequest) -> AnswerPosterior:
        key = request_key(req)
        cached = self.cache.get(key)
        if cached is not None:
            return AnswerPosterior.from_dict(cached)
        posterior = self.inner.answer_slot_likelihoods(req)
        self.cache.put(key, posterior.to_dict())
        return posterior
