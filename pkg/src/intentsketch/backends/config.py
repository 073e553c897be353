"""Backend configuration files: named endpoint configs with credentials via env."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from ..errors import ConfigError


@dataclass(frozen=True)
class BackendConfig:
    """One chat-completion endpoint and its capabilities.

    Credentials are read from ``api_key_env_var`` at call time; they never
    appear on the command line or in config files.
    """

    backend_id: str
    base_url: str
    model_name: str
    api_key_env_var: str = ""
    supports_logprobs: bool = False
    supports_media: bool = False
    supports_embeddings: bool = False
    concurrency_limit: int = 4
    timeout_s: float = 60.0

    def __post_init__(self) -> None:
        if not self.backend_id:
            raise ConfigError("backend_id is required")
        if self.concurrency_limit < 1:
            raise ConfigError("concurrency_limit must be >= 1")

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "BackendConfig":
        try:
            return cls(
                backend_id=str(obj["backend_id"]),
                base_url=str(obj.get("base_url", "")),
                model_name=str(obj.get("model_name", "")),
                api_key_env_var=str(obj.get("api_key_env_var", "")),
                supports_logprobs=bool(obj.get("supports_logprobs", False)),
                supports_media=bool(obj.get("supports_media", False)),
                supports_embeddings=bool(obj.get("supports_embeddings", False)),
                concurrency_limit=int(obj.get("concurrency_limit", 4)),
                timeout_s=float(obj.get("timeout_s", 60.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"backend config missing key {exc}") from exc


def load_backend_configs(path: str | Path) -> dict[str, BackendConfig]:
    """Load a JSON list (or {"backends": [...]}) of backend configs."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load backend config {path}: {exc}") from exc
    entries = obj.get("backends", obj) if isinstance(obj, Mapping) else obj
    if not isinstance(entries, list):
        raise ConfigError("backend config must be a list of backend objects")
    configs = {}
    for entry in entries:
        cfg = BackendConfig.from_dict(entry)
        if cfg.backend_id in configs:
            raise ConfigError(f"duplicate backend_id {cfg.backend_id!r}")
        configs[cfg.backend_id] = cfg
    return configs
