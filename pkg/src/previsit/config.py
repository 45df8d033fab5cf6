"""Pipeline configuration: one TOML file, overridable from the command line."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .providers import (
    DEFAULT_API_KEY_ENV,
    MOCK_EMBED_DIM,
    CachedEmbedder,
    HttpEmbedder,
    HttpGenerator,
    MockEmbedder,
    MockGenerator,
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    provider: str = "mock"  # "mock" or "http"
    seed: int = 0
    # http generation
    endpoint: str = ""
    model: str = ""
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = 60.0
    attempts: int = 3
    temperature: float = 0.0
    # http embedding; endpoint defaults to the generation endpoint
    embedding_endpoint: str = ""
    embedding_model: str = ""
    embedding_dim: int = MOCK_EMBED_DIM
    # pipeline
    locale: str = "en"
    retries: int = 2
    workers: int = 4
    cluster_cutoff: float = 0.5
    embed_timing: bool = True
    normalize_nodes: bool = True
    tau: float = 0.80
    mock_delay: float = 0.0

    def __post_init__(self):
        if self.provider not in ("mock", "http"):
            raise ConfigError(f"provider must be 'mock' or 'http', got {self.provider!r}")
        if self.provider == "http" and not (self.endpoint and self.model):
            raise ConfigError("provider 'http' needs endpoint and model")
        if not 0.0 <= self.cluster_cutoff <= 2.0:
            raise ConfigError(f"cluster_cutoff must lie in [0, 2], got {self.cluster_cutoff}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        if self.workers < 1 or self.retries < 0 or self.attempts < 1:
            raise ConfigError("workers and attempts must be >= 1, retries >= 0")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides: Any) -> "Config":
        values: dict[str, Any] = {}
        if path is not None:
            try:
                with open(path, "rb") as fh:
                    values = tomllib.load(fh)
            except (OSError, tomllib.TOMLDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def generator(self):
        if self.provider == "mock":
            from .mock import cooperative_responder

            return MockGenerator(seed=self.seed, responder=cooperative_responder, delay=self.mock_delay)
        return HttpGenerator(self.endpoint, self.model, self.api_key_env, self.timeout, self.attempts)

    def embedder(self) -> CachedEmbedder:
        if self.provider == "mock":
            return CachedEmbedder(MockEmbedder(seed=self.seed))
        return CachedEmbedder(
            HttpEmbedder(
                self.embedding_endpoint or self.endpoint,
                self.embedding_model or self.model,
                self.embedding_dim,
                self.api_key_env,
                self.timeout,
                self.attempts,
            )
        )

    def fingerprint(self, *keys: str) -> dict[str, Any]:
        """Settings that affect an artifact, for cache invalidation."""
        return {k: getattr(self, k) for k in keys}
