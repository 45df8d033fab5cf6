"""Text generation and embedding providers.

Two independent interfaces: a generator turns a prompt into raw model text,
an embedder turns text into a fixed-length vector. Each has a deterministic
offline mock and an HTTP client for OpenAI-compatible endpoints.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import httpx
import numpy as np

from .errors import AuthError, BadRequest, ProviderUnavailable

logger = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "PREVISIT_API_KEY"
MOCK_EMBED_DIM = 8


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    temperature: float = 0.0
    max_output: int = 4096
    stop_sequences: tuple[str, ...] | None = None

    def check(self) -> None:
        if not self.prompt or not self.prompt.strip():
            raise BadRequest("prompt is empty")
        if not (self.temperature >= 0):
            raise BadRequest(f"temperature must be >= 0, got {self.temperature}")
        if self.max_output <= 0:
            raise BadRequest(f"max_output must be positive, got {self.max_output}")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    dim: int

    def __post_init__(self):
        if len(self.values) != self.dim or self.dim <= 0:
            raise ValueError(f"embedding length {len(self.values)} != dim {self.dim}")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding has non-finite entries")

    @classmethod
    def from_array(cls, arr) -> "EmbeddingVector":
        vals = tuple(float(x) for x in np.asarray(arr, dtype=float).ravel())
        return cls(vals, len(vals))

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class Generator(Protocol):
    def generate(self, req: GenerationRequest) -> str: ...


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> EmbeddingVector: ...

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def backoff_delays(attempts: int, base: float, cap: float) -> list[float]:
    """Sleep before each retry: base, 2*base, 4*base ... capped, never decreasing."""
    return [min(base * 2**i, cap) for i in range(max(attempts - 1, 0))]


class TransientError(Exception):
    """Raised inside a provider call to request another attempt."""


def call_with_retries(
    fn: Callable[[], object],
    attempts: int,
    base_delay: float = 0.5,
    max_delay: float = 8.0,
    sleep: Callable[[float], None] = time.sleep,
):
    attempts = max(int(attempts), 1)
    delays = backoff_delays(attempts, base_delay, max_delay)
    last: Exception | None = None
    for i in range(attempts):
        try:
            return fn()
        except TransientError as exc:
            last = exc
            logger.warning("provider attempt %d/%d failed: %s", i + 1, attempts, exc)
            if i < attempts - 1:
                sleep(delays[i])
    raise ProviderUnavailable(f"giving up after {attempts} attempts: {last}", attempts=attempts)


# ---------------------------------------------------------------------------
# generation


@dataclass
class MockGenerator:
    """Offline generator; output is a pure function of (prompt, seed).

    ``canned`` maps :func:`prompt_key` hashes (or literal prompts) to fixed
    replies. Prompts without a canned reply go to ``responder``, or yield an
    empty string when there is none.
    """

    seed: int = 0
    canned: Mapping[str, str] = field(default_factory=dict)
    responder: Callable[[str, int], str] | None = None
    delay: float = 0.0
    calls: list[str] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def generate(self, req: GenerationRequest) -> str:
        req.check()
        with self._lock:
            self.calls.append(req.prompt)
        if self.delay:
            time.sleep(self.delay)
        key = prompt_key(req.prompt)
        if key in self.canned:
            return self.canned[key]
        if req.prompt in self.canned:
            return self.canned[req.prompt]
        if self.responder is None:
            return ""
        return self.responder(req.prompt, self.seed)


@dataclass
class HttpGenerator:
    """Chat-completions client for OpenAI-compatible endpoints."""

    endpoint: str
    model: str
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = 60.0
    attempts: int = 3
    base_delay: float = 0.5
    max_delay: float = 8.0
    sleep: Callable[[float], None] = time.sleep
    transport: httpx.BaseTransport | None = None

    def generate(self, req: GenerationRequest) -> str:
        req.check()
        body: dict = {
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output,
        }
        if req.stop_sequences:
            body["stop"] = list(req.stop_sequences)
        data = call_with_retries(
            lambda: _post_json(self._url("chat/completions"), body, self._headers(), self.timeout, self.transport),
            self.attempts,
            self.base_delay,
            self.max_delay,
            self.sleep,
        )
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"unexpected response shape: {exc}") from exc

    def _url(self, path: str) -> str:
        return self.endpoint.rstrip("/") + "/" + path

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env, "")
        return {"Authorization": f"Bearer {key}"} if key else {}


def _post_json(url: str, body: dict, headers: dict, timeout: float, transport=None) -> dict:
    try:
        with httpx.Client(timeout=timeout, transport=transport) as client:
            resp = client.post(url, json=body, headers=headers)
    except httpx.TransportError as exc:
        raise TransientError(f"{type(exc).__name__}: {exc}") from exc
    if resp.status_code in (401, 403):
        raise AuthError(f"credential rejected ({resp.status_code})")
    if resp.status_code == 429 or resp.status_code >= 500:
        raise TransientError(f"HTTP {resp.status_code}")
    if resp.status_code >= 400:
        raise BadRequest(f"HTTP {resp.status_code}: {resp.text[:200]}")
    return resp.json()


# ---------------------------------------------------------------------------
# embedding

_TOKEN = re.compile(r"\w+", re.UNICODE)


def _seeded_gaussian(seed: int, key: str, dim: int) -> np.ndarray:
    digest = hashlib.sha256(f"{seed}\x00{key}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:16], "little"))
    return rng.standard_normal(dim)


@dataclass
class MockEmbedder:
    """Deterministic unit-norm embeddings built from seeded token hashes.

    The vector is the normalized sum of one seeded Gaussian vector per
    lower-cased word token, so texts that share words point in similar
    directions. Text without word characters hashes as a whole.
    """

    seed: int = 0
    dim: int = MOCK_EMBED_DIM

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise BadRequest("cannot embed empty text")
        tokens = _TOKEN.findall(text.lower()) or [text]
        v = np.zeros(self.dim)
        for tok in tokens:
            v += _seeded_gaussian(self.seed, tok, self.dim)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            v = _seeded_gaussian(self.seed, "\x01" + text, self.dim)
            norm = np.linalg.norm(v)
        return EmbeddingVector.from_array(v / norm)

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        _check_texts(texts)
        return [self.embed(t) for t in texts]


@dataclass
class HttpEmbedder:
    """Client for OpenAI-compatible ``/embeddings`` endpoints."""

    endpoint: str
    model: str
    dim: int
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = 60.0
    attempts: int = 3
    base_delay: float = 0.5
    max_delay: float = 8.0
    sleep: Callable[[float], None] = time.sleep
    transport: httpx.BaseTransport | None = None

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        _check_texts(texts)
        if not texts:
            return []
        key = os.environ.get(self.api_key_env, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        body = {"model": self.model, "input": list(texts)}
        data = call_with_retries(
            lambda: _post_json(self.endpoint.rstrip("/") + "/embeddings", body, headers, self.timeout, self.transport),
            self.attempts,
            self.base_delay,
            self.max_delay,
            self.sleep,
        )
        rows = sorted(data["data"], key=lambda r: r.get("index", 0))
        out = [EmbeddingVector.from_array(r["embedding"]) for r in rows]
        if len(out) != len(texts) or any(v.dim != self.dim for v in out):
            raise ProviderUnavailable("embedding response does not match the request")
        return out


def _check_texts(texts: Sequence[str]) -> None:
    for i, t in enumerate(texts):
        if not t:
            raise BadRequest(f"cannot embed empty text (position {i})")


class CachedEmbedder:
    """Content-keyed, thread-safe cache in front of an embedder.

    Keys are the exact text; each distinct text reaches the backend at most
    once even when several threads ask for it at the same time.
    """

    def __init__(self, backend: Embedder):
        self.backend = backend
        self.dim = backend.dim
        self._cache: dict[str, EmbeddingVector] = {}
        self._pending: dict[str, threading.Event] = {}
        self._lock = threading.Lock()
        self.backend_texts = 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._cache)

    def __contains__(self, text: str) -> bool:
        with self._lock:
            return text in self._cache

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        _check_texts(texts)
        while True:
            mine: list[str] = []
            waits: list[threading.Event] = []
            with self._lock:
                for t in dict.fromkeys(texts):
                    if t in self._cache:
                        continue
                    if t in self._pending:
                        waits.append(self._pending[t])
                    else:
                        self._pending[t] = threading.Event()
                        mine.append(t)
            if mine:
                self._fill(mine)
            for ev in waits:
                ev.wait()
            with self._lock:
                if all(t in self._cache for t in texts):
                    return [self._cache[t] for t in texts]
            # another thread's batch failed; claim what is still missing

    def _fill(self, texts: list[str]) -> None:
        try:
            vecs = self.backend.embed_batch(texts)
        except BaseException:
            with self._lock:
                for t in texts:
                    self._pending.pop(t).set()
            raise
        with self._lock:
            self.backend_texts += len(texts)
            for t, v in zip(texts, vecs):
                self._cache[t] = v
                self._pending.pop(t).set()
