"""Chat-completion clients: HTTP, content-addressed cache, and a canned mock."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

log = logging.getLogger(__name__)

API_KEY_ENV = "CODEMIE_API_KEY"


class TransportError(RuntimeError):
    """The completion endpoint could not produce a response."""


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    model_name: str
    temperature: float = 0.7
    max_tokens: int = 1024
    seed: int | None = None
    # data URLs, e.g. "data:image/jpeg;base64,..."
    images: tuple[str, ...] = ()
    # job label such as "attr/<doc>/PER/run1"; part of the cache key, never sent
    tag: str = ""

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def payload(self) -> dict:
        if self.images:
            content = [{"type": "text", "text": self.prompt}]
            content += [{"type": "image_url", "image_url": {"url": url}} for url in self.images]
        else:
            content = self.prompt
        body = {
            "model": self.model_name,
            "messages": [{"role": "user", "content": content}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        if self.seed is not None:
            body["seed"] = self.seed
        return body

    def key(self) -> str:
        blob = json.dumps({"payload": self.payload(), "tag": self.tag}, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class CompletionClient(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...


class HttpChatClient:
    """Blocking client for the common ``/chat/completions`` JSON shape.

    Retries transport failures, 429 and 5xx responses with exponential
    backoff. The request hash goes out as ``Idempotency-Key``.
    """

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        *,
        attempts: int = 3,
        backoff: float = 1.0,
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.attempts = attempts
        self.backoff = backoff
        self.sleep = sleep
        self._http = httpx.Client(timeout=timeout, transport=transport)

    def close(self):
        self._http.close()

    def complete(self, request: CompletionRequest) -> str:
        headers = {"Idempotency-Key": request.key()}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error = "no attempt made"
        for attempt in range(self.attempts):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._http.post(self.endpoint, json=request.payload(), headers=headers)
            except httpx.HTTPError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed completion response: {exc}") from exc
        raise TransportError(f"{request.tag or 'request'} failed after {self.attempts} attempts ({last_error})")


class CachingClient:
    """Wraps a client with ``<cache_dir>/<sha256(request)>.json`` files.

    Writes go through a temp file and ``os.replace`` so concurrent readers
    never see partial files.
    """

    def __init__(self, inner: CompletionClient, cache_dir: str | Path):
        self.inner = inner
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock_for(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    def path_for(self, request: CompletionRequest) -> Path:
        return self.cache_dir / f"{request.key()}.json"

    def complete(self, request: CompletionRequest) -> str:
        path = self.path_for(request)
        with self._lock_for(path.stem):
            if path.exists():
                with self._guard:
                    self.hits += 1
                return json.loads(path.read_text(encoding="utf-8"))["response"]
            with self._guard:
                self.misses += 1
            response = self.inner.complete(request)
            record = {"request": request.payload(), "tag": request.tag, "response": response}
            fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(record, fh, ensure_ascii=False, sort_keys=True)
            os.replace(tmp, path)
            return response


@dataclass
class MockClient:
    """Answers from a ``tag -> response`` table; unknown tags get ``default``."""

    responses: Mapping[str, str] = field(default_factory=dict)
    default: str = ""
    calls: list[CompletionRequest] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> str:
        with self._lock:
            self.calls.append(request)
        return self.responses.get(request.tag, self.default)

    @classmethod
    def from_file(cls, path: str | Path) -> MockClient:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(data.get("responses", {}), data.get("default", ""))
