"""Provider registry, tier routing, failover and the seed-deterministic cache."""

from __future__ import annotations

import copy
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Protocol

from ..errors import AllProvidersFailed, ProviderError, SchemaValidationError
from ..schema import validate_instance
from .mock import MockProvider, ProviderSpec
from .request import GenerationRequest, GenerationResponse, cache_key

log = logging.getLogger(__name__)

RETRIES_PER_PROVIDER = 2


class Provider(Protocol):
    spec: ProviderSpec

    def invoke(self, req: GenerationRequest) -> Any: ...


@dataclass(frozen=True)
class RequestLogEntry:
    key: str
    kind: str
    seed: int
    started: float
    finished: float
    from_cache: bool
    provider_id: str | None


def _validate_payload(req: GenerationRequest, payload: Any) -> list[str]:
    if req.schema is None:
        return [] if isinstance(payload, str) else [f"expected text payload, got {type(payload).__name__}"]
    return validate_instance(req.schema, payload)


class Gateway:
    """Single entry point for every model call.

    ``invocations`` counts real provider calls (including failed attempts);
    ``requests`` counts every ``generate`` call, cached or not.
    """

    def __init__(self, providers: list[ProviderSpec | Provider] = (), cache_dir: str | Path | None = None,
                 retries: int = RETRIES_PER_PROVIDER) -> None:
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.retries = retries
        self._providers: dict[str, Provider] = {}
        self._memory: dict[str, tuple[str, Any]] = {}
        self._inflight: dict[str, threading.Event] = {}
        self._lock = threading.Lock()
        self.invocations = 0
        self.requests = 0
        self.request_log: list[RequestLogEntry] = []
        self.listeners: list[Callable[[GenerationRequest], None]] = []
        for p in providers:
            self.register_provider(p)

    # -- registry ----------------------------------------------------------------

    def register_provider(self, spec: ProviderSpec | Provider) -> Provider:
        provider = make_provider(spec) if isinstance(spec, ProviderSpec) else spec
        pid = provider.spec.id
        with self._lock:
            if pid in self._providers:
                raise ValueError(f"provider {pid!r} already registered")
            self._providers[pid] = provider
        return provider

    def provider(self, pid: str) -> Provider:
        return self._providers[pid]

    def __len__(self) -> int:
        return len(self._providers)

    def route(self, req: GenerationRequest) -> list[str]:
        if not self._providers:
            raise ProviderError("no providers registered")
        specs = [p.spec for p in self._providers.values()]
        able = sorted((s for s in specs if s.tier >= req.intelligence), key=lambda s: (s.tier, s.id))
        rest = sorted((s for s in specs if s.tier < req.intelligence), key=lambda s: (-s.tier, s.id))
        return [s.id for s in able + rest]

    # -- cache ---------------------------------------------------------------------

    def _disk_path(self, key: str) -> Path | None:
        return None if self.cache_dir is None else self.cache_dir / key[:2] / key

    def _cache_get(self, key: str) -> tuple[str, Any] | None:
        with self._lock:
            hit = self._memory.get(key)
        if hit is not None:
            return hit
        path = self._disk_path(key)
        if path is None or not path.is_file():
            return None
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            hit = (doc["provider_id"], doc["payload"])
        except (OSError, ValueError, KeyError):
            log.warning("ignoring unreadable cache entry %s", path)
            return None
        with self._lock:
            self._memory[key] = hit
        return hit

    def _cache_put(self, key: str, provider_id: str, payload: Any) -> None:
        with self._lock:
            self._memory[key] = (provider_id, payload)
        path = self._disk_path(key)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump({"provider_id": provider_id, "payload": payload}, fh, sort_keys=True)
        os.replace(tmp, path)

    # -- generation ------------------------------------------------------------

    def generate(self, req: GenerationRequest) -> GenerationResponse:
        key = cache_key(req)
        started = time.monotonic()
        with self._lock:
            self.requests += 1
        for listener in list(self.listeners):
            listener(req)
        while True:
            hit = self._cache_get(key)
            if hit is not None:
                self._log(key, req, started, True, hit[0])
                return GenerationResponse(hit[0], copy.deepcopy(hit[1]), True, 0)
            with self._lock:
                event = self._inflight.get(key)
                leader = event is None
                if leader:
                    event = self._inflight[key] = threading.Event()
            if leader:
                break
            # another caller is generating this key; it either fills the cache or fails
            event.wait()
        try:
            response = self._generate_uncached(req, key)
        finally:
            with self._lock:
                self._inflight.pop(key, None)
            event.set()
        self._log(key, req, started, False, response.provider_id)
        return response

    def _generate_uncached(self, req: GenerationRequest, key: str) -> GenerationResponse:
        causes: list[tuple[str, str]] = []
        schema_only = True
        attempts = 0
        for pid in self.route(req):
            provider = self._providers[pid]
            for _ in range(1 + self.retries):
                attempts += 1
                with self._lock:
                    self.invocations += 1
                try:
                    payload = provider.invoke(req)
                except ProviderError as exc:
                    causes.append((pid, str(exc)))
                    schema_only = False
                    continue
                except Exception as exc:  # adapters may raise anything; treat as a failed attempt
                    causes.append((pid, f"{type(exc).__name__}: {exc}"))
                    schema_only = False
                    continue
                problems = _validate_payload(req, payload)
                if problems:
                    causes.append((pid, "schema: " + "; ".join(problems[:3])))
                    continue
                self._cache_put(key, pid, payload)
                return GenerationResponse(pid, copy.deepcopy(payload), False, attempts)
            log.info("provider %s exhausted for %s request; failing over", pid, req.kind)
        if schema_only and causes:
            raise SchemaValidationError(f"{req.kind}: no provider produced a schema-valid payload", causes)
        raise AllProvidersFailed(causes)

    def _log(self, key: str, req: GenerationRequest, started: float, cached: bool, pid: str | None) -> None:
        entry = RequestLogEntry(key, req.kind, req.seed, started, time.monotonic(), cached, pid)
        with self._lock:
            self.request_log.append(entry)


def make_provider(spec: ProviderSpec) -> Provider:
    if spec.kind == "mock":
        return MockProvider(spec)
    if spec.kind == "http":
        from .http import HttpProvider

        return HttpProvider(spec)
    raise ValueError(f"unknown provider kind {spec.kind!r}")
