"""Deterministic offline stand-in for a model provider.

Every payload is a pure function of ``(seed, prompt, schema, kind)``. The
stable hash is SHA-256 over ``"{seed}\\x1f{prompt}\\x1f{canonical schema json}"``;
its first 8 bytes (big-endian) give the digest ``d``. Structured fills draw
successive values from the stream ``d_0 = d``, ``d_{i+1}`` = first 8 bytes of
``sha256(d_i as 8 big-endian bytes)``, visiting object fields in sorted order.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass
from typing import Any

from ..errors import ProviderError
from ..graph.io import canonical_json
from ..graph.model import zero_value
from ..schema import SchemaNode
from .request import GenerationRequest

BASE32 = "abcdefghijklmnopqrstuvwxyz234567"
_ARROW_RE = re.compile(r"\s*(?:→|->)\s*")
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")
_SIGNATURE_RE = re.compile(r"^signature:\s*\((.*)\)\s*->\s*\((.*)\)\s*$", re.MULTILINE)


@dataclass(frozen=True)
class Matcher:
    """Matches requests whose prompt contains ``match`` (empty matches all)."""

    match: str = ""
    kind: str | None = None
    times: int | None = None

    def matches(self, req: GenerationRequest) -> bool:
        return (self.kind is None or self.kind == req.kind) and self.match in req.prompt


@dataclass(frozen=True)
class ScriptedResponse(Matcher):
    payload: Any = None


@dataclass(frozen=True)
class ProviderSpec:
    id: str
    tier: int = 5
    kind: str = "mock"
    simulated_latency: float | None = None
    failure_script: tuple[Matcher, ...] = ()
    responses: tuple[ScriptedResponse, ...] = ()
    max_in_flight: int | None = None
    url: str | None = None
    timeout: float = 30.0

    def __post_init__(self) -> None:
        if not 1 <= self.tier <= 10:
            raise ValueError(f"provider {self.id!r}: tier {self.tier} outside 1..10")
        if not self.id:
            raise ValueError("provider id must be non-empty")


# -- the pure rule -------------------------------------------------------------

def stable_digest(req: GenerationRequest) -> int:
    schema = canonical_json(req.schema_doc())
    raw = f"{req.seed}\x1f{req.prompt}\x1f{schema}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(raw).digest()[:8], "big")


class DigestStream:
    def __init__(self, d: int) -> None:
        self.current = d

    def next(self) -> int:
        value = self.current
        self.current = int.from_bytes(hashlib.sha256(value.to_bytes(8, "big")).digest()[:8], "big")
        return value


def token(d: int) -> str:
    return "".join(BASE32[(d >> (5 * i)) & 31] for i in range(8))


def scalar_from(kind: str, d: int) -> Any:
    if kind == "str":
        return token(d)
    if kind == "int":
        return d % 1000
    if kind == "float":
        return (d % 10000) / 100
    if kind == "bool":
        return d % 2 == 1
    raise ValueError(kind)


def fill_value(schema: SchemaNode, stream: DigestStream) -> Any:
    if schema.is_scalar:
        return scalar_from(schema.kind, stream.next())
    if schema.kind == "list":
        length = stream.next() % 3 + 1
        return [fill_value(schema.element, stream) for _ in range(length)]
    return {name: fill_value(sub, stream) for name, sub in sorted(schema.fields)}


def split_segments(text: str) -> list[str]:
    if _ARROW_RE.search(text):
        parts = _ARROW_RE.split(text)
    else:
        parts = _SENTENCE_RE.split(text)
    return [p.strip() for p in parts if p.strip()]


def _parse_params(text: str) -> list[tuple[str, str]]:
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        name, _, t = part.partition(":")
        out.append((name.strip(), t.strip()))
    return out


def _literal(type_name_: str) -> str:
    zero = zero_value(type_name_)
    if isinstance(zero, bool):
        return "false"
    if isinstance(zero, str):
        return '""'
    if isinstance(zero, list):
        return "[]"
    return repr(zero)


def synthesize_body_text(prompt: str) -> str | None:
    """Body returning each output from the first like-typed input, else the zero value."""
    m = _SIGNATURE_RE.search(prompt)
    if m is None:
        return None
    inputs = _parse_params(m.group(1))
    lines = []
    for name, t in _parse_params(m.group(2)):
        source = next((i for i, it in inputs if it == t), None)
        lines.append(f"out.{name} = {source if source else _literal(t)};")
    return "\n".join(lines)


def mock_generate(req: GenerationRequest) -> Any:
    """The unscripted mock payload for ``req``."""
    if req.kind == "compose":
        segments = split_segments(req.prompt)
        return json.dumps(
            {
                "nodes": [{"description": s} for s in segments],
                "edges": [[i, i + 1] for i in range(len(segments) - 1)],
            },
            ensure_ascii=False,
        )
    stream = DigestStream(stable_digest(req))
    if req.kind == "execute_text":
        return " ".join(token(stream.next()) for _ in range(3))
    if req.kind == "synthesize_body" and req.schema is not None and req.schema.field_names == ["body"]:
        body = synthesize_body_text(req.prompt)
        if body is not None:
            return {"body": body}
    return fill_value(req.schema, stream)


# -- the stateful provider ----------------------------------------------------------

class MockProvider:
    def __init__(self, spec: ProviderSpec) -> None:
        self.spec = spec
        self.invocations = 0
        self._lock = threading.Lock()
        self._uses: dict[int, int] = {}
        self._slots = threading.BoundedSemaphore(spec.max_in_flight) if spec.max_in_flight else None

    def _consume(self, index: int, rule: Matcher) -> bool:
        if rule.times is None:
            return True
        used = self._uses.get(index, 0)
        if used >= rule.times:
            return False
        self._uses[index] = used + 1
        return True

    def invoke(self, req: GenerationRequest) -> Any:
        if self._slots:
            with self._slots:
                return self._invoke(req)
        return self._invoke(req)

    def _invoke(self, req: GenerationRequest) -> Any:
        with self._lock:
            self.invocations += 1
        if self.spec.simulated_latency:
            time.sleep(self.spec.simulated_latency)
        with self._lock:
            for i, rule in enumerate(self.spec.failure_script):
                if rule.matches(req) and self._consume(i, rule):
                    raise ProviderError(f"scripted failure ({rule.match or '*'})")
            offset = len(self.spec.failure_script)
            for i, resp in enumerate(self.spec.responses):
                if resp.matches(req) and self._consume(offset + i, resp):
                    payload = resp.payload
                    return json.loads(json.dumps(payload))
        return mock_generate(req)

