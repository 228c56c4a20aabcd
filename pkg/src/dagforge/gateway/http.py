"""Generic JSON-over-HTTP provider adapter (opt-in via the registry file)."""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from typing import Any

from ..errors import ProviderError
from .mock import ProviderSpec
from .request import GenerationRequest


class HttpProvider:
    """POSTs ``{prompt, schema, seed}`` and expects ``{"payload": ...}`` back."""

    def __init__(self, spec: ProviderSpec) -> None:
        if not spec.url:
            raise ValueError(f"http provider {spec.id!r} needs a url")
        self.spec = spec

    def invoke(self, req: GenerationRequest) -> Any:
        body = json.dumps(
            {"kind": req.kind, "prompt": req.prompt, "schema": req.schema_doc(), "seed": req.seed}
        ).encode("utf-8")
        request = urllib.request.Request(
            self.spec.url, data=body, headers={"Content-Type": "application/json"}, method="POST"
        )
        try:
            with urllib.request.urlopen(request, timeout=self.spec.timeout) as resp:
                doc = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ProviderError(f"{self.spec.id}: {exc}") from None
        if not isinstance(doc, dict) or "payload" not in doc:
            raise ProviderError(f"{self.spec.id}: response lacks 'payload'")
        return doc["payload"]
