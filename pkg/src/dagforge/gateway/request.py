from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any

from ..graph.io import canonical_json
from ..schema import SchemaNode, schema_to_doc

# Kinds whose payload is free text; every other kind carries a schema.
FREEFORM_KINDS = frozenset({"compose", "execute_text"})
STRUCTURED_KINDS = frozenset(
    {
        "refine_suggest",
        "resolve_typed",
        "resolve_spec",
        "resolve_stub",
        "synthesize_body",
        "predict_inputs",
        "fill_group",
    }
)
KINDS = FREEFORM_KINDS | STRUCTURED_KINDS


@dataclass(frozen=True)
class GenerationRequest:
    kind: str
    prompt: str
    schema: SchemaNode | None = None
    seed: int = 0
    intelligence: int = 5

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown request kind {self.kind!r}")
        if (self.schema is None) != (self.kind in FREEFORM_KINDS):
            want = "no schema" if self.kind in FREEFORM_KINDS else "a schema"
            raise ValueError(f"{self.kind} requests take {want}")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        if not 1 <= self.intelligence <= 10:
            raise ValueError(f"intelligence {self.intelligence} outside 1..10")

    def schema_doc(self) -> dict | None:
        return None if self.schema is None else schema_to_doc(self.schema)


def cache_key(req: GenerationRequest) -> str:
    material = {
        "kind": req.kind,
        "prompt": req.prompt,
        "schema": req.schema_doc(),
        "seed": req.seed,
        "intelligence": req.intelligence,
    }
    return hashlib.sha256(canonical_json(material).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GenerationResponse:
    provider_id: str
    payload: Any
    from_cache: bool
    attempt_count: int
