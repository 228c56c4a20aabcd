"""Loading provider registries from yaml and building the default gateway."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any

import yaml

from .core import Gateway
from .mock import Matcher, ProviderSpec, ScriptedResponse

DEFAULT_PROVIDERS = (
    ProviderSpec(id="mock-small", tier=3),
    ProviderSpec(id="mock-large", tier=9),
)


def _matchers(items: Any, cls, where: str) -> tuple:
    out = []
    for item in items or ():
        if isinstance(item, str):
            item = {"match": item}
        if not isinstance(item, dict):
            raise ValueError(f"{where}: matcher must be a mapping or string")
        kwargs = {"match": str(item.get("match", "")), "kind": item.get("kind"), "times": item.get("times")}
        if cls is ScriptedResponse:
            kwargs["payload"] = item.get("payload")
        out.append(cls(**kwargs))
    return tuple(out)


def spec_from_doc(doc: Any) -> ProviderSpec:
    if not isinstance(doc, dict) or "id" not in doc:
        raise ValueError(f"provider entry needs an 'id': {doc!r}")
    pid = str(doc["id"])
    return ProviderSpec(
        id=pid,
        tier=int(doc.get("tier", 5)),
        kind=str(doc.get("kind", "mock")),
        simulated_latency=doc.get("simulated_latency"),
        failure_script=_matchers(doc.get("failure_script"), Matcher, pid),
        responses=_matchers(doc.get("responses"), ScriptedResponse, pid),
        max_in_flight=doc.get("max_in_flight"),
        url=doc.get("url"),
        timeout=float(doc.get("timeout", 30.0)),
    )


def load_registry(path: str | Path) -> list[ProviderSpec]:
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, dict):
        doc = doc.get("providers")
    if not isinstance(doc, list) or not doc:
        raise ValueError(f"{path}: provider registry must be a non-empty list")
    specs = [spec_from_doc(d) for d in doc]
    ids = [s.id for s in specs]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ValueError(f"{path}: duplicate provider id(s) {', '.join(dupes)}")
    return specs


def gateway_from_env(workspace: str | Path, env: dict[str, str] | None = None) -> Gateway:
    """Gateway over ``$DAGFORGE_PROVIDERS`` (or two default mocks), cached under the workspace."""
    env = os.environ if env is None else env
    path = env.get("DAGFORGE_PROVIDERS")
    specs = load_registry(path) if path else list(DEFAULT_PROVIDERS)
    return Gateway(specs, cache_dir=Path(workspace) / "cache" / "providers")
