"""Model-provider gateway: registry, routing, failover, caching and the mock."""

from .core import RETRIES_PER_PROVIDER, Gateway, Provider, RequestLogEntry, make_provider
from .mock import (
    MockProvider,
    Matcher,
    ProviderSpec,
    ScriptedResponse,
    mock_generate,
    split_segments,
    stable_digest,
)
from .registry import DEFAULT_PROVIDERS, gateway_from_env, load_registry, spec_from_doc
from .request import FREEFORM_KINDS, KINDS, GenerationRequest, GenerationResponse, cache_key

__all__ = [
    "DEFAULT_PROVIDERS",
    "FREEFORM_KINDS",
    "KINDS",
    "RETRIES_PER_PROVIDER",
    "Gateway",
    "GenerationRequest",
    "GenerationResponse",
    "Matcher",
    "MockProvider",
    "Provider",
    "ProviderSpec",
    "RequestLogEntry",
    "ScriptedResponse",
    "cache_key",
    "gateway_from_env",
    "load_registry",
    "make_provider",
    "mock_generate",
    "spec_from_doc",
    "split_segments",
    "stable_digest",
]
