"""The dagify compiler: compose, refine, resolve and compile."""

from .compose import compose, parse_plan, refine, slugify, suggest_note
from .manifest import (
    MANIFEST_VERSION,
    CompileManifest,
    build_manifest,
    compile_graph,
    is_manifest_doc,
    manifest_from_doc,
    parse_manifest,
    render_manifest,
    tool_requirements,
)
from .prompts import build_prompt, referenced_ids
from .resolve import MAX_PASSES, STEPS, Resolver, ResolverStep, StepOutcome, resolve

__all__ = [
    "MANIFEST_VERSION",
    "MAX_PASSES",
    "STEPS",
    "CompileManifest",
    "Resolver",
    "ResolverStep",
    "StepOutcome",
    "build_manifest",
    "build_prompt",
    "compile_graph",
    "compose",
    "is_manifest_doc",
    "manifest_from_doc",
    "parse_manifest",
    "parse_plan",
    "referenced_ids",
    "refine",
    "render_manifest",
    "resolve",
    "slugify",
    "suggest_note",
    "tool_requirements",
]
