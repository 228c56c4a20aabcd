"""Compiling resolved graphs into self-contained, hash-stamped manifests."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..errors import CompileError, GraphError, ResolutionIncomplete
from ..expr import parse_program, references
from ..gateway import Gateway
from ..graph import TypeFloor, WorkflowGraph, graph_floor, topo_layers, validate_graph
from ..graph.io import digest, dump_yaml, graph_from_doc, graph_to_doc, load_text
from .resolve import PromptObserver, resolve

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1


def tool_requirements(graph: WorkflowGraph) -> list[str]:
    tools: set[str] = set()
    for n in graph.nodes:
        if n.body is not None:
            tools |= references(parse_program(n.body))["tool"]
    return sorted(tools)


@dataclass(frozen=True)
class CompileManifest:
    graph: WorkflowGraph
    schedule: tuple[tuple[str, ...], ...]
    tools: tuple[str, ...]
    floor: TypeFloor
    content_hash: str
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def body_doc(self) -> dict:
        return {
            "manifest_version": MANIFEST_VERSION,
            "graph": graph_to_doc(self.graph),
            "schedule": [list(layer) for layer in self.schedule],
            "tools": list(self.tools),
            "floor": self.floor.label,
        }

    def to_doc(self) -> dict:
        doc = self.body_doc()
        doc["content_hash"] = self.content_hash
        return doc


def build_manifest(graph: WorkflowGraph, warnings: tuple[str, ...] = ()) -> CompileManifest:
    report = validate_graph(graph)
    if not report.ok:
        raise CompileError("cannot compile an invalid graph: " + "; ".join(str(d) for d in report.errors[:3]))
    floor = graph_floor(graph)
    if floor < TypeFloor.SHIM:
        low = sorted(n.id for n in graph.nodes if n.floor < TypeFloor.SHIM)
        raise CompileError(f"graph floor {floor.label} is below shim; unresolved: {', '.join(low)}")
    schedule = tuple(tuple(layer) for layer in topo_layers(graph))
    draft = CompileManifest(graph, schedule, tuple(tool_requirements(graph)), floor, "", warnings)
    return CompileManifest(graph, schedule, draft.tools, floor, digest(draft.body_doc()), warnings)


def compile_graph(
    graph: WorkflowGraph,
    gateway: Gateway | None = None,
    target: TypeFloor | None = None,
    seed: int = 0,
    intelligence: int = 5,
    on_prompt: PromptObserver | None = None,
) -> CompileManifest:
    """Compile ``graph``; with ``target`` first resolve it up to that floor.

    If a PURE target is missed only because nodes stay at SHIM (virtualized
    logic the provider could not make pure), a shim manifest is produced with
    a warning instead of failing.
    """
    warnings: list[str] = []
    if target is not None and target < TypeFloor.SHIM:
        raise CompileError(f"compile target must be shim or pure, got {target.label}")
    if target is not None and graph_floor(graph) < target:
        if gateway is None:
            raise CompileError("resolving before compile needs a provider gateway")
        try:
            graph = resolve(graph, target, gateway, seed=seed, intelligence=intelligence, on_prompt=on_prompt)
        except ResolutionIncomplete as exc:
            stuck = [exc.graph.node(i) for i in exc.unresolved]
            if target == TypeFloor.PURE and all(n.floor >= TypeFloor.SHIM for n in stuck):
                graph = exc.graph
                msg = "nodes remain at shim (virtualized): " + ", ".join(n.id for n in stuck)
                warnings.append(msg)
                log.warning(msg)
            else:
                raise
    return build_manifest(graph, tuple(warnings))


def render_manifest(manifest: CompileManifest) -> str:
    return dump_yaml(manifest.to_doc())


def is_manifest_doc(doc) -> bool:
    return isinstance(doc, dict) and "manifest_version" in doc


def manifest_from_doc(doc) -> CompileManifest:
    if not is_manifest_doc(doc):
        raise GraphError("not a manifest document (missing manifest_version)")
    if doc["manifest_version"] != MANIFEST_VERSION:
        raise GraphError(f"unsupported manifest_version {doc['manifest_version']!r}")
    for key in ("graph", "schedule", "tools", "floor", "content_hash"):
        if key not in doc:
            raise GraphError(f"manifest is missing {key!r}")
    graph = graph_from_doc(doc["graph"])
    rebuilt = build_manifest(graph)
    if [list(layer) for layer in rebuilt.schedule] != doc["schedule"]:
        raise GraphError("manifest schedule does not match its graph")
    if list(rebuilt.tools) != list(doc["tools"]) or rebuilt.floor.label != doc["floor"]:
        raise GraphError("manifest tools/floor do not match its graph")
    if rebuilt.content_hash != doc["content_hash"]:
        raise GraphError(f"manifest content hash mismatch (recorded {doc['content_hash']}, computed {rebuilt.content_hash})")
    return rebuilt


def parse_manifest(text: str, fmt: str = "yaml") -> CompileManifest:
    return manifest_from_doc(load_text(text, fmt))
