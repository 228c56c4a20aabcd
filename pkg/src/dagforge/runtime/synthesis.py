"""On-demand synthesis of virtual-function bodies, cached and single-flight."""

from __future__ import annotations

import hashlib
import logging
import threading
from concurrent.futures import Future
from typing import Callable

from ..errors import ExprError, SchemaValidationError, SynthesisError
from ..expr import check_program, parse_program, references
from ..gateway import GenerationRequest
from ..graph import Node, VirtualCall, WorkflowGraph
from ..graph.io import canonical_json, digest, node_to_doc
from ..schema import obj, scalar

log = logging.getLogger(__name__)

REASKS = 2


def upstream_digest(graph: WorkflowGraph, node: Node) -> str:
    """Digest of the node's definition and its direct upstream definitions.

    Runtime values are deliberately excluded so every JIT mode (including a
    prefine pass that runs before any value exists) maps to the same key.
    """
    ups = [node_to_doc(graph.node(p)) for p in sorted(graph.predecessors(node.id))]
    return digest({"node": node_to_doc(node), "upstream": ups})


def synthesis_key(node_id: str, call: VirtualCall, context_digest: str) -> str:
    material = canonical_json([node_id, call.name, call.signature(), context_digest])
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


def synthesis_prompt(graph: WorkflowGraph, node: Node, call: VirtualCall, attempt: int) -> str:
    lines = [
        f"Task: implement virtual function {call.name} used by the target node.",
        f"[node {node.id}] floor={node.floor.label}",
        f"  description: {node.description}",
    ]
    lines += [f"  note: {c}" for c in node.context]
    for p in sorted(graph.predecessors(node.id)):
        up = graph.node(p)
        lines.append(f"[node {up.id}] role=upstream description: {up.description}")
    lines.append("Assign the return value to out.result.")
    lines.append(f"signature: {call.signature()}")
    if attempt:
        lines.append(f"(re-ask {attempt}: previous body did not type-check against the signature)")
    return "\n".join(lines)


def check_virtual_body(body: str, call: VirtualCall) -> None:
    program = parse_program(body)
    if references(program)["virtual"]:
        raise ExprError("virtual body may not call other virtual functions")
    check_program(program, {p.name: p.type for p in call.inputs}, {"result": call.output}, {}, allow_stub=False)


class SynthesisCache:
    """Key -> body, with single-flight futures; safe for concurrent use."""

    def __init__(self) -> None:
        self._entries: dict[str, Future] = {}
        self._lock = threading.Lock()
        self.misses = 0

    def get_or_create(self, key: str, factory: Callable[[], str], keep_failures: bool = True) -> str:
        with self._lock:
            fut = self._entries.get(key)
            owner = fut is None
            if owner:
                fut = self._entries[key] = Future()
                self.misses += 1
        if owner:
            try:
                fut.set_result(factory())
            except BaseException as exc:
                fut.set_exception(exc)
                if not keep_failures:
                    with self._lock:
                        self._entries.pop(key, None)
        return fut.result()

    def discard(self, key: str) -> None:
        with self._lock:
            fut = self._entries.get(key)
            if fut is not None and fut.done() and fut.exception() is not None:
                del self._entries[key]

    def __contains__(self, key: str) -> bool:
        with self._lock:
            fut = self._entries.get(key)
        return fut is not None and fut.done() and fut.exception() is None

    def __len__(self) -> int:
        return len(self._entries)


def synthesize_virtual(graph: WorkflowGraph, node: Node, call: VirtualCall, generate, cache: SynthesisCache,
                       seed: int, intelligence: int, keep_failures: bool = True) -> str:
    """Return a type-checked body for ``call``; on a miss, one request plus up to two re-asks."""
    key = synthesis_key(node.id, call, upstream_digest(graph, node))

    def produce() -> str:
        problems: list[str] = []
        for attempt in range(1 + REASKS):
            req = GenerationRequest(
                "synthesize_body",
                synthesis_prompt(graph, node, call, attempt),
                obj({"body": scalar("str")}),
                seed,
                intelligence,
            )
            try:
                body = str(generate(req).payload["body"])
                check_virtual_body(body, call)
                return body
            except (ExprError, SchemaValidationError) as exc:
                problems.append(str(exc))
                log.info("synthesis of %s.%s rejected (attempt %d): %s", node.id, call.name, attempt, exc)
        raise SynthesisError(
            f"could not synthesize {node.id}.{call.name} {call.signature()}: " + "; ".join(problems[-2:])
        )

    return cache.get_or_create(key, produce, keep_failures)
