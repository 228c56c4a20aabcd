"""Natural language -> TEXT graph, and context-only refinement."""

from __future__ import annotations

import dataclasses
import json
import re
from typing import Any, Iterable

from ..errors import CompileError, GraphError
from ..gateway import Gateway, GenerationRequest
from ..graph import Edge, Node, ResolutionState, TypeFloor, WorkflowGraph, validate_graph
from ..schema import obj, scalar

NAME_LIMIT = 40


def slugify(text: str, limit: int = NAME_LIMIT) -> str:
    slug = re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_")[:limit].rstrip("_")
    if not slug:
        slug = "step"
    if slug[0].isdigit():
        slug = "n_" + slug
    return slug


def unique_ids(texts: Iterable[str], taken: Iterable[str] = ()) -> list[str]:
    used = set(taken)
    out = []
    for text in texts:
        base = slugify(text)
        candidate, k = base, 2
        while candidate in used:
            candidate, k = f"{base}_{k}", k + 1
        used.add(candidate)
        out.append(candidate)
    return out


def short_name(text: str, limit: int = NAME_LIMIT) -> str:
    text = " ".join(text.split())
    return text if len(text) <= limit else text[: limit - 1].rstrip() + "…"


def parse_plan(payload: Any) -> tuple[list[str], list[tuple[int, int]]]:
    """Read a compose payload into segment descriptions and index edges.

    Accepts the JSON plan ``{"nodes": [{"description": ...}], "edges": [[i, j]]}``;
    anything else is read as one segment per non-empty line, chained.
    """
    doc = None
    if isinstance(payload, str):
        try:
            doc = json.loads(payload)
        except ValueError:
            doc = None
    elif isinstance(payload, dict):
        doc = payload
    if isinstance(doc, dict) and isinstance(doc.get("nodes"), list):
        descs = []
        for item in doc["nodes"]:
            desc = item.get("description") if isinstance(item, dict) else item
            descs.append(" ".join(str(desc or "").split()))
        edges = []
        for pair in doc.get("edges") or []:
            if not (isinstance(pair, (list, tuple)) and len(pair) == 2 and all(isinstance(i, int) for i in pair)):
                raise CompileError(f"malformed plan edge {pair!r}")
            i, j = pair
            if not (0 <= i < len(descs) and 0 <= j < len(descs)) or i == j:
                raise CompileError(f"plan edge {pair!r} out of range")
            edges.append((i, j))
        return descs, edges
    lines = [ln.strip() for ln in str(payload).splitlines() if ln.strip()]
    return lines, [(i, i + 1) for i in range(len(lines) - 1)]


def text_nodes(descs: list[str], taken: Iterable[str] = (), context: tuple[str, ...] = ()) -> list[Node]:
    ids = unique_ids(descs, taken)
    return [
        Node(id=i, name=short_name(d), floor=TypeFloor.TEXT, state=ResolutionState.UNRESOLVED, description=d, context=context)
        for i, d in zip(ids, descs)
    ]


def compose(
    nl: str,
    gateway: Gateway,
    target: TypeFloor = TypeFloor.TEXT,
    seed: int = 0,
    intelligence: int = 5,
    **resolve_kw,
) -> WorkflowGraph:
    """Issue one ``compose`` request and build a TEXT graph from the plan."""
    text = nl.strip()
    if not text:
        raise CompileError("compose needs non-empty text")
    payload = gateway.generate(GenerationRequest("compose", text, None, seed, intelligence)).payload
    descs, pairs = parse_plan(payload)
    if not descs or not any(descs):
        raise CompileError("compose produced zero segments")
    nodes = text_nodes(descs)
    edges = tuple(Edge(nodes[i].id, nodes[j].id) for i, j in pairs)
    graph = WorkflowGraph(tuple(nodes), edges, name=short_name(text, 80))
    report = validate_graph(graph)
    if not report.ok:
        raise CompileError("composed graph is invalid: " + "; ".join(str(d) for d in report.errors[:3]))
    if target > TypeFloor.TEXT:
        from .resolve import resolve

        graph = resolve(graph, target, gateway, seed=seed, intelligence=intelligence, **resolve_kw)
    return graph


def refine(graph: WorkflowGraph, node_id: str | None, note: str) -> WorkflowGraph:
    """Append ``note`` to one node's context (or every node's); nothing else changes."""
    note = note.strip()
    if not note:
        raise CompileError("refine needs a non-empty note")
    if node_id is not None and not graph.has_node(node_id):
        raise GraphError(f"unknown node id {node_id!r}")
    nodes = tuple(
        dataclasses.replace(n, context=n.context + (note,)) if node_id is None or n.id == node_id else n
        for n in graph.nodes
    )
    return WorkflowGraph(nodes, graph.edges, graph.name, graph.version)


def suggest_note(graph: WorkflowGraph, node_id: str, gateway: Gateway, seed: int = 0, intelligence: int = 5) -> str:
    """Ask the provider for a context note for one node (``refine_suggest``)."""
    from ..graph import neighborhood
    from .prompts import build_prompt

    prompt = build_prompt("Suggest one short clarifying note for the target node.", neighborhood(graph, node_id))
    req = GenerationRequest("refine_suggest", prompt, obj({"note": scalar("str")}), seed, intelligence)
    return str(gateway.generate(req).payload["note"])
