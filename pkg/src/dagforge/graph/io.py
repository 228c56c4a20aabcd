"""Graph documents: yaml/json parsing, rendering, and the canonical form."""

from __future__ import annotations

import hashlib
import json
from typing import Any

import yaml

from ..errors import GraphParseError, GraphValidationError
from .model import (
    Contract,
    EffectClass,
    Edge,
    Node,
    PortSpec,
    ResolutionState,
    TypeFloor,
    VirtualCall,
    VirtualKind,
    WorkflowGraph,
    default_state,
    parse_type,
)
from .ops import topo_layers, validate_graph

FORMAT_VERSION = 1


class _Dumper(yaml.SafeDumper):
    pass


def _str_presenter(dumper: yaml.SafeDumper, data: str):
    style = "|" if "\n" in data else None
    return dumper.represent_scalar("tag:yaml.org,2002:str", data, style=style)


_Dumper.add_representer(str, _str_presenter)


def dump_yaml(doc: Any, sort_keys: bool = False) -> str:
    return yaml.dump(doc, Dumper=_Dumper, sort_keys=sort_keys, allow_unicode=True, default_flow_style=False)


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest(doc: Any) -> str:
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


def load_text(text: str, fmt: str = "yaml") -> Any:
    """Parse yaml or json text, mapping syntax errors onto :class:`GraphParseError`."""
    if fmt == "json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise GraphParseError(exc.msg, f"line {exc.lineno} col {exc.colno}") from None
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        locus = f"line {mark.line + 1} col {mark.column + 1}" if mark else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise GraphParseError(problem, locus) from None


# -- document -> model ---------------------------------------------------------

def _req(d: dict, key: str, locus: str) -> Any:
    if key not in d:
        raise GraphParseError(f"missing field {key!r}", locus)
    return d[key]


def _ports(items: Any, locus: str) -> tuple[PortSpec, ...]:
    if items is None:
        return ()
    if not isinstance(items, list):
        raise GraphParseError("ports must be a list", locus)
    ports = []
    for item in items:
        if not isinstance(item, dict):
            raise GraphParseError("port must be a mapping", locus)
        name = str(_req(item, "name", locus))
        try:
            type_name = parse_type(_req(item, "type", f"{locus} {name}"))
        except ValueError as exc:
            raise GraphParseError(str(exc), f"{locus} {name}") from None
        ports.append(PortSpec(name, type_name, item.get("default")))
    return tuple(ports)


def _enum(cls, value: Any, locus: str):
    try:
        return cls(str(value).lower())
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise GraphParseError(f"{value!r} is not one of {choices}", locus) from None


def node_from_doc(d: Any) -> Node:
    if not isinstance(d, dict):
        raise GraphParseError("node must be a mapping", "nodes")
    node_id = str(_req(d, "id", "node"))
    locus = f"node {node_id}"
    try:
        floor = TypeFloor.parse(str(d.get("floor", "text")))
    except ValueError as exc:
        raise GraphParseError(str(exc), locus) from None
    state = _enum(ResolutionState, d["state"], locus) if "state" in d else default_state(floor)
    spec = None
    if d.get("spec") is not None:
        s = d["spec"]
        if not isinstance(s, dict):
            raise GraphParseError("spec must be a mapping with pre/post", locus)
        spec = Contract(tuple(str(x) for x in s.get("pre") or ()), tuple(str(x) for x in s.get("post") or ()))
    virtuals = []
    for v in d.get("virtual_calls") or ():
        vlocus = f"{locus} virtual {v.get('name')}"
        try:
            output = parse_type(_req(v, "output", vlocus))
        except ValueError as exc:
            raise GraphParseError(str(exc), vlocus) from None
        virtuals.append(
            VirtualCall(
                str(_req(v, "name", locus)),
                _enum(VirtualKind, v.get("kind", "virtualshim"), vlocus),
                _ports(v.get("inputs"), vlocus),
                output,
            )
        )
    context = d.get("context") or []
    if isinstance(context, str):
        context = [context]
    body = d.get("body")
    return Node(
        id=node_id,
        name=str(d.get("name") or ""),
        floor=floor,
        state=state,
        description=str(d.get("description") or ""),
        context=tuple(str(c) for c in context),
        inputs=_ports(d.get("inputs"), f"{locus} inputs"),
        outputs=_ports(d.get("outputs"), f"{locus} outputs"),
        spec=spec,
        body=None if body is None else str(body),
        virtual_calls=tuple(virtuals),
        effects=frozenset(_enum(EffectClass, e, locus) for e in d.get("effects") or ()),
        deferred=bool(d.get("deferred", False)),
    )


def _endpoint(text: Any, locus: str) -> tuple[str, str | None]:
    if not isinstance(text, str) or not text:
        raise GraphParseError(f"edge endpoint must be 'node' or 'node.port', got {text!r}", locus)
    node, _, port = text.partition(".")
    return node, (port or None)


def graph_from_doc(doc: Any) -> WorkflowGraph:
    if not isinstance(doc, dict):
        raise GraphParseError("graph document must be a mapping")
    version = doc.get("version", FORMAT_VERSION)
    if not isinstance(version, int):
        raise GraphParseError("version must be an integer", "version")
    nodes = doc.get("nodes")
    if not isinstance(nodes, list):
        raise GraphParseError("'nodes' must be a list", "nodes")
    edges = []
    for i, e in enumerate(doc.get("edges") or []):
        locus = f"edges[{i}]"
        if not isinstance(e, dict):
            raise GraphParseError("edge must be a mapping with from/to", locus)
        src, sp = _endpoint(_req(e, "from", locus), locus)
        dst, dp = _endpoint(_req(e, "to", locus), locus)
        edges.append(Edge(src, dst, sp, dp))
    return WorkflowGraph(
        nodes=tuple(node_from_doc(n) for n in nodes),
        edges=tuple(edges),
        name=str(doc.get("name") or ""),
        version=version,
    )


def parse_graph(text: str, fmt: str = "yaml", strict: bool = True) -> WorkflowGraph:
    """Parse a graph document; with ``strict`` also enforce every graph invariant."""
    graph = graph_from_doc(load_text(text, fmt))
    if strict:
        report = validate_graph(graph)
        if not report.ok:
            raise GraphValidationError(report)
    return graph


# -- model -> document ---------------------------------------------------------

def _port_doc(p: PortSpec) -> dict:
    d: dict[str, Any] = {"name": p.name, "type": p.type}
    if p.has_default:
        d["default"] = p.default
    return d


def node_to_doc(n: Node) -> dict:
    d: dict[str, Any] = {
        "id": n.id,
        "name": n.name,
        "floor": n.floor.label,
        "state": n.state.value,
        "description": n.description,
        "context": list(n.context),
        "inputs": [_port_doc(p) for p in n.inputs],
        "outputs": [_port_doc(p) for p in n.outputs],
    }
    if n.spec is not None:
        d["spec"] = {"pre": list(n.spec.pre), "post": list(n.spec.post)}
    if n.body is not None:
        d["body"] = n.body
    d["virtual_calls"] = [
        {"name": v.name, "kind": v.kind.value, "inputs": [_port_doc(p) for p in v.inputs], "output": v.output}
        for v in n.virtual_calls
    ]
    d["effects"] = sorted(e.value for e in n.effects)
    d["deferred"] = n.deferred
    return d


def _endpoint_text(node: str, port: str | None) -> str:
    return f"{node}.{port}" if port else node


def graph_to_doc(g: WorkflowGraph) -> dict:
    return {
        "version": g.version,
        "name": g.name,
        "nodes": [node_to_doc(n) for n in g.nodes],
        "edges": [
            {"from": _endpoint_text(e.src, e.src_port), "to": _endpoint_text(e.dst, e.dst_port)} for e in g.edges
        ],
    }


def graph_digest(g: WorkflowGraph) -> str:
    return digest(graph_to_doc(g))


def canonical_yaml(doc: Any) -> str:
    """Byte-stable yaml: sorted keys, document-ordered lists."""
    return dump_yaml(doc, sort_keys=True)


def render_ascii(g: WorkflowGraph) -> str:
    """One line per node in topological order; ``-->`` marks each outgoing edge."""
    lines = []
    for layer in topo_layers(g):
        for node_id in layer:
            n = g.node(node_id)
            label = n.name or n.description
            line = f"[{n.id}] <{n.floor.label}> {label}".rstrip()
            for e in g.out_edges(node_id):
                line += f"  --> {_endpoint_text(e.dst, e.dst_port)}"
            lines.append(line)
    return "\n".join(lines) + "\n"


def render_graph(g: WorkflowGraph, fmt: str = "yaml") -> str:
    if fmt == "yaml":
        return dump_yaml(graph_to_doc(g))
    if fmt == "json":
        return json.dumps(graph_to_doc(g), indent=2, ensure_ascii=False) + "\n"
    if fmt == "ascii":
        return render_ascii(g)
    raise ValueError(f"unknown format {fmt!r}")
