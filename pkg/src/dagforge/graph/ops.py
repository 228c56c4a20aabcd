"""Validation, topological layering, locality slices and partitioning."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import CycleError, ExprError, GraphError
from ..expr import check_condition, check_program, parse_program, references
from .model import (
    IDENT_RE,
    Edge,
    Node,
    ResolutionState,
    TypeFloor,
    ValidationReport,
    WorkflowGraph,
    is_primitive,
    meet,
    value_matches,
)


def virtual_signatures(node: Node) -> dict[str, tuple[tuple[str, ...], str]]:
    return {v.name: (tuple(p.type for p in v.inputs), v.output) for v in node.virtual_calls}


def _check_ports(node: Node, ports, kind: str, report: ValidationReport) -> None:
    seen: set[str] = set()
    for p in ports:
        locus = f"node {node.id} {kind} {p.name}"
        if not IDENT_RE.match(p.name or ""):
            report.error(locus, f"port name {p.name!r} is not an identifier")
        if p.name in seen:
            report.error(locus, f"duplicate {kind} port {p.name!r}")
        seen.add(p.name)
        if not is_primitive(p.type):
            report.error(locus, f"unknown primitive type {p.type!r}")
        elif p.has_default and not value_matches(p.type, p.default):
            report.error(locus, f"default {p.default!r} is not a {p.type}")


def validate_node(node: Node, report: ValidationReport) -> None:
    locus = f"node {node.id}"
    if not IDENT_RE.match(node.id or ""):
        report.error(locus, f"node id {node.id!r} is not an identifier")
    _check_ports(node, node.inputs, "input", report)
    _check_ports(node, node.outputs, "output", report)

    if node.state == ResolutionState.IN_PROGRESS:
        report.error(locus, "state in_progress is only valid while a resolver holds the node")
    if node.floor == TypeFloor.PURE and node.state != ResolutionState.FULLY_RESOLVED:
        report.error(locus, "PURE node must be fully_resolved")

    if node.floor >= TypeFloor.TYPED and not node.outputs:
        report.error(locus, f"{node.floor.label} node declares no typed outputs")

    ins = {p.name: p.type for p in node.inputs}
    outs = {p.name: p.type for p in node.outputs}

    if node.floor >= TypeFloor.SPEC:
        if node.spec is None:
            report.error(locus, f"{node.floor.label} node has no pre/post contract")
        else:
            for kind, exprs, with_outs in (("pre", node.spec.pre, None), ("post", node.spec.post, outs)):
                for src in exprs:
                    try:
                        check_condition(src, ins, with_outs)
                    except ExprError as exc:
                        report.error(f"{locus} {kind}", f"{src!r}: {exc}")

    seen_virtual: set[str] = set()
    for v in node.virtual_calls:
        if v.name in seen_virtual:
            report.error(locus, f"duplicate virtual call {v.name!r}")
        seen_virtual.add(v.name)
        if not is_primitive(v.output) or not all(is_primitive(p.type) for p in v.inputs):
            report.error(locus, f"virtual call {v.name!r} has a non-primitive signature")

    if node.floor == TypeFloor.PURE and node.virtual_calls:
        report.error(locus, "PURE node declares virtual calls")

    if node.floor >= TypeFloor.STUB:
        if node.body is None:
            report.error(locus, f"{node.floor.label} node has no body")
            return
        try:
            program = parse_program(node.body)
        except ExprError as exc:
            report.error(f"{locus} body", str(exc))
            return
        refs = references(program)
        if node.floor == TypeFloor.PURE and refs["virtual"]:
            report.error(locus, "PURE node contains virtual reference")
            return
        undeclared = sorted(refs["virtual"] - seen_virtual)
        if undeclared:
            report.error(locus, "body references undeclared virtual function(s): " + ", ".join(undeclared))
            return
        try:
            check_program(
                program, ins, outs, virtual_signatures(node), allow_stub=node.floor == TypeFloor.STUB
            )
        except ExprError as exc:
            report.error(f"{locus} body", str(exc))


def _check_edge(graph: WorkflowGraph, e: Edge, report: ValidationReport) -> None:
    locus = f"edge {e.describe()}"
    if not graph.has_node(e.src) or not graph.has_node(e.dst):
        missing = [x for x in (e.src, e.dst) if not graph.has_node(x)]
        report.error(locus, "unknown endpoint " + ", ".join(missing))
        return
    src, dst = graph.node(e.src), graph.node(e.dst)
    src_t = dst_t = None
    if e.src_port is not None:
        port = src.output(e.src_port)
        if port is None:
            report.error(locus, f"node {src.id} has no output port {e.src_port!r}")
        else:
            src_t = port.type
    elif src.floor >= TypeFloor.TYPED:
        report.error(locus, f"edge from {src.floor.label} node {src.id} must name an output port")
    if e.dst_port is not None:
        port = dst.input(e.dst_port)
        if port is None:
            report.error(locus, f"node {dst.id} has no input port {e.dst_port!r}")
        else:
            dst_t = port.type
    elif dst.floor >= TypeFloor.TYPED:
        report.error(locus, f"edge into {dst.floor.label} node {dst.id} must name an input port")
    if src_t and dst_t and src_t != dst_t:
        report.error(
            locus,
            f"type mismatch: {e.src}.{e.src_port} ({src_t}) -> {e.dst}.{e.dst_port} ({dst_t})",
        )
    if e.src_port is None and dst_t is not None and dst_t != "str":
        report.error(locus, f"text from {e.src} cannot feed {e.dst}.{e.dst_port} ({dst_t})")


def validate_graph(graph: WorkflowGraph) -> ValidationReport:
    report = ValidationReport()
    if graph.version != 1:
        report.error("graph", f"unsupported format version {graph.version}")
    if not graph.nodes:
        report.error("graph", "graph has no nodes")
    seen: set[str] = set()
    for node in graph.nodes:
        if node.id in seen:
            report.error(f"node {node.id}", "duplicate node id")
        seen.add(node.id)
        validate_node(node, report)

    edge_keys: set[tuple] = set()
    fed: dict[tuple[str, str], int] = {}
    for e in graph.edges:
        key = (e.src, e.src_port, e.dst, e.dst_port)
        if key in edge_keys:
            report.error(f"edge {e.describe()}", "duplicate edge")
        edge_keys.add(key)
        _check_edge(graph, e, report)
        if e.dst_port is not None:
            fed[(e.dst, e.dst_port)] = fed.get((e.dst, e.dst_port), 0) + 1

    for (dst, port), count in sorted(fed.items()):
        if count > 1:
            report.error(f"node {dst} input {port}", f"input receives {count} edges (fan-in)")
    for node in graph.nodes:
        if node.floor < TypeFloor.TYPED:
            continue
        for p in node.inputs:
            if (node.id, p.name) not in fed and not p.has_default:
                report.error(f"node {node.id} input {p.name}", f"input port {p.name!r} has no edge and no default")

    try:
        topo_layers(graph)
    except CycleError as exc:
        report.error("graph", str(exc))
    return report


def _find_cycle(graph: WorkflowGraph, remaining: set[str]) -> list[str]:
    color: dict[str, int] = {}
    stack: list[str] = []

    def dfs(u: str) -> list[str] | None:
        color[u] = 1
        stack.append(u)
        for v in sorted(graph.successors(u)):
            if v not in remaining:
                continue
            if color.get(v) == 1:
                return stack[stack.index(v):]
            if v not in color:
                found = dfs(v)
                if found:
                    return found
        color[u] = 2
        stack.pop()
        return None

    for start in sorted(remaining):
        if start not in color:
            found = dfs(start)
            if found:
                return list(found)
    return sorted(remaining)


def topo_layers(graph: WorkflowGraph) -> list[list[str]]:
    indegree = {n.id: 0 for n in graph.nodes}
    for node_id in indegree:
        for p in graph.predecessors(node_id):
            if p in indegree:
                indegree[node_id] += 1
    layer = sorted(i for i, d in indegree.items() if d == 0)
    layers: list[list[str]] = []
    placed = 0
    while layer:
        layers.append(layer)
        placed += len(layer)
        nxt: list[str] = []
        for u in layer:
            for v in graph.successors(u):
                if v not in indegree:
                    continue
                indegree[v] -= 1
                if indegree[v] == 0:
                    nxt.append(v)
        layer = sorted(nxt)
    if placed != len(indegree):
        remaining = {i for i, d in indegree.items() if d > 0}
        raise CycleError(_find_cycle(graph, remaining))
    return layers


def topo_order(graph: WorkflowGraph) -> list[str]:
    return [i for layer in topo_layers(graph) for i in layer]


def graph_floor(graph: WorkflowGraph) -> TypeFloor:
    if not graph.nodes:
        raise GraphError("graph_floor of an empty graph")
    return meet(*(n.floor for n in graph.nodes))


@dataclass(frozen=True)
class ContextSlice:
    """A node plus its immediate dependencies and dependents."""

    center: str
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]

    @property
    def ids(self) -> frozenset[str]:
        return frozenset(n.id for n in self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def upstream(self) -> list[Node]:
        ups = {e.src for e in self.edges if e.dst == self.center}
        return [n for n in self.nodes if n.id in ups]

    def downstream(self) -> list[Node]:
        downs = {e.dst for e in self.edges if e.src == self.center}
        return [n for n in self.nodes if n.id in downs]


def neighborhood(graph: WorkflowGraph, node_id: str) -> ContextSlice:
    center = graph.node(node_id)
    members = [node_id] + graph.predecessors(node_id) + graph.successors(node_id)
    ids = list(dict.fromkeys(members))
    idset = set(ids)
    edges = [e for member in ids for e in graph.out_edges(member) if e.dst in idset]
    nodes = (center,) + tuple(graph.node(i) for i in ids[1:])
    return ContextSlice(node_id, nodes, tuple(edges))


def partition_independent(graph: WorkflowGraph) -> list[WorkflowGraph]:
    parent = {n.id: n.id for n in graph.nodes}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in graph.edges:
        if e.src in parent and e.dst in parent:
            ra, rb = find(e.src), find(e.dst)
            if ra != rb:
                parent[rb] = ra
    groups: dict[str, list[Node]] = {}
    for n in graph.nodes:
        groups.setdefault(find(n.id), []).append(n)
    parts = []
    for members in groups.values():
        ids = {n.id for n in members}
        edges = tuple(e for e in graph.edges if e.src in ids)
        parts.append(WorkflowGraph(tuple(members), edges, graph.name, graph.version))
    return parts
