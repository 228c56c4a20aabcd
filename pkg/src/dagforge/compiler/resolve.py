"""Floor-by-floor resolution with locality-sliced prompts and fallbacks.

Each step lifts a node one floor. When a step fails (provider error or an
unusable response) the fallbacks are tried in order: Decompose (TEXT nodes,
when the provider splits the description into several steps), Virtualize
(SPEC->STUB and STUB->SHIM, turning the node into a SHIM over a virtual
call), else Defer (retried on the next pass, at most three passes).
"""

from __future__ import annotations

import dataclasses
import logging
import re
from collections import deque
from dataclasses import dataclass
from typing import Callable

from ..errors import CompileError, DagforgeError, ExprError, ProviderError, ResolutionIncomplete
from ..expr import check_condition, check_program, parse_program, references
from ..expr.syntax import KEYWORDS
from ..gateway import Gateway, GenerationRequest
from ..graph import (
    ContextSlice,
    Contract,
    Edge,
    Node,
    PortSpec,
    ResolutionState,
    TypeFloor,
    VirtualCall,
    VirtualKind,
    WorkflowGraph,
    default_state,
    graph_floor,
    neighborhood,
    topo_order,
    validate_graph,
)
from ..schema import SchemaNode, obj, scalar
from ..toolspec import TOOL_EFFECTS
from .compose import parse_plan, short_name
from .prompts import build_prompt

log = logging.getLogger(__name__)

MAX_PASSES = 3

PromptObserver = Callable[[str, ContextSlice, str], None]


@dataclass(frozen=True)
class ResolverStep:
    from_floor: TypeFloor
    to_floor: TypeFloor

    @property
    def label(self) -> str:
        return f"{self.from_floor.label}->{self.to_floor.label}"


STEPS = tuple(ResolverStep(TypeFloor(f), TypeFloor(f + 1)) for f in range(TypeFloor.TEXT, TypeFloor.PURE))


def step_from(floor: TypeFloor) -> ResolverStep:
    return STEPS[floor - TypeFloor.TEXT]


@dataclass(frozen=True)
class StepOutcome:
    """``kind`` is one of resolved, decomposed, virtualized, deferred."""

    kind: str
    graph: WorkflowGraph
    node_ids: tuple[str, ...]
    cause: BaseException | None = None


class StepFailed(CompileError):
    """The provider answered, but the answer cannot be used for this step."""


def identifier(text: str, fallback: str = "result") -> str:
    name = re.sub(r"[^a-z0-9_]+", "_", str(text).strip().lower()).strip("_")
    if not name:
        name = fallback
    if name[0].isdigit():
        name = "v_" + name
    if name in KEYWORDS:
        name += "_"
    return name


def infer_effects(body: str | None) -> frozenset:
    if body is None:
        return frozenset()
    return frozenset(TOOL_EFFECTS[t] for t in references(parse_program(body))["tool"] if t in TOOL_EFFECTS)


def _promote(node: Node, floor: TypeFloor, **changes) -> Node:
    return dataclasses.replace(node, floor=floor, state=default_state(floor), deferred=False, **changes)


def _comment_lines(body: str | None) -> list[str]:
    if not body:
        return []
    return [ln for ln in body.splitlines() if ln.lstrip().startswith("#")]


def _port_types(ports) -> dict[str, str]:
    return {p.name: p.type for p in ports}


class Resolver:
    def __init__(
        self,
        gateway: Gateway,
        seed: int = 0,
        intelligence: int = 5,
        on_prompt: PromptObserver | None = None,
        max_passes: int = MAX_PASSES,
    ) -> None:
        self.gateway = gateway
        self.seed = seed
        self.intelligence = intelligence
        self.on_prompt = on_prompt
        self.max_passes = max_passes

    # -- provider access -----------------------------------------------------------

    def _ask(self, kind: str, node_id: str, sl: ContextSlice, prompt: str, schema: SchemaNode | None):
        if self.on_prompt is not None:
            self.on_prompt(node_id, sl, prompt)
        req = GenerationRequest(kind, prompt, schema, self.seed, self.intelligence)
        return self.gateway.generate(req).payload

    # -- the five steps ------------------------------------------------------------

    def _to_typed(self, graph: WorkflowGraph, node: Node) -> WorkflowGraph:
        sl = neighborhood(graph, node.id)
        prompt = build_prompt("Name the single text output the target node produces (an identifier).", sl)
        payload = self._ask("resolve_typed", node.id, sl, prompt, obj({"output_name": scalar("str")}))
        out_name = identifier(payload["output_name"])

        in_edges = graph.in_edges(node.id)
        names: dict[Edge, str] = {}
        inputs = []
        for e in in_edges:
            if len(in_edges) == 1:
                name = "text"
            else:
                name = identifier(f"from_{e.src}")
                if any(v == name for v in names.values()):
                    name = identifier(f"from_{e.src}_{e.src_port or len(names)}")
            names[e] = name
            src_type = "str"
            if e.src_port is not None:
                src_type = graph.node(e.src).output(e.src_port).type
            inputs.append(PortSpec(name, src_type))
        new = _promote(node, TypeFloor.TYPED, inputs=tuple(inputs), outputs=(PortSpec(out_name, "str"),))
        edges = []
        for e in graph.edges:
            if e in names:
                e = dataclasses.replace(e, dst_port=names[e])
            elif e.src == node.id and e.src_port is None:
                e = dataclasses.replace(e, src_port=out_name)
            edges.append(e)
        return graph.replace_node(new).with_edges(edges)

    def _to_spec(self, graph: WorkflowGraph, node: Node) -> WorkflowGraph:
        sl = neighborhood(graph, node.id)
        prompt = build_prompt(
            "State preconditions over the inputs and postconditions over out.<port> as boolean expressions.", sl
        )
        schema = obj({"pre": scalar("list[str]"), "post": scalar("list[str]")})
        payload = self._ask("resolve_spec", node.id, sl, prompt, schema)
        ins, outs = _port_types(node.inputs), _port_types(node.outputs)

        def usable(src: str, with_outs) -> bool:
            try:
                check_condition(src, ins, with_outs)
                return True
            except ExprError:
                return False

        pre = [c for c in dict.fromkeys(payload["pre"]) if usable(c, None)]
        post = [c for c in dict.fromkeys(payload["post"]) if usable(c, outs)]
        for p in node.outputs:
            # typeof() of an empty list is list[?], so lists get a length check instead
            cond = f'typeof(out.{p.name}) == "{p.type}"' if not p.type.startswith("list[") else f"len(out.{p.name}) >= 0"
            if cond not in post:
                post.append(cond)
        return graph.replace_node(_promote(node, TypeFloor.SPEC, spec=Contract(tuple(pre), tuple(post))))

    def _to_stub(self, graph: WorkflowGraph, node: Node) -> WorkflowGraph:
        sl = neighborhood(graph, node.id)
        prompt = build_prompt("Summarize, in one line, the function the target node implements.", sl)
        payload = self._ask("resolve_stub", node.id, sl, prompt, obj({"summary": scalar("str")}))
        summary = " ".join(str(payload["summary"]).split())
        lines = [f"# {summary}"] if summary else []
        lines += [f"out.{p.name} = stub;" for p in node.outputs]
        body = "\n".join(lines)
        check_program(parse_program(body), _port_types(node.inputs), _port_types(node.outputs), {}, allow_stub=True)
        return graph.replace_node(_promote(node, TypeFloor.STUB, body=body))

    def _synthesize(self, graph: WorkflowGraph, node: Node, task: str) -> str:
        sl = neighborhood(graph, node.id)
        prompt = build_prompt(task, sl, [f"signature: {node.signature()}"])
        payload = self._ask("synthesize_body", node.id, sl, prompt, obj({"body": scalar("str")}))
        body = str(payload["body"])
        try:
            program = parse_program(body)
            if references(program)["virtual"]:
                raise StepFailed("synthesized body still calls virtual functions")
            check_program(program, _port_types(node.inputs), _port_types(node.outputs), {}, allow_stub=False)
        except ExprError as exc:
            raise StepFailed(f"synthesized body rejected: {exc}") from None
        return "\n".join(_comment_lines(node.body) + [body])

    def _to_shim(self, graph: WorkflowGraph, node: Node) -> WorkflowGraph:
        body = self._synthesize(graph, node, "Implement the target node as an expression-language body.")
        new = _promote(node, TypeFloor.SHIM, body=body, virtual_calls=(), effects=infer_effects(body))
        return graph.replace_node(new)

    def _to_pure(self, graph: WorkflowGraph, node: Node) -> WorkflowGraph:
        if not references(parse_program(node.body or ""))["virtual"]:
            return graph.replace_node(_promote(node, TypeFloor.PURE, virtual_calls=()))
        body = self._synthesize(graph, node, "Implement the target node without any virtual calls.")
        new = _promote(node, TypeFloor.PURE, body=body, virtual_calls=(), effects=infer_effects(body))
        return graph.replace_node(new)

    _STEP_IMPL = {
        TypeFloor.TEXT: _to_typed,
        TypeFloor.TYPED: _to_spec,
        TypeFloor.SPEC: _to_stub,
        TypeFloor.STUB: _to_shim,
        TypeFloor.SHIM: _to_pure,
    }

    # -- fallbacks -------------------------------------------------------------------

    def _decompose(self, graph: WorkflowGraph, node: Node) -> StepOutcome | None:
        if node.floor != TypeFloor.TEXT or node.inputs or node.outputs or not node.description.strip():
            return None
        try:
            payload = self.gateway.generate(
                GenerationRequest("compose", node.description, None, self.seed, self.intelligence)
            ).payload
            descs, pairs = parse_plan(payload)
        except DagforgeError:
            return None
        descs = [d for d in descs if d]
        if len(descs) < 2:
            return None
        taken = set(graph.node_ids) - {node.id}
        ids = []
        for k in range(1, len(descs) + 1):
            candidate, extra = f"{node.id}_{k}", 1
            while candidate in taken:
                candidate, extra = f"{node.id}_{k}_{extra}", extra + 1
            taken.add(candidate)
            ids.append(candidate)
        parts = [
            Node(id=i, name=short_name(d), description=d, context=node.context) for i, d in zip(ids, descs)
        ]
        first, last = ids[0], ids[-1]
        nodes = []
        for n in graph.nodes:
            nodes.extend(parts if n.id == node.id else [n])
        edges = []
        for e in graph.edges:
            if e.dst == node.id:
                e = dataclasses.replace(e, dst=first)
            elif e.src == node.id:
                e = dataclasses.replace(e, src=last)
            edges.append(e)
        edges += [Edge(ids[i], ids[j]) for i, j in pairs if i < len(ids) and j < len(ids)]
        out = WorkflowGraph(tuple(nodes), tuple(edges), graph.name, graph.version)
        return StepOutcome("decomposed", out, tuple(ids))

    @staticmethod
    def virtualize(node: Node) -> Node:
        """Rewrite a node with a typed signature as a SHIM over virtual calls."""
        args = ", ".join(p.name for p in node.inputs)
        calls, lines = [], _comment_lines(node.body)
        for p in node.outputs:
            name = "impl" if len(node.outputs) == 1 else identifier(f"impl_{p.name}")
            calls.append(VirtualCall(name, VirtualKind.VIRTUALSHIM, node.inputs, p.type))
            lines.append(f"out.{p.name} = virtual.{name}({args});")
        body = "\n".join(lines)
        check_program(parse_program(body), _port_types(node.inputs), _port_types(node.outputs),
                      {c.name: (tuple(i.type for i in c.inputs), c.output) for c in calls})
        return _promote(node, TypeFloor.SHIM, body=body, virtual_calls=tuple(calls), effects=frozenset())

    # -- driving -------------------------------------------------------------------

    def step(self, graph: WorkflowGraph, node_id: str, allow_decompose: bool = True) -> StepOutcome:
        """Lift ``node_id`` one floor, falling back to Decompose, Virtualize or Defer."""
        node = graph.node(node_id)
        if node.floor == TypeFloor.PURE:
            return StepOutcome("resolved", graph, (node_id,))
        step = step_from(node.floor)
        try:
            out = self._STEP_IMPL[node.floor](self, graph, node)
            return StepOutcome("resolved", out, (node_id,))
        except (ProviderError, StepFailed, ExprError) as exc:
            cause: BaseException = exc
            log.info("step %s failed for %s: %s", step.label, node_id, exc)
        if allow_decompose and step.from_floor == TypeFloor.TEXT:
            outcome = self._decompose(graph, node)
            if outcome is not None:
                return dataclasses.replace(outcome, cause=cause)
        if step.from_floor in (TypeFloor.SPEC, TypeFloor.STUB):
            return StepOutcome("virtualized", graph.replace_node(self.virtualize(node)), (node_id,), cause)
        deferred = dataclasses.replace(node, deferred=True, state=ResolutionState.PARTIALLY_RESOLVED)
        return StepOutcome("deferred", graph.replace_node(deferred), (node_id,), cause)

    def resolve_node(self, graph: WorkflowGraph, node_id: str, target: TypeFloor,
                     allow_decompose: bool = True) -> StepOutcome:
        """Step one node until it reaches ``target``, is deferred, or is decomposed."""
        outcome = StepOutcome("resolved", graph, (node_id,))
        while graph.node(node_id).floor < target:
            outcome = self.step(graph, node_id, allow_decompose)
            graph = outcome.graph
            if outcome.kind in ("deferred", "decomposed"):
                return outcome
        return dataclasses.replace(outcome, graph=graph)

    def resolve(self, graph: WorkflowGraph, target: TypeFloor) -> WorkflowGraph:
        if not graph.nodes:
            raise CompileError("cannot resolve an empty graph")
        if target < graph_floor(graph):
            raise CompileError(
                f"target floor {target.label} is below the graph floor {graph_floor(graph).label}"
            )
        causes: dict[str, BaseException] = {}
        spawned: set[str] = set()
        for pass_no in range(1, self.max_passes + 1):
            queue = deque(i for i in topo_order(graph) if graph.node(i).floor < target)
            if not queue:
                break
            log.debug("resolution pass %d over %d node(s)", pass_no, len(queue))
            while queue:
                nid = queue.popleft()
                if not graph.has_node(nid) or graph.node(nid).floor >= target:
                    continue
                outcome = self.resolve_node(graph, nid, target, allow_decompose=nid not in spawned)
                graph = outcome.graph
                if outcome.kind == "decomposed":
                    causes.pop(nid, None)
                    spawned.update(outcome.node_ids)
                    queue.extendleft(reversed(outcome.node_ids))
                elif outcome.kind == "deferred":
                    causes[nid] = outcome.cause
                else:
                    causes.pop(nid, None)
        unresolved = [n.id for n in graph.nodes if n.floor < target]
        if unresolved:
            raise ResolutionIncomplete(graph, unresolved, {i: causes[i] for i in unresolved if i in causes})
        report = validate_graph(graph)
        if not report.ok:
            raise CompileError("resolved graph is invalid: " + "; ".join(str(d) for d in report.errors[:3]))
        return graph


def resolve(
    graph: WorkflowGraph,
    target: TypeFloor,
    gateway: Gateway,
    seed: int = 0,
    intelligence: int = 5,
    on_prompt: PromptObserver | None = None,
    max_passes: int = MAX_PASSES,
) -> WorkflowGraph:
    return Resolver(gateway, seed, intelligence, on_prompt, max_passes).resolve(graph, target)
