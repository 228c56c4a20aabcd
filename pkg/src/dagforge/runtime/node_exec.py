"""Executing a single node at whatever floor it occupies."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from typing import Any

from ..errors import ContractViolation, ExecutionError, SchemaValidationError
from ..expr import eval_condition, evaluate, parse_program
from ..gateway import Gateway, GenerationRequest, GenerationResponse
from ..graph import Node, TypeFloor, WorkflowGraph
from ..hfill import fill
from ..schema import from_ports
from .config import RunConfig
from .effects import Toolbox
from .synthesis import SynthesisCache, synthesize_virtual


@dataclass
class NodeResult:
    node_id: str
    outputs: dict[str, Any]
    status: str  # ok | simulated | failed
    provider_calls: int = 0
    started: float = 0.0
    finished: float = 0.0
    error: str | None = None
    speculation: str | None = None  # hit | miss when predicted


class CountingGateway:
    """Per-node view of the gateway that counts the requests the node issues."""

    def __init__(self, gateway: Gateway | None, node_id: str) -> None:
        self.gateway = gateway
        self.node_id = node_id
        self.calls = 0
        self._lock = threading.Lock()

    def generate(self, req: GenerationRequest) -> GenerationResponse:
        if self.gateway is None:
            raise ExecutionError(f"node {self.node_id} needs a model provider but none is configured")
        with self._lock:
            self.calls += 1
        return self.gateway.generate(req)


@dataclass
class NodeEnv:
    graph: WorkflowGraph
    config: RunConfig
    gateway: Gateway | None
    toolbox: Toolbox
    synth: SynthesisCache
    extra_context: list[str] = field(default_factory=list)


def _render_value(v: Any) -> str:
    return v if isinstance(v, str) else json.dumps(v, ensure_ascii=False)


def node_prompt(node: Node, inputs: dict[str, Any]) -> str:
    lines = [f"[node {node.id}] {node.name}".rstrip(), f"description: {node.description}"]
    lines += [f"note: {c}" for c in node.context]
    if node.floor == TypeFloor.TEXT:
        texts = inputs.get("upstream") or []
        if texts:
            lines.append("upstream results:")
            lines += [f"---\n{t}" for t in texts]
    else:
        for p in node.inputs:
            lines.append(f"input {p.name} ({p.type}) = {_render_value(inputs.get(p.name))}")
    return "\n".join(lines)


def _check_all(node: Node, conds, inputs, outputs=None) -> list[str]:
    failed = []
    for cond in conds:
        try:
            ok = eval_condition(cond, inputs, outputs)
        except Exception as exc:  # evaluation errors count as violations
            ok = False
            cond = f"{cond} ({exc})"
        if not ok:
            failed.append(cond)
    return failed


def execute_node(node: Node, inputs: dict[str, Any], env: NodeEnv, gw: CountingGateway | None = None) -> NodeResult:
    """Run ``node`` on ``inputs``; errors propagate to the scheduler.

    PURE nodes get no gateway at all, so they cannot reach a provider.
    """
    if gw is None:
        gw = CountingGateway(env.gateway, node.id)
    if node.floor == TypeFloor.PURE:
        gw.gateway = None
    started = time.monotonic()
    cfg = env.config
    status = "ok"

    if node.spec is not None and node.floor >= TypeFloor.SPEC:
        bad = _check_all(node, node.spec.pre, inputs)
        if bad:
            raise ContractViolation(f"node {node.id}: precondition failed: {'; '.join(bad)}")

    if node.floor == TypeFloor.TEXT:
        prompt = "\n".join([node_prompt(node, inputs)] + env.extra_context)
        text = gw.generate(GenerationRequest("execute_text", prompt, None, cfg.seed, cfg.intelligence)).payload
        outputs = {"text": text}
    elif node.floor in (TypeFloor.TYPED, TypeFloor.SPEC):
        schema = from_ports(node.outputs)
        context = "\n".join([node_prompt(node, inputs)] + env.extra_context)
        outputs = fill(schema, context, gw, cfg.seed, cfg.intelligence)
        if node.floor == TypeFloor.SPEC and node.spec is not None:
            bad = _check_all(node, node.spec.post, inputs, outputs)
            if bad:
                retry = context + "\n(re-ask: previous output violated: " + "; ".join(bad) + ")"
                try:
                    outputs = fill(schema, retry, gw, cfg.seed, cfg.intelligence)
                except SchemaValidationError as exc:
                    raise ContractViolation(f"node {node.id}: re-ask failed: {exc}") from None
                bad = _check_all(node, node.spec.post, inputs, outputs)
                if bad:
                    raise ContractViolation(f"node {node.id}: postcondition failed after re-ask: {'; '.join(bad)}")
    else:
        program = parse_program(node.body or "")

        def virtual_hook(name: str, args):
            call = node.virtual(name)
            body = synthesize_virtual(env.graph, node, call, gw.generate, env.synth, cfg.seed, cfg.intelligence)
            vals, _ = evaluate(body, dict(zip((p.name for p in call.inputs), args)), {"result": call.output},
                               tool=env.toolbox.hook(node.id))
            return vals["result"]

        outputs, simulated = evaluate(
            program,
            {p.name: inputs.get(p.name) for p in node.inputs},
            {p.name: p.type for p in node.outputs},
            tool=env.toolbox.hook(node.id),
            virtual=virtual_hook if node.floor == TypeFloor.SHIM and node.virtual_calls else None,
        )
        if simulated:
            status = "simulated"
        elif node.spec is not None:
            bad = _check_all(node, node.spec.post, inputs, outputs)
            if bad:
                raise ContractViolation(f"node {node.id}: postcondition failed: {'; '.join(bad)}")
    return NodeResult(node.id, outputs, status, gw.calls, started, time.monotonic())
