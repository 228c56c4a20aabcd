"""Ready-set scheduler with journaled effects and the three JIT modes.

* ``dynamic``: virtual functions are synthesized when a SHIM node first calls them.
* ``prefine``: every SHIM virtual call is synthesized on a side pool as soon as
  the run starts, overlapping upstream execution.
* ``predict``: pending nodes are executed early on provider-predicted inputs
  inside an overlay; when the real inputs arrive the speculation is committed
  on exact equality, otherwise rolled back and the node re-runs normally.
"""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from dataclasses import dataclass
from typing import Any

from ..errors import DagforgeError, RunValidationError
from ..expr import parse_program, references
from ..gateway import Gateway, GenerationRequest
from ..graph import Node, TypeFloor, WorkflowGraph, topo_order
from ..graph.io import canonical_json, digest, graph_digest
from ..graph.model import IRREVERSIBLE_EFFECTS
from ..schema import from_ports
from ..toolspec import TOOL_EFFECTS
from .config import RunConfig
from .effects import Journal, Toolbox, remove_tree
from .node_exec import CountingGateway, NodeEnv, NodeResult, _render_value, execute_node
from .record import RunRecord, write_run_files
from .synthesis import SynthesisCache, synthesize_virtual
from .validate import validate_run

log = logging.getLogger(__name__)


def run_id_for(graph: WorkflowGraph, config: RunConfig) -> str:
    material = {
        "graph": graph_digest(graph),
        "seed": config.seed,
        "mode": config.mode,
        "tools": sorted(config.tools),
        "intelligence": config.intelligence,
    }
    return digest(material)[:16]


def gather_inputs(graph: WorkflowGraph, node: Node, results: dict[str, NodeResult]) -> dict[str, Any]:
    """Collect a node's inputs from finished upstream results (plus port defaults)."""
    if node.floor == TypeFloor.TEXT:
        texts = []
        for e in graph.in_edges(node.id):
            out = results[e.src].outputs
            texts.append(_render_value(out[e.src_port] if e.src_port else out.get("text", "")))
        return {"upstream": texts}
    values = {p.name: p.default for p in node.inputs if p.has_default}
    for e in graph.in_edges(node.id):
        if e.dst_port is not None:
            out = results[e.src].outputs
            values[e.dst_port] = out[e.src_port] if e.src_port else out.get("text", "")
    return values


@dataclass
class SpeculationTicket:
    ticket: str
    node_id: str
    overlay: Any  # Path
    future: Future | None = None
    predicted: dict[str, Any] | None = None
    result: NodeResult | None = None
    journal: Journal | None = None
    toolbox: Toolbox | None = None
    settled: bool = False


def _irreversible_tools(node: Node) -> bool:
    if node.body is None:
        return False
    tools = references(parse_program(node.body))["tool"]
    return any(TOOL_EFFECTS.get(t) in IRREVERSIBLE_EFFECTS for t in tools)


@dataclass
class _Failure:
    node_id: str
    error: BaseException


class Executor:
    def __init__(self, graph: WorkflowGraph, config: RunConfig, gateway: Gateway | None = None) -> None:
        self.graph = graph
        self.config = config
        self.gateway = gateway
        self.run_id = run_id_for(graph, config)
        self.run_dir = config.workspace / "runs" / self.run_id
        self.journal = Journal(self.run_id, config.workspace)
        self.toolbox = Toolbox(config.workspace, self.journal, config.tools, config.allow_irreversible,
                               config.http_fixtures)
        self.synth = SynthesisCache()
        self.results: dict[str, NodeResult] = {}
        self.errors: dict[str, BaseException] = {}
        self.warnings: list[str] = []
        self.tickets: dict[str, SpeculationTicket] = {}
        self._counters: list[CountingGateway] = []
        self._side_futures: list[Future] = []
        self._lock = threading.Lock()
        self.order = topo_order(graph)
        self._index = {nid: i for i, nid in enumerate(self.order)}

    # -- plumbing ------------------------------------------------------------------

    def _counter(self, node_id: str) -> CountingGateway:
        c = CountingGateway(self.gateway, node_id)
        with self._lock:
            self._counters.append(c)
        return c

    def _env(self, toolbox: Toolbox | None = None) -> NodeEnv:
        return NodeEnv(self.graph, self.config, self.gateway, toolbox or self.toolbox, self.synth)

    def _warn(self, msg: str) -> None:
        log.warning(msg)
        with self._lock:
            self.warnings.append(msg)

    # -- entry point ---------------------------------------------------------------

    def run(self) -> RunRecord:
        report = validate_run(self.graph, self.config)
        if not report.ok:
            raise RunValidationError(report)
        self.config.check_workspace()
        if self.run_dir.exists():
            remove_tree(self.run_dir)
        started = time.monotonic()
        with ThreadPoolExecutor(max_workers=self.config.parallelism, thread_name_prefix="dagent-side") as side:
            if self.config.mode == "prefine":
                self._start_prefine(side)
            elif self.config.mode == "predict":
                self._start_predict(side)
            failure = self._schedule()
            for f in list(self._side_futures):
                try:
                    f.result()
                except Exception:  # speculation/prefine errors are already folded into warnings or misses
                    pass
        residue: list[str] = []
        for ticket in self.tickets.values():
            if not ticket.settled:
                self._discard(ticket)
        remove_tree(self.run_dir / "overlay")
        if failure is None:
            self.journal.commit()
        else:
            residue = self.journal.rollback()
            if residue:
                self._warn(f"rollback left {len(residue)} residue item(s)")
        err = failure.error if failure else None
        record = RunRecord(
            run_id=self.run_id,
            mode=self.config.mode,
            seed=self.config.seed,
            intelligence=self.config.intelligence,
            tools=tuple(sorted(self.config.tools)),
            status="ok" if failure is None else "failed",
            results=self.results,
            order=self.order,
            journal=self.journal,
            provider_calls=sum(c.calls for c in self._counters),
            wall_clock=time.monotonic() - started,
            started=started,
            failed_node=failure.node_id if failure else None,
            error=f"{type(err).__name__}: {err}" if err else None,
            error_exit=(err.exit_code if isinstance(err, DagforgeError) else 2) if err else 0,
            rollback_residue=residue,
            warnings=list(self.warnings),
        )
        write_run_files(record, self.run_dir)
        return record

    # -- scheduling ----------------------------------------------------------------

    def _schedule(self) -> _Failure | None:
        indeg = {nid: len(self.graph.predecessors(nid)) for nid in self.order}
        ready = [nid for nid in self.order if indeg[nid] == 0]
        running: dict[Future, str] = {}
        failure: _Failure | None = None
        with ThreadPoolExecutor(max_workers=self.config.parallelism, thread_name_prefix="dagent") as pool:
            while ready or running:
                while ready and failure is None and len(running) < self.config.parallelism:
                    nid = ready.pop(0)
                    running[pool.submit(self._run_node, nid)] = nid
                if not running:
                    break
                done, _ = wait(running, return_when=FIRST_COMPLETED)
                for f in sorted(done, key=lambda f: self._index[running[f]]):
                    nid = running.pop(f)
                    result = f.result()
                    self.results[nid] = result
                    if result.status == "failed":
                        if failure is None:
                            failure = _Failure(nid, self.errors[nid])
                            log.error("node %s failed: %s", nid, result.error)
                        continue
                    for succ in self.graph.successors(nid):
                        indeg[succ] -= 1
                        if indeg[succ] == 0:
                            ready.append(succ)
                if failure is not None:
                    ready.clear()
                ready.sort(key=self._index.__getitem__)
        return failure

    def _run_node(self, nid: str) -> NodeResult:
        node = self.graph.node(nid)
        counter = self._counter(nid)
        started = time.monotonic()
        try:
            inputs = gather_inputs(self.graph, node, self.results)
            ticket = self.tickets.get(nid)
            if ticket is not None:
                return self._settle(ticket, node, inputs, counter)
            return execute_node(node, inputs, self._env(), counter)
        except Exception as exc:
            self.errors[nid] = exc
            return NodeResult(nid, {}, "failed", counter.calls, started, time.monotonic(), error=str(exc))

    # -- prefine ---------------------------------------------------------------------

    def _start_prefine(self, pool: ThreadPoolExecutor) -> None:
        for nid in self.order:
            node = self.graph.node(nid)
            if node.floor != TypeFloor.SHIM:
                continue
            for call in node.virtual_calls:
                self._side_futures.append(pool.submit(self._prefine_one, node, call))

    def _prefine_one(self, node: Node, call) -> None:
        counter = self._counter(node.id)
        try:
            synthesize_virtual(self.graph, node, call, counter.generate, self.synth,
                               self.config.seed, self.config.intelligence, keep_failures=False)
        except Exception as exc:
            self._warn(f"prefine of {node.id}.{call.name} failed; will synthesize on demand: {exc}")

    # -- predict ---------------------------------------------------------------------

    def _speculable(self, node: Node) -> bool:
        # PURE nodes never speculate: prediction would cost provider calls.
        return TypeFloor.TYPED <= node.floor <= TypeFloor.SHIM and not _irreversible_tools(node)

    def _start_predict(self, pool: ThreadPoolExecutor) -> None:
        for k, nid in enumerate(self.order):
            node = self.graph.node(nid)
            if not self._speculable(node):
                continue
            name = f"{k:04d}-{nid}"
            ticket = SpeculationTicket(name, nid, self.run_dir / "overlay" / name)
            self.tickets[nid] = ticket
            ticket.future = pool.submit(self._speculate, ticket)
            self._side_futures.append(ticket.future)

    def _predict_inputs(self, node: Node, counter: CountingGateway) -> dict[str, Any]:
        fed = {e.dst_port for e in self.graph.in_edges(node.id) if e.dst_port}
        ports = [p for p in node.inputs if p.name in fed]
        values = {p.name: p.default for p in node.inputs if p.has_default and p.name not in fed}
        if not ports:
            return values  # nothing to predict: speculation hits trivially
        prompt = "\n".join(
            ["Task: predict the input values the target node will receive.", f"[node {node.id}] {node.name}",
             f"description: {node.description}"]
            + [f"input {p.name} ({p.type})" for p in ports]
        )
        req = GenerationRequest("predict_inputs", prompt, from_ports(ports), self.config.seed,
                                self.config.intelligence)
        values.update(counter.generate(req).payload)
        return values

    def _speculate(self, ticket: SpeculationTicket) -> None:
        node = self.graph.node(ticket.node_id)
        counter = self._counter(node.id)
        ticket.predicted = self._predict_inputs(node, counter)
        ticket.overlay.mkdir(parents=True, exist_ok=True)
        ticket.journal = Journal(f"{self.run_id}:{ticket.ticket}", ticket.overlay)
        ticket.toolbox = Toolbox(self.config.workspace, ticket.journal, self.config.tools,
                                 self.config.allow_irreversible, self.config.http_fixtures, overlay=ticket.overlay)
        ticket.result = execute_node(node, ticket.predicted, self._env(ticket.toolbox), counter)

    def _reads_still_valid(self, ticket: SpeculationTicket) -> bool:
        for rel, seen in ticket.toolbox.read_set.items():
            path = self.config.workspace / rel
            now = path.read_bytes() if path.is_file() else None
            if now != seen:
                return False
        return True

    def _discard(self, ticket: SpeculationTicket) -> None:
        if ticket.journal is not None:
            residue = ticket.journal.rollback()
            if residue:
                self._warn(f"overlay {ticket.ticket} rollback residue: {residue}")
        remove_tree(ticket.overlay)
        ticket.settled = True

    def _settle(self, ticket: SpeculationTicket, node: Node, actual: dict[str, Any],
                counter: CountingGateway) -> NodeResult:
        started = time.monotonic()
        hit = False
        try:
            ticket.future.result()
            hit = (
                canonical_json(ticket.predicted) == canonical_json(actual)
                and self._reads_still_valid(ticket)
            )
        except Exception as exc:
            log.info("speculation for %s failed; treating as a miss: %s", node.id, exc)
        if hit:
            for rel, data in ticket.toolbox.writes:
                self.toolbox.call(node.id, "fs.write", [rel, data])
            remove_tree(ticket.overlay)
            ticket.settled = True
            spec = ticket.result
            return NodeResult(node.id, spec.outputs, spec.status, spec.provider_calls, started,
                              time.monotonic(), speculation="hit")
        self._discard(ticket)
        result = execute_node(node, actual, self._env(), counter)
        result.speculation = "miss"
        return result


def execute(graph: WorkflowGraph, config: RunConfig, gateway: Gateway | None = None) -> RunRecord:
    return Executor(graph, config, gateway).run()
