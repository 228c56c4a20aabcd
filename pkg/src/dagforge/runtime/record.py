"""Run records and their on-disk form."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..graph import WorkflowGraph
from ..graph.io import dump_yaml, graph_to_doc
from .effects import Journal
from .node_exec import NodeResult


@dataclass
class RunRecord:
    run_id: str
    mode: str
    seed: int
    intelligence: int
    tools: tuple[str, ...]
    status: str  # ok | failed
    results: dict[str, NodeResult]
    order: list[str]
    journal: Journal
    provider_calls: int = 0
    wall_clock: float = 0.0
    started: float = 0.0
    failed_node: str | None = None
    error: str | None = None
    error_exit: int = 0
    rollback_residue: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    graph: WorkflowGraph | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def outputs(self) -> dict[str, dict[str, Any]]:
        return {nid: dict(r.outputs) for nid, r in self.results.items() if r.status != "failed"}

    def to_doc(self, timings: bool = True) -> dict:
        nodes = []
        for nid in self.order:
            r = self.results.get(nid)
            if r is None:
                continue
            entry: dict[str, Any] = {"id": nid, "status": r.status, "outputs": r.outputs,
                                     "provider_calls": r.provider_calls}
            if r.error:
                entry["error"] = r.error
            if r.speculation:
                entry["speculation"] = r.speculation
            if timings:
                entry["timing"] = {
                    "start": round(r.started - self.started, 6),
                    "end": round(r.finished - self.started, 6),
                }
            nodes.append(entry)
        doc: dict[str, Any] = {
            "run_id": self.run_id,
            "status": self.status,
            "mode": self.mode,
            "seed": self.seed,
            "intelligence": self.intelligence,
            "tools": list(self.tools),
            "failed_node": self.failed_node,
            "error": self.error,
            "provider_calls": self.provider_calls,
            "nodes": nodes,
            "journal": {
                "records": len(self.journal),
                "committed": self.journal.committed,
                "rolled_back": self.journal.rolled_back,
            },
            "rollback_residue": list(self.rollback_residue),
            "warnings": list(self.warnings),
        }
        if self.graph is not None:
            doc["graph"] = graph_to_doc(self.graph)
        if timings:
            doc["wall_clock"] = round(self.wall_clock, 6)
        return doc

    def render(self, timings: bool = False) -> str:
        return dump_yaml(self.to_doc(timings=timings))


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_run_files(record: RunRecord, run_dir: Path) -> None:
    _atomic_write(run_dir / "record.yaml", record.render(timings=True))
    _atomic_write(run_dir / "journal.yaml", dump_yaml(record.journal.to_doc()))
