"""One-shot pipelines: natural language straight to a run."""

from __future__ import annotations

import dataclasses
import logging

from ..compiler import CompileManifest, compile_graph, compose, resolve
from ..errors import DagforgeError
from ..gateway import Gateway
from ..graph import TypeFloor
from .config import RunConfig
from .executor import execute
from .record import RunRecord

log = logging.getLogger(__name__)


class StageError(DagforgeError):
    """Wraps a failure with the pipeline stage it came from (keeps the exit code)."""

    def __init__(self, stage: str, cause: DagforgeError) -> None:
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code
        super().__init__(f"{stage}: {cause}")


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except DagforgeError as exc:
        raise StageError(name, exc) from exc


def interpret(nl: str, config: RunConfig, gateway: Gateway) -> RunRecord:
    """compose -> resolve to SHIM -> execute (dynamic), one seed throughout."""
    cfg = dataclasses.replace(config, mode="dynamic")
    graph = _stage("compose", compose, nl, gateway, seed=cfg.seed, intelligence=cfg.intelligence)
    graph = _stage("resolve", resolve, graph, TypeFloor.SHIM, gateway, seed=cfg.seed, intelligence=cfg.intelligence)
    record = _stage("execute", execute, graph, cfg, gateway)
    record.graph = graph
    return record


def synthesize(nl: str, config: RunConfig, gateway: Gateway) -> tuple[CompileManifest, RunRecord]:
    """compose -> resolve to PURE (SHIM accepted with a warning) -> compile -> execute."""
    graph = _stage("compose", compose, nl, gateway, seed=config.seed, intelligence=config.intelligence)
    manifest = _stage("compile", compile_graph, graph, gateway, TypeFloor.PURE,
                      seed=config.seed, intelligence=config.intelligence)
    record = _stage("execute", execute, manifest.graph, config, gateway)
    record.warnings = list(manifest.warnings) + record.warnings
    return manifest, record


__all__ = ["StageError", "interpret", "synthesize"]
