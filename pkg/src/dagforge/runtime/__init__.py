"""The dagent runtime: validation, scheduling, effects, synthesis and JIT modes."""

from .config import MODES, RunConfig
from .effects import EffectRecord, Journal, Toolbox, snapshot
from .executor import Executor, execute, gather_inputs, run_id_for
from .node_exec import NodeEnv, NodeResult, execute_node
from .pipeline import StageError, interpret, synthesize
from .record import RunRecord
from .synthesis import SynthesisCache, synthesize_virtual, upstream_digest
from .validate import validate_run

__all__ = [
    "MODES",
    "EffectRecord",
    "Executor",
    "Journal",
    "NodeEnv",
    "NodeResult",
    "RunConfig",
    "RunRecord",
    "StageError",
    "SynthesisCache",
    "Toolbox",
    "execute",
    "execute_node",
    "gather_inputs",
    "interpret",
    "run_id_for",
    "snapshot",
    "synthesize",
    "synthesize_virtual",
    "upstream_digest",
    "validate_run",
]
