"""Graph data model, validation, analysis and text serialization."""

from .io import (
    canonical_json,
    canonical_yaml,
    digest,
    dump_yaml,
    graph_digest,
    graph_from_doc,
    graph_to_doc,
    load_text,
    node_to_doc,
    parse_graph,
    render_graph,
)
from .model import (
    Contract,
    Diagnostic,
    Edge,
    EffectClass,
    Node,
    PortSpec,
    ResolutionState,
    TypeFloor,
    ValidationReport,
    VirtualCall,
    VirtualKind,
    WorkflowGraph,
    default_state,
    meet,
    zero_value,
)
from .ops import (
    ContextSlice,
    graph_floor,
    neighborhood,
    partition_independent,
    topo_layers,
    topo_order,
    validate_graph,
)

__all__ = [
    "ContextSlice",
    "Contract",
    "Diagnostic",
    "Edge",
    "EffectClass",
    "Node",
    "PortSpec",
    "ResolutionState",
    "TypeFloor",
    "ValidationReport",
    "VirtualCall",
    "VirtualKind",
    "WorkflowGraph",
    "canonical_json",
    "canonical_yaml",
    "default_state",
    "digest",
    "dump_yaml",
    "graph_digest",
    "graph_floor",
    "graph_from_doc",
    "graph_to_doc",
    "load_text",
    "meet",
    "neighborhood",
    "node_to_doc",
    "parse_graph",
    "partition_independent",
    "render_graph",
    "topo_layers",
    "topo_order",
    "validate_graph",
    "zero_value",
]
