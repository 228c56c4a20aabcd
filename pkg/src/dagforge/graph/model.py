"""Graph data model: floors, resolution states, ports, nodes, edges."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable

from ..errors import UnknownNodeError

IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

SCALAR_TYPES = ("str", "int", "float", "bool")
PRIMITIVE_TYPES = frozenset(SCALAR_TYPES + tuple(f"list[{t}]" for t in SCALAR_TYPES))

_ZERO = {"str": "", "int": 0, "float": 0.0, "bool": False}


class TypeFloor(enum.IntEnum):
    TEXT = 0
    TYPED = 1
    SPEC = 2
    STUB = 3
    SHIM = 4
    PURE = 5

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "TypeFloor":
        key = text.strip().lower()
        key = FLOOR_ALIASES.get(key, key)
        try:
            return cls[key.upper()]
        except KeyError:
            raise ValueError(f"unknown type floor {text!r}") from None


# `plain`/`plain_text` name the TEXT floor; `code` names the top of the STUB..PURE range.
FLOOR_ALIASES = {"plain": "text", "plain_text": "text", "code": "pure"}


def meet(*floors: TypeFloor) -> TypeFloor:
    if not floors:
        raise ValueError("meet of an empty floor set")
    return min(floors)


class ResolutionState(enum.Enum):
    UNRESOLVED = "unresolved"
    IN_PROGRESS = "in_progress"
    PARTIALLY_RESOLVED = "partially_resolved"
    FULLY_RESOLVED = "fully_resolved"


def default_state(floor: TypeFloor) -> ResolutionState:
    if floor == TypeFloor.TEXT:
        return ResolutionState.UNRESOLVED
    if floor == TypeFloor.PURE:
        return ResolutionState.FULLY_RESOLVED
    return ResolutionState.PARTIALLY_RESOLVED


class EffectClass(enum.Enum):
    FS_READ = "fs_read"
    FS_WRITE = "fs_write"
    NETWORK = "network"
    DATABASE = "database"


IRREVERSIBLE_EFFECTS = frozenset({EffectClass.NETWORK, EffectClass.DATABASE})


class VirtualKind(enum.Enum):
    VIRTUALSTUB = "virtualstub"
    VIRTUALSHIM = "virtualshim"
    VIRTUALPURE = "virtualpure"


# -- primitive types ---------------------------------------------------------

def is_primitive(type_name: str) -> bool:
    return type_name in PRIMITIVE_TYPES


def parse_type(text: str) -> str:
    t = re.sub(r"\s+", "", str(text))
    if t in PRIMITIVE_TYPES:
        return t
    if t.count("list[") > 1:
        raise ValueError(f"type {text!r} nests lists; only one list level is allowed")
    raise ValueError(f"unknown primitive type {text!r}")


def element_type(type_name: str) -> str | None:
    if type_name.startswith("list["):
        return type_name[5:-1]
    return None


def zero_value(type_name: str) -> Any:
    if type_name.startswith("list["):
        return []
    return _ZERO[type_name]


def type_of_value(value: Any) -> str | None:
    """Best-effort primitive type of a Python value; ``None`` if it has none."""
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "str"
    return None


def value_matches(type_name: str, value: Any) -> bool:
    elem = element_type(type_name)
    if elem is not None:
        return isinstance(value, list) and all(type_of_value(v) == elem for v in value)
    return type_of_value(value) == type_name


# -- records -----------------------------------------------------------------

_NO_DEFAULT = None


@dataclass(frozen=True)
class PortSpec:
    name: str
    type: str
    default: Any = _NO_DEFAULT

    @property
    def has_default(self) -> bool:
        return self.default is not None


@dataclass(frozen=True)
class Contract:
    pre: tuple[str, ...] = ()
    post: tuple[str, ...] = ()


@dataclass(frozen=True)
class VirtualCall:
    name: str
    kind: VirtualKind
    inputs: tuple[PortSpec, ...]
    output: str

    def signature(self) -> str:
        params = ", ".join(f"{p.name}:{p.type}" for p in self.inputs)
        return f"({params}) -> (result:{self.output})"


@dataclass(frozen=True)
class Node:
    id: str
    name: str = ""
    floor: TypeFloor = TypeFloor.TEXT
    state: ResolutionState = ResolutionState.UNRESOLVED
    description: str = ""
    context: tuple[str, ...] = ()
    inputs: tuple[PortSpec, ...] = ()
    outputs: tuple[PortSpec, ...] = ()
    spec: Contract | None = None
    body: str | None = None
    virtual_calls: tuple[VirtualCall, ...] = ()
    effects: frozenset[EffectClass] = frozenset()
    deferred: bool = False

    def input(self, name: str) -> PortSpec | None:
        return next((p for p in self.inputs if p.name == name), None)

    def output(self, name: str) -> PortSpec | None:
        return next((p for p in self.outputs if p.name == name), None)

    def virtual(self, name: str) -> VirtualCall | None:
        return next((v for v in self.virtual_calls if v.name == name), None)

    def signature(self) -> str:
        ins = ", ".join(f"{p.name}:{p.type}" for p in self.inputs)
        outs = ", ".join(f"{p.name}:{p.type}" for p in self.outputs)
        return f"({ins}) -> ({outs})"


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    src_port: str | None = None
    dst_port: str | None = None

    @property
    def portless(self) -> bool:
        return self.src_port is None and self.dst_port is None

    def describe(self) -> str:
        a = f"{self.src}.{self.src_port}" if self.src_port else self.src
        b = f"{self.dst}.{self.dst_port}" if self.dst_port else self.dst
        return f"{a} -> {b}"


@dataclass(frozen=True)
class WorkflowGraph:
    nodes: tuple[Node, ...] = ()
    edges: tuple[Edge, ...] = ()
    name: str = ""
    version: int = 1

    @cached_property
    def _index(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _adjacency(self) -> tuple[dict[str, list[Edge]], dict[str, list[Edge]]]:
        incoming: dict[str, list[Edge]] = {n.id: [] for n in self.nodes}
        outgoing: dict[str, list[Edge]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            outgoing.setdefault(e.src, []).append(e)
            incoming.setdefault(e.dst, []).append(e)
        return incoming, outgoing

    def node(self, node_id: str) -> Node:
        try:
            return self._index[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node id {node_id!r}") from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self._index

    @property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def in_edges(self, node_id: str) -> list[Edge]:
        return self._adjacency[0].get(node_id, [])

    def out_edges(self, node_id: str) -> list[Edge]:
        return self._adjacency[1].get(node_id, [])

    def predecessors(self, node_id: str) -> list[str]:
        return list(dict.fromkeys(e.src for e in self.in_edges(node_id)))

    def successors(self, node_id: str) -> list[str]:
        return list(dict.fromkeys(e.dst for e in self.out_edges(node_id)))

    def replace_node(self, node: Node) -> "WorkflowGraph":
        nodes = tuple(node if n.id == node.id else n for n in self.nodes)
        return WorkflowGraph(nodes, self.edges, self.name, self.version)

    def with_edges(self, edges: Iterable[Edge]) -> "WorkflowGraph":
        return WorkflowGraph(self.nodes, tuple(edges), self.name, self.version)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    locus: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.locus}: {self.message}"


@dataclass
class ValidationReport:
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]

    def error(self, locus: str, message: str) -> None:
        self.diagnostics.append(Diagnostic("error", locus, message))

    def warn(self, locus: str, message: str) -> None:
        self.diagnostics.append(Diagnostic("warning", locus, message))

    def extend(self, other: "ValidationReport") -> None:
        self.diagnostics.extend(other.diagnostics)
