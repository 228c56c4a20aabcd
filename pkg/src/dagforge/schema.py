"""Structured-output schemas: scalars, objects and lists over the primitive types."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable

from .graph.model import SCALAR_TYPES, PortSpec, type_of_value


@dataclass(frozen=True)
class SchemaNode:
    kind: str  # "object" | "list" | one of SCALAR_TYPES
    fields: tuple[tuple[str, "SchemaNode"], ...] = ()
    element: "SchemaNode | None" = None
    description: str = ""

    @property
    def is_scalar(self) -> bool:
        return self.kind in SCALAR_TYPES

    @property
    def is_leaf(self) -> bool:
        """Scalars and lists of scalars are filled as single values."""
        return self.is_scalar or (self.kind == "list" and self.element is not None and self.element.is_scalar)

    def field(self, name: str) -> "SchemaNode":
        for k, v in self.fields:
            if k == name:
                return v
        raise KeyError(name)

    @property
    def field_names(self) -> list[str]:
        return [k for k, _ in self.fields]


def scalar(kind: str, description: str = "") -> SchemaNode:
    if kind.startswith("list["):
        return SchemaNode("list", element=SchemaNode(kind[5:-1]), description=description)
    return SchemaNode(kind, description=description)


def obj(fields: dict[str, SchemaNode] | Iterable[tuple[str, SchemaNode]], description: str = "") -> SchemaNode:
    items = tuple(fields.items()) if isinstance(fields, dict) else tuple(fields)
    names = [k for k, _ in items]
    if len(set(names)) != len(names):
        raise ValueError("object field names must be unique")
    return SchemaNode("object", fields=items, description=description)


def list_of(element: SchemaNode, description: str = "") -> SchemaNode:
    return SchemaNode("list", element=element, description=description)


def from_ports(ports: Iterable[PortSpec]) -> SchemaNode:
    return obj([(p.name, scalar(p.type)) for p in ports])


def type_name(schema: SchemaNode) -> str | None:
    """Primitive type name for a leaf schema (``list[int]`` etc.), else None."""
    if schema.is_scalar:
        return schema.kind
    if schema.is_leaf:
        return f"list[{schema.element.kind}]"
    return None


def schema_from_doc(doc: Any) -> SchemaNode:
    if isinstance(doc, str):
        return scalar(doc.replace(" ", ""))
    if not isinstance(doc, dict) or "type" not in doc:
        raise ValueError(f"schema node must be a mapping with 'type': {doc!r}")
    kind = str(doc["type"]).replace(" ", "")
    desc = str(doc.get("description") or "")
    if kind == "object":
        fields = doc.get("fields") or {}
        if not isinstance(fields, dict):
            raise ValueError("object 'fields' must be a mapping")
        return obj([(str(k), schema_from_doc(v)) for k, v in fields.items()], desc)
    if kind == "list":
        if "element" not in doc:
            raise ValueError("list schema needs 'element'")
        elem = schema_from_doc(doc["element"])
        if elem.kind == "list":
            raise ValueError("lists of lists are not supported")
        return list_of(elem, desc)
    if kind.startswith("list[") and kind[5:-1] in SCALAR_TYPES:
        return scalar(kind, desc)
    if kind in SCALAR_TYPES:
        return SchemaNode(kind, description=desc)
    raise ValueError(f"unknown schema type {kind!r}")


def schema_to_doc(schema: SchemaNode) -> dict:
    d: dict[str, Any] = {"type": schema.kind}
    if schema.kind == "object":
        d["fields"] = {k: schema_to_doc(v) for k, v in schema.fields}
    elif schema.kind == "list":
        d["element"] = schema_to_doc(schema.element)
    if schema.description:
        d["description"] = schema.description
    return d


def validate_instance(schema: SchemaNode, value: Any, path: str = "$") -> list[str]:
    """Return a list of problems; empty means ``value`` conforms."""
    if schema.is_scalar:
        if type_of_value(value) != schema.kind:
            return [f"{path}: expected {schema.kind}, got {type(value).__name__}"]
        return []
    if schema.kind == "list":
        if not isinstance(value, list):
            return [f"{path}: expected list, got {type(value).__name__}"]
        problems: list[str] = []
        for i, item in enumerate(value):
            problems += validate_instance(schema.element, item, f"{path}[{i}]")
        return problems
    if not isinstance(value, dict):
        return [f"{path}: expected object, got {type(value).__name__}"]
    problems = []
    names = schema.field_names
    for k in value:
        if k not in names:
            problems.append(f"{path}.{k}: unexpected field")
    for k, sub in schema.fields:
        if k not in value:
            problems.append(f"{path}.{k}: missing")
        else:
            problems += validate_instance(sub, value[k], f"{path}.{k}")
    return problems


def leaf_paths(schema: SchemaNode, prefix: tuple[str, ...] = ()) -> list[tuple[str, ...]]:
    """Paths of every value the fill plan must produce.

    Leaves are scalars, scalar lists and lists of objects (filled whole).
    """
    out: list[tuple[str, ...]] = []
    for name, sub in schema.fields:
        path = prefix + (name,)
        if sub.kind == "object":
            out += leaf_paths(sub, path)
        else:
            out.append(path)
    return out

