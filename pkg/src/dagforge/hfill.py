"""Hierarchical structured-output fill.

A nested schema is split into levels. At every object the leaf fields
(scalars and scalar lists) form one focused group; each object-valued field is
a branch whose contents are filled one level deeper; a list of objects is a
single group filled whole. Groups in a level run concurrently, and levels act
as barriers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

from .errors import SchemaValidationError
from .gateway import Gateway, GenerationRequest
from .schema import SchemaNode, leaf_paths, obj, type_name, validate_instance

log = logging.getLogger(__name__)

REGENERATION_ATTEMPTS = 2

Path = tuple[str, ...]


@dataclass(frozen=True)
class FillGroup:
    """One unit of a plan.

    ``kind`` is ``"scalars"`` (``fields`` under ``prefix``), ``"list"`` (the
    list of objects at ``prefix + (branch,)``) or ``"object"`` (a structural
    branch that issues no call of its own).
    """

    prefix: Path
    kind: str
    fields: tuple[str, ...] = ()
    branch: str | None = None
    schema: SchemaNode | None = None  # request schema for call-issuing groups

    @property
    def issues_call(self) -> bool:
        return self.kind != "object"

    def paths(self) -> list[Path]:
        """Leaf paths this group is responsible for."""
        if self.kind == "scalars":
            return [self.prefix + (f,) for f in self.fields]
        if self.kind == "list":
            return [self.prefix + (self.branch,)]
        return []

    def label(self) -> str:
        where = ".".join(self.prefix) or "$"
        if self.kind == "scalars":
            return f"{where}{{{','.join(self.fields)}}}"
        return f"{where}.{self.branch} ({self.kind})"


@dataclass(frozen=True)
class FillPlan:
    levels: tuple[tuple[FillGroup, ...], ...]

    @property
    def depth(self) -> int:
        return len(self.levels)

    def groups(self) -> list[FillGroup]:
        return [g for level in self.levels for g in level]

    @property
    def call_count(self) -> int:
        return sum(1 for g in self.groups() if g.issues_call)


@dataclass(frozen=True)
class PartialInstance:
    prefix: Path
    values: dict[str, Any]

    def items(self) -> list[tuple[Path, Any]]:
        return [(self.prefix + (k,), v) for k, v in self.values.items()]


def decompose(schema: SchemaNode) -> FillPlan:
    if schema.kind != "object":
        raise ValueError("fill schemas must have an object at the root")
    levels: list[tuple[FillGroup, ...]] = []
    frontier: list[tuple[Path, SchemaNode]] = [((), schema)]
    while frontier:
        groups: list[FillGroup] = []
        nxt: list[tuple[Path, SchemaNode]] = []
        for prefix, node in frontier:
            leaves = [(n, s) for n, s in node.fields if s.is_leaf]
            if leaves:
                groups.append(FillGroup(prefix, "scalars", tuple(n for n, _ in leaves), schema=obj(leaves)))
            for name, sub in node.fields:
                if sub.is_leaf:
                    continue
                if sub.kind == "object":
                    groups.append(FillGroup(prefix, "object", branch=name))
                    nxt.append((prefix + (name,), sub))
                else:
                    groups.append(FillGroup(prefix, "list", branch=name, schema=obj([(name, sub)])))
        if groups:
            levels.append(tuple(groups))
        frontier = nxt
    # trailing levels made only of empty structural branches carry no work
    while levels and not any(g.issues_call for g in levels[-1]):
        levels.pop()
    return FillPlan(tuple(levels))


def _describe(path: Path, schema: SchemaNode) -> str:
    kind = type_name(schema) or ("list[object]" if schema.kind == "list" else schema.kind)
    line = f"- {'.'.join(path)} ({kind})"
    if schema.description:
        line += f": {schema.description}"
    if schema.kind == "list" and schema.element is not None and schema.element.kind == "object":
        inner = ", ".join(f"{n}: {type_name(s) or s.kind}" for n, s in schema.element.fields)
        line += f" — each element {{{inner}}}"
    return line


def group_prompt(context: str, group: FillGroup, attempt: int = 0) -> str:
    lines = [context.rstrip(), "", "Fill exactly these fields:"]
    for name, sub in group.schema.fields:
        lines.append(_describe(group.prefix + (name,), sub))
    if attempt:
        lines.append(f"(regeneration attempt {attempt}: previous output failed validation)")
    return "\n".join(lines)


def fill_group(gateway: Gateway, group: FillGroup, context: str, seed: int, intelligence: int) -> PartialInstance:
    last: SchemaValidationError | None = None
    for attempt in range(1 + REGENERATION_ATTEMPTS):
        req = GenerationRequest("fill_group", group_prompt(context, group, attempt), group.schema, seed, intelligence)
        try:
            payload = gateway.generate(req).payload
        except SchemaValidationError as exc:
            log.info("group %s failed validation (attempt %d): %s", group.label(), attempt, exc)
            last = exc
            continue
        return PartialInstance(group.prefix, payload)
    raise SchemaValidationError(f"group {group.label()} failed validation after {REGENERATION_ATTEMPTS} regenerations", last.causes if last else None)


def fill(
    schema: SchemaNode,
    context: str,
    gateway: Gateway,
    seed: int = 0,
    intelligence: int = 5,
    max_concurrency: int | None = None,
) -> dict:
    """Fill ``schema`` with one ``fill_group`` request per call-issuing group.

    ``max_concurrency=1`` gives the sequential baseline.
    """
    plan = decompose(schema)
    partials: list[PartialInstance] = []
    for level in plan.levels:
        calls = [g for g in level if g.issues_call]
        if not calls:
            continue
        workers = max(1, min(len(calls), max_concurrency or len(calls)))
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="hfill") as pool:
            futures = [pool.submit(fill_group, gateway, g, context, seed, intelligence) for g in calls]
            partials.extend(f.result() for f in futures)
    return merge(partials, schema)


def _skeleton(schema: SchemaNode) -> dict:
    return {n: _skeleton(s) for n, s in schema.fields if s.kind == "object"}


def merge(partials: list[PartialInstance], schema: SchemaNode) -> dict:
    """Assemble partials by path; overlapping or missing paths are errors."""
    instance = _skeleton(schema)
    seen: set[Path] = set()
    for partial in partials:
        for path, value in partial.items():
            if path in seen:
                raise ValueError(f"overlapping partials at {'.'.join(path)}")
            seen.add(path)
            target = instance
            for step in path[:-1]:
                target = target.setdefault(step, {})
            target[path[-1]] = value
    missing = [p for p in leaf_paths(schema) if p not in seen]
    if missing:
        raise ValueError("partials missing path(s): " + ", ".join(".".join(p) for p in missing))
    problems = validate_instance(schema, instance)
    if problems:
        raise SchemaValidationError("merged instance invalid: " + "; ".join(problems[:5]))
    return instance
