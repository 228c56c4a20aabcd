"""Prompt assembly for resolver steps.

Every prompt is built from one node and its neighborhood slice only. Nodes are
introduced with a ``[node <id>]`` marker so instrumentation can check that a
prompt never mentions ids outside the slice.
"""

from __future__ import annotations

import re

from ..graph import ContextSlice, Node

NODE_MARKER_RE = re.compile(r"\[node ([A-Za-z_][A-Za-z0-9_]*)\]")


def _ports(ports) -> str:
    return ", ".join(f"{p.name}:{p.type}" for p in ports) or "-"


def describe_node(node: Node, role: str, full: bool) -> list[str]:
    head = f"[node {node.id}] role={role} floor={node.floor.label}"
    if node.name:
        head += f" name={node.name!r}"
    lines = [head, f"  description: {node.description}"]
    if not full:
        if node.outputs:
            lines.append(f"  outputs: {_ports(node.outputs)}")
        return lines
    for note in node.context:
        lines.append(f"  note: {note}")
    if node.inputs or node.outputs:
        lines.append(f"  inputs: {_ports(node.inputs)}")
        lines.append(f"  outputs: {_ports(node.outputs)}")
    if node.spec is not None:
        for cond in node.spec.pre:
            lines.append(f"  pre: {cond}")
        for cond in node.spec.post:
            lines.append(f"  post: {cond}")
    return lines


def build_prompt(task: str, sl: ContextSlice, extra: list[str] = ()) -> str:
    center = sl.nodes[0]
    lines = [f"Task: {task}", ""]
    lines += describe_node(center, "target", full=True)
    ups, downs = sl.upstream(), sl.downstream()
    if ups or downs:
        lines.append("")
        lines.append("Neighborhood:")
        for n in ups:
            lines += describe_node(n, "upstream", full=False)
        for n in downs:
            lines += describe_node(n, "downstream", full=False)
    if extra:
        lines.append("")
        lines += list(extra)
    return "\n".join(lines)


def referenced_ids(prompt: str) -> set[str]:
    return set(NODE_MARKER_RE.findall(prompt))
