"""Static checks that must pass before a run may start."""

from __future__ import annotations

from ..errors import ExprError
from ..expr import parse_program, references
from ..graph import ValidationReport, WorkflowGraph, validate_graph
from ..graph.model import IRREVERSIBLE_EFFECTS
from ..toolspec import TOOL_EFFECTS, TOOL_SIGNATURES, is_whitelisted, tool_group
from .config import RunConfig


def validate_run(graph: WorkflowGraph, config: RunConfig) -> ValidationReport:
    # graph validation already rejects PURE nodes with virtual calls or references
    report = validate_graph(graph)
    for node in graph.nodes:
        locus = f"node {node.id}"
        if node.body is None:
            if node.effects:
                report.error(locus, "declares effects but has no body to produce them")
            continue
        try:
            refs = references(parse_program(node.body))
        except ExprError:
            continue  # already reported by graph validation
        implied = set()
        for tool in sorted(refs["tool"]):
            if tool not in TOOL_SIGNATURES:
                report.error(locus, f"unknown tool {tool}")
                continue
            effect = TOOL_EFFECTS[tool]
            implied.add(effect)
            if not is_whitelisted(tool, config.tools):
                group = tool_group(tool)
                shown = group if not any(t == group or t.startswith(group + ".") for t in config.tools) else tool
                report.error(locus, f"tool not whitelisted: {shown}")
            elif effect in IRREVERSIBLE_EFFECTS and not config.allow_irreversible:
                report.error(locus, f"tool {tool} has irreversible effect {effect.value}; pass --allow-irreversible")
            if effect not in node.effects:
                report.warn(locus, f"tool {tool} implies undeclared effect {effect.value}")
        for effect in sorted(node.effects - implied, key=lambda e: e.value):
            report.error(locus, f"declared effect {effect.value} is not implied by any tool call")
    return report
