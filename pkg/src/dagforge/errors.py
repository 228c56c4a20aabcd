"""Exception hierarchy shared by every dagforge subsystem.

Each family maps onto one CLI exit code (see ``dagforge.cli``).
"""

from __future__ import annotations


class DagforgeError(Exception):
    exit_code = 2


class UsageError(DagforgeError):
    exit_code = 4


class GraphError(DagforgeError):
    """Malformed or invariant-violating graph document."""

    exit_code = 1


class GraphParseError(GraphError):
    def __init__(self, message: str, locus: str | None = None) -> None:
        self.locus = locus
        super().__init__(f"{locus}: {message}" if locus else message)


class GraphValidationError(GraphError):
    def __init__(self, report) -> None:
        self.report = report
        errors = [d for d in report.diagnostics if d.severity == "error"]
        lines = "; ".join(f"{d.locus}: {d.message}" for d in errors[:5])
        super().__init__(f"graph failed validation ({len(errors)} errors): {lines}")


class UnknownNodeError(GraphError, KeyError):
    """A node id that is not in the graph (also a KeyError for mapping-style callers)."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class CycleError(GraphError):
    def __init__(self, cycle: list[str]) -> None:
        self.cycle = cycle
        super().__init__("cycle detected: " + " -> ".join(cycle + cycle[:1]))


class ExprError(DagforgeError):
    """Syntax or type error in expression-language source."""

    exit_code = 1

    def __init__(self, message: str, line: int = 0, col: int = 0) -> None:
        self.line = line
        self.col = col
        self.bare = message
        super().__init__(f"{line}:{col}: {message}" if line else message)


class EvalError(DagforgeError):
    """Runtime failure inside an expression program (division by zero, bad index, ...)."""


class ProviderError(DagforgeError):
    exit_code = 3


class AllProvidersFailed(ProviderError):
    def __init__(self, causes: list[tuple[str, str]]) -> None:
        self.causes = causes
        detail = "; ".join(f"{pid}: {msg}" for pid, msg in causes)
        super().__init__(f"all providers failed: {detail}")


class SchemaValidationError(ProviderError):
    def __init__(self, message: str, causes: list[tuple[str, str]] | None = None) -> None:
        self.causes = causes or []
        detail = "; ".join(f"{pid}: {msg}" for pid, msg in self.causes[:3])
        super().__init__(f"{message} ({detail})" if detail else message)


class CompileError(DagforgeError):
    exit_code = 1


class ResolutionIncomplete(CompileError):
    """Raised when nodes are still below the target floor after the final pass."""

    def __init__(self, graph, unresolved: list[str], causes: dict[str, BaseException]) -> None:
        self.graph = graph
        self.unresolved = unresolved
        self.causes = causes
        if causes and len(causes) == len(unresolved) and all(
            isinstance(c, ProviderError) for c in causes.values()
        ):
            self.exit_code = ProviderError.exit_code
        super().__init__("unresolved after final pass: " + ", ".join(unresolved))


class RunValidationError(DagforgeError):
    exit_code = 1

    def __init__(self, report) -> None:
        self.report = report
        msgs = [f"{d.locus}: {d.message}" for d in report.diagnostics if d.severity == "error"]
        super().__init__("run validation failed: " + "; ".join(msgs[:5]))


class ExecutionError(DagforgeError):
    exit_code = 2


class ContractViolation(ExecutionError):
    pass


class SynthesisError(ExecutionError):
    pass


class ToolError(ExecutionError):
    pass


class StoreError(DagforgeError):
    exit_code = 1


class AgilinkUriError(StoreError):
    def __init__(self, text: str, position: int, message: str) -> None:
        self.text = text
        self.position = position
        super().__init__(f"{message}\n  {text}\n  {' ' * position}^")
