"""The ``dagify`` (compile-side) and ``dagent`` (run-side) command lines.

Graphs, manifests and run records go to standard output so commands pipe
into each other; diagnostics (and ``--ascii`` drawings) go to standard error.

Exit codes: 0 ok, 1 validation error, 2 execution error, 3 provider error,
4 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, TextIO

import yaml

from .compiler import (
    compile_graph,
    compose,
    is_manifest_doc,
    manifest_from_doc,
    refine,
    render_manifest,
    resolve,
)
from .errors import DagforgeError, GraphParseError, ResolutionIncomplete, UsageError
from .gateway import Gateway, gateway_from_env
from .graph import TypeFloor, WorkflowGraph, graph_from_doc, render_graph, validate_graph
from .graph.io import canonical_yaml, dump_yaml, graph_to_doc
from .runtime import MODES, RunConfig, execute, interpret, synthesize, validate_run
from .store import ArtifactStore, is_uri, parse_uri

log = logging.getLogger("dagforge.cli")

EXIT_OK, EXIT_VALIDATION, EXIT_EXECUTION, EXIT_PROVIDER, EXIT_USAGE = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage problems as :class:`UsageError` (exit 4)."""

    out: TextIO | None = None

    def error(self, message: str):  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message} (see '{self.prog} --help')")

    def _print_message(self, message: str, file=None) -> None:
        if message:
            (_Parser.out or file or sys.stderr).write(message)


@dataclasses.dataclass
class Context:
    stdin: TextIO
    stdout: TextIO
    stderr: TextIO
    env: dict[str, str]
    gateway_factory: Callable[[Path], Gateway]
    _gateway: Gateway | None = None

    @property
    def workspace(self) -> Path:
        return Path(self.env.get("DAGFORGE_WORKSPACE") or os.getcwd())

    @property
    def gateway(self) -> Gateway:
        if self._gateway is None:
            try:
                self._gateway = self.gateway_factory(self.workspace)
            except (OSError, ValueError, yaml.YAMLError) as exc:
                raise UsageError(f"cannot load providers from DAGFORGE_PROVIDERS: {exc}") from None
        return self._gateway

    @property
    def store(self) -> ArtifactStore:
        return ArtifactStore(env=self.env)

    def diag(self, msg: str) -> None:
        self.stderr.write(msg.rstrip("\n") + "\n")


# -- argument types ---------------------------------------------------------------------


def _floor(text: str) -> TypeFloor:
    try:
        return TypeFloor.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{exc}; use text|typed|spec|stub|shim|pure") from None


def _unsigned(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return value


def _positive(text: str) -> int:
    value = _unsigned(text)
    if value < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def _intelligence(text: str) -> int:
    value = _unsigned(text)
    if not 1 <= value <= 10:
        raise argparse.ArgumentTypeError("intelligence must be in 1..10")
    return value


def _tools(text: str) -> frozenset[str]:
    return frozenset(t.strip() for t in text.split(",") if t.strip())


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=_unsigned, default=0, help="seed forwarded to every provider request")
    p.add_argument("--intelligence", type=_intelligence, default=5, help="minimum provider tier (1..10)")


def _add_output_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output-agilink", metavar="URI",
                   help="also store the primary output as canonical yaml at agilink://<store>/<name>")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--jit", choices=MODES, default="dynamic", help="JIT mode")
    p.add_argument("--tools", type=_tools, default=frozenset(), help="comma-separated tool whitelist, e.g. fs,http")
    _add_model_flags(p)
    p.add_argument("--parallelism", type=_positive, default=4)
    p.add_argument("--allow-irreversible", action="store_true", help="permit network/database effects")
    _add_output_flag(p)


# -- input / output ---------------------------------------------------------------------


def _read_input(ctx: Context, source: str) -> Any:
    if source == "-":
        text = ctx.stdin.read()
        origin = "<stdin>"
    elif is_uri(source):
        text = ctx.store.get(parse_uri(source)).decode("utf-8")
        origin = source
    else:
        path = Path(source)
        if not path.is_file():
            raise UsageError(f"no such input {source!r}; pass a file path, '-' for stdin, or an agilink:// URI")
        text = path.read_text(encoding="utf-8")
        origin = source
    if not text.strip():
        raise UsageError(f"input {origin} is empty")
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise GraphParseError(f"not valid yaml/json: {exc}", origin) from None


def _load_graph(ctx: Context, source: str, allow_manifest: bool = True) -> WorkflowGraph:
    doc = _read_input(ctx, source)
    if is_manifest_doc(doc):
        if not allow_manifest:
            raise UsageError("expected a graph document, got a manifest")
        return manifest_from_doc(doc).graph
    return graph_from_doc(doc)


def _emit(ctx: Context, text: str, doc: Any, output_uri: str | None) -> None:
    ctx.stdout.write(text)
    if output_uri:
        if "@" in output_uri:
            raise UsageError("--output-agilink takes agilink://<store>/<name> without a version")
        uri = parse_uri(output_uri)
        stored = ctx.store.put(canonical_yaml(doc).encode("utf-8"), uri.name, uri.store)
        ctx.diag(f"stored {stored}")


def _emit_graph(ctx: Context, graph: WorkflowGraph, fmt: str = "yaml", output_uri: str | None = None) -> None:
    _emit(ctx, render_graph(graph, fmt), graph_to_doc(graph), output_uri)


# -- dagify ---------------------------------------------------------------------------------


def _dagify_compose(ctx: Context, a: argparse.Namespace) -> int:
    text = " ".join(a.text).strip()
    if not text:
        raise UsageError("dagify compose: missing <text>; e.g. dagify compose \"fetch -> clean -> load\"")
    graph = compose(text, ctx.gateway, target=a.type, seed=a.seed, intelligence=a.intelligence)
    _emit_graph(ctx, graph, a.format, a.output_agilink)
    if a.ascii:
        ctx.stderr.write(render_graph(graph, "ascii"))
    return EXIT_OK


def _dagify_refine(ctx: Context, a: argparse.Namespace) -> int:
    graph = refine(_load_graph(ctx, a.input, allow_manifest=False), a.node, a.note)
    _emit_graph(ctx, graph, "yaml", a.output_agilink)
    return EXIT_OK


def _dagify_resolve(ctx: Context, a: argparse.Namespace) -> int:
    graph = _load_graph(ctx, a.input, allow_manifest=False)
    try:
        graph = resolve(graph, a.type_floor, ctx.gateway, seed=a.seed, intelligence=a.intelligence)
    except ResolutionIncomplete as exc:
        # keep the partial progress on stdout so it can be resumed
        _emit_graph(ctx, exc.graph, "yaml", None)
        raise
    _emit_graph(ctx, graph, "yaml", a.output_agilink)
    return EXIT_OK


def _dagify_compile(ctx: Context, a: argparse.Namespace) -> int:
    graph = _load_graph(ctx, a.input)
    gateway = ctx.gateway if a.t is not None else None
    manifest = compile_graph(graph, gateway, a.t, seed=a.seed, intelligence=a.intelligence)
    for w in manifest.warnings:
        ctx.diag(f"warning: {w}")
    _emit(ctx, render_manifest(manifest), manifest.to_doc(), a.output_agilink)
    if a.ascii:
        ctx.stderr.write(render_graph(manifest.graph, "ascii"))
    return EXIT_OK


def _dagify_fsck(ctx: Context, a: argparse.Namespace) -> int:
    checked, problems = ctx.store.fsck()
    for p in problems:
        ctx.diag(f"fsck: {p}")
    ctx.stdout.write(dump_yaml({"root": str(ctx.store.root), "objects": checked, "problems": problems}))
    return EXIT_OK if not problems else EXIT_VALIDATION


def dagify_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dagify", description="Compose, refine, resolve and compile workflow graphs.")
    sub = parser.add_subparsers(dest="verb", metavar="verb", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("compose", help="natural language -> graph")
    p.add_argument("text", nargs="*", help="workflow description")
    p.add_argument("--type", type=_floor, default=TypeFloor.TEXT, help="floor to resolve the new graph to")
    p.add_argument("-f", "--format", choices=("yaml", "json"), default="yaml")
    p.add_argument("--ascii", action="store_true", help="draw the graph on stderr")
    _add_model_flags(p)
    _add_output_flag(p)
    p.set_defaults(run=_dagify_compose)

    p = sub.add_parser("refine", help="append a context note to one node (or all)")
    p.add_argument("input")
    p.add_argument("--node", default=None)
    p.add_argument("--note", required=True)
    _add_output_flag(p)
    p.set_defaults(run=_dagify_refine)

    p = sub.add_parser("resolve", help="raise node floors")
    p.add_argument("input")
    p.add_argument("--type-floor", type=_floor, default=TypeFloor.PURE)
    _add_model_flags(p)
    _add_output_flag(p)
    p.set_defaults(run=_dagify_resolve)

    p = sub.add_parser("compile", help="graph -> hash-stamped manifest")
    p.add_argument("input")
    p.add_argument("-t", type=_floor, default=None, metavar="FLOOR", help="resolve to shim|pure first")
    p.add_argument("--build-target", choices=("manifest",), default="manifest")
    p.add_argument("--ascii", action="store_true", help="draw the graph on stderr")
    _add_model_flags(p)
    _add_output_flag(p)
    p.set_defaults(run=_dagify_compile)

    p = sub.add_parser("fsck", help="verify every object hash in the artifact store")
    p.set_defaults(run=_dagify_fsck)
    return parser


# -- dagent ---------------------------------------------------------------------------------


def _run_config(ctx: Context, a: argparse.Namespace) -> RunConfig:
    try:
        return RunConfig(ctx.workspace, mode=a.jit, tools=a.tools, seed=a.seed, intelligence=a.intelligence,
                         parallelism=a.parallelism, allow_irreversible=a.allow_irreversible)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _finish_run(ctx: Context, record, output_uri: str | None) -> int:
    for w in record.warnings:
        ctx.diag(f"warning: {w}")
    _emit(ctx, record.render(timings=False), record.to_doc(timings=False), output_uri)
    ctx.diag(f"run {record.run_id}: {record.status} ({record.provider_calls} provider calls)")
    if record.ok:
        return EXIT_OK
    ctx.diag(f"error: node {record.failed_node}: {record.error}")
    return record.error_exit or EXIT_EXECUTION


def _dagent_validate(ctx: Context, a: argparse.Namespace) -> int:
    graph = _load_graph(ctx, a.input)
    report = validate_graph(graph)
    for d in report.diagnostics:
        ctx.diag(str(d))
    ctx.stdout.write(dump_yaml({"ok": report.ok, "errors": len(report.errors),
                                "warnings": len(report.diagnostics) - len(report.errors)}))
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _dagent_execute(ctx: Context, a: argparse.Namespace) -> int:
    graph = _load_graph(ctx, a.input)
    config = _run_config(ctx, a)
    report = validate_run(graph, config)
    for d in report.diagnostics:
        ctx.diag(str(d))
    if not report.ok:
        return EXIT_VALIDATION
    return _finish_run(ctx, execute(graph, config, ctx.gateway), a.output_agilink)


def _nl(a: argparse.Namespace) -> str:
    text = " ".join(a.text).strip()
    if not text:
        raise UsageError(f"dagent {a.verb}: missing <text>")
    return text


def _dagent_interpret(ctx: Context, a: argparse.Namespace) -> int:
    text = _nl(a)
    return _finish_run(ctx, interpret(text, _run_config(ctx, a), ctx.gateway), a.output_agilink)


def _dagent_synthesize(ctx: Context, a: argparse.Namespace) -> int:
    text = _nl(a)
    manifest, record = synthesize(text, _run_config(ctx, a), ctx.gateway)
    ctx.stdout.write(render_manifest(manifest))
    ctx.stdout.write("---\n")
    return _finish_run(ctx, record, a.output_agilink)


def dagent_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dagent", description="Validate and execute workflow graphs and manifests.")
    sub = parser.add_subparsers(dest="verb", metavar="verb", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("validate", help="static checks")
    p.add_argument("input")
    p.set_defaults(run=_dagent_validate)

    p = sub.add_parser("execute", help="run a graph or manifest")
    p.add_argument("input")
    _add_run_flags(p)
    p.set_defaults(run=_dagent_execute)

    for verb, fn, help_ in (("interpret", _dagent_interpret, "compose -> resolve shim -> run"),
                            ("synthesize", _dagent_synthesize, "compose -> compile pure -> run")):
        p = sub.add_parser(verb, help=help_)
        p.add_argument("text", nargs="*")
        _add_run_flags(p)
        p.set_defaults(run=fn)
    return parser


# -- entry points ---------------------------------------------------------------------------


def main(
    tool: str,
    argv: list[str] | None = None,
    stdin: TextIO | None = None,
    stdout: TextIO | None = None,
    stderr: TextIO | None = None,
    env: dict[str, str] | None = None,
    gateway: Gateway | None = None,
) -> int:
    """Run ``tool`` (``dagify`` or ``dagent``) and return its exit code."""
    env = dict(os.environ if env is None else env)
    ctx = Context(
        stdin=stdin or sys.stdin,
        stdout=stdout or sys.stdout,
        stderr=stderr or sys.stderr,
        env=env,
        gateway_factory=lambda ws: gateway_from_env(ws, env),
        _gateway=gateway,
    )
    parser = dagify_parser() if tool == "dagify" else dagent_parser()
    _Parser.out = ctx.stdout
    try:
        args = parser.parse_args(argv)
        return args.run(ctx, args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        ctx.diag(f"usage error: {exc}")
        return EXIT_USAGE
    except DagforgeError as exc:
        ctx.diag(f"error: {exc}")
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        ctx.diag(f"error: {exc}")
        return EXIT_EXECUTION


def _configure_logging() -> None:
    level = os.environ.get("DAGFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def dagify_main() -> None:
    _configure_logging()
    sys.exit(main("dagify"))


def dagent_main() -> None:
    _configure_logging()
    sys.exit(main("dagent"))


__all__ = ["dagent_main", "dagent_parser", "dagify_main", "dagify_parser", "main"]
