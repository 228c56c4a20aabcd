"""Effect journal, inverse operations and the workspace-confined tool box.

Every tool call appends an :class:`EffectRecord` *before* the effect is
performed, so a crash mid-effect still leaves enough information to undo it.
"""

from __future__ import annotations

import base64
import logging
import os
import shutil
import threading
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..errors import ToolError
from ..graph.model import IRREVERSIBLE_EFFECTS, EffectClass
from ..toolspec import TOOL_EFFECTS, TOOL_SIGNATURES, is_whitelisted

log = logging.getLogger(__name__)

# inverse kinds
DELETE_CREATED = "delete_created"
RESTORE_BYTES = "restore_bytes"
NONE_IRREVERSIBLE = "none_irreversible"
NOOP = "noop"


@dataclass(frozen=True)
class EffectRecord:
    seq: int
    node: str
    tool: str
    effect: EffectClass
    description: str
    inverse: str
    path: str | None = None
    created_dirs: tuple[str, ...] = ()
    prior: bytes | None = None

    @property
    def irreversible(self) -> bool:
        return self.inverse == NONE_IRREVERSIBLE

    def to_doc(self) -> dict:
        inv: dict[str, Any] = {"kind": self.inverse}
        if self.path is not None:
            inv["path"] = self.path
        if self.created_dirs:
            inv["created_dirs"] = list(self.created_dirs)
        if self.prior is not None:
            inv["prior_base64"] = base64.b64encode(self.prior).decode("ascii")
        return {
            "seq": self.seq,
            "node": self.node,
            "tool": self.tool,
            "effect": self.effect.value,
            "description": self.description,
            "inverse": inv,
        }


class Journal:
    """Totally ordered effect log for one run (or one speculation overlay)."""

    def __init__(self, run_id: str, root: Path) -> None:
        self.run_id = run_id
        self.root = Path(root)
        self.records: list[EffectRecord] = []
        self.committed = False
        self.rolled_back = False
        self._lock = threading.Lock()

    def append(self, **fields) -> EffectRecord:
        with self._lock:
            rec = EffectRecord(seq=len(self.records) + 1, **fields)
            self.records.append(rec)
            return rec

    def __len__(self) -> int:
        return len(self.records)

    def commit(self) -> None:
        self.committed = True

    def rollback(self) -> list[str]:
        """Apply inverses newest-first; return a residue list of what could not be undone."""
        residue: list[str] = []
        with self._lock:
            for rec in reversed(self.records):
                try:
                    self._undo(rec, residue)
                except OSError as exc:
                    residue.append(f"#{rec.seq} {rec.tool} {rec.path}: {exc}")
            self.committed = False
            self.rolled_back = True
        return residue

    def _undo(self, rec: EffectRecord, residue: list[str]) -> None:
        if rec.inverse == NOOP:
            return
        if rec.inverse == NONE_IRREVERSIBLE:
            residue.append(f"#{rec.seq} {rec.tool}: {rec.description} (irreversible)")
            return
        target = self.root / rec.path
        if rec.inverse == RESTORE_BYTES:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(rec.prior)
        elif rec.inverse == DELETE_CREATED:
            if target.is_file() or target.is_symlink():
                target.unlink()
            for d in rec.created_dirs:  # deepest first
                p = self.root / d
                if p.is_dir() and not any(p.iterdir()):
                    p.rmdir()

    def to_doc(self) -> dict:
        return {
            "run_id": self.run_id,
            "committed": self.committed,
            "rolled_back": self.rolled_back,
            "records": [r.to_doc() for r in self.records],
        }


def confine(root: Path, rel: str) -> Path:
    """Resolve ``rel`` inside ``root``; absolute paths and escapes are refused."""
    if not isinstance(rel, str) or not rel or os.path.isabs(rel):
        raise ToolError(f"path must be relative to the workspace: {rel!r}")
    base = root.resolve()
    target = (base / rel).resolve()
    if target != base and base not in target.parents:
        raise ToolError(f"path escapes the workspace: {rel!r}")
    if target == base:
        raise ToolError(f"path names the workspace itself: {rel!r}")
    return target


class Toolbox:
    """Executes ``tool.*`` calls for one journal.

    With ``overlay`` set, writes land in the overlay directory and reads prefer
    it, falling back to the workspace; the bytes seen on such fall-through
    reads are kept in ``read_set`` so a speculation can be validated later.
    """

    def __init__(
        self,
        root: Path,
        journal: Journal,
        whitelist: frozenset[str],
        allow_irreversible: bool = False,
        http_fixtures: dict[str, str] | None = None,
        overlay: Path | None = None,
    ) -> None:
        self.root = Path(root)
        self.journal = journal
        self.whitelist = whitelist
        self.allow_irreversible = allow_irreversible
        self.http_fixtures = http_fixtures or {}
        self.overlay = overlay
        self.read_set: dict[str, bytes | None] = {}
        self.writes: list[tuple[str, str]] = []
        self._lock = threading.Lock()

    def hook(self, node_id: str):
        return lambda name, args: self.call(node_id, name, list(args))

    def call(self, node_id: str, name: str, args: list) -> Any:
        if name not in TOOL_SIGNATURES:
            raise ToolError(f"unknown tool {name!r}")
        if not is_whitelisted(name, self.whitelist):
            raise ToolError(f"tool not whitelisted: {name}")
        effect = TOOL_EFFECTS[name]
        if effect in IRREVERSIBLE_EFFECTS and not self.allow_irreversible:
            raise ToolError(f"tool {name} has irreversible effect {effect.value}; run with --allow-irreversible")
        if name == "fs.read":
            return self._read(node_id, args[0])
        if name == "fs.write":
            return self._write(node_id, args[0], args[1])
        return self._http_get(node_id, args[0])

    # -- fs ------------------------------------------------------------------------

    def _read(self, node_id: str, rel: str) -> str:
        source = self.root
        if self.overlay is not None and confine(self.overlay, rel).is_file():
            source = self.overlay
        path = confine(source, rel)
        self.journal.append(node=node_id, tool="fs.read", effect=EffectClass.FS_READ,
                            description=f"read {rel}", inverse=NOOP, path=rel)
        if not path.is_file():
            if self.overlay is not None:
                with self._lock:
                    self.read_set.setdefault(rel, None)
            raise ToolError(f"fs.read: no such file {rel!r}")
        data = path.read_bytes()
        if self.overlay is not None and source is self.root:
            with self._lock:
                self.read_set.setdefault(rel, data)
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError:
            raise ToolError(f"fs.read: {rel!r} is not utf-8 text") from None

    def _write(self, node_id: str, rel: str, data: str) -> bool:
        base = self.overlay if self.overlay is not None else self.root
        path = confine(base, rel)
        if path.is_dir():
            raise ToolError(f"fs.write: {rel!r} is a directory")
        if path.exists():
            prior = path.read_bytes()
            self.journal.append(node=node_id, tool="fs.write", effect=EffectClass.FS_WRITE,
                                description=f"overwrite {rel}", inverse=RESTORE_BYTES, path=rel, prior=prior)
        else:
            created = []
            parent = path.parent
            resolved_base = base.resolve()
            while parent != resolved_base and not parent.exists():
                created.append(str(parent.relative_to(resolved_base)))
                parent = parent.parent
            self.journal.append(node=node_id, tool="fs.write", effect=EffectClass.FS_WRITE,
                                description=f"create {rel}", inverse=DELETE_CREATED, path=rel,
                                created_dirs=tuple(created))
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data.encode("utf-8"))
        with self._lock:
            self.writes.append((rel, data))
        return True

    # -- network -------------------------------------------------------------------

    def _http_get(self, node_id: str, url: str) -> str:
        self.journal.append(node=node_id, tool="http.get", effect=EffectClass.NETWORK,
                            description=f"GET {url}", inverse=NONE_IRREVERSIBLE)
        if url in self.http_fixtures:
            return self.http_fixtures[url]
        try:
            with urllib.request.urlopen(url, timeout=15) as resp:
                return resp.read().decode("utf-8", errors="replace")
        except (OSError, ValueError) as exc:
            raise ToolError(f"http.get {url}: {exc}") from None


def remove_tree(path: Path) -> None:
    shutil.rmtree(path, ignore_errors=True)


def snapshot(root: Path, exclude: tuple[str, ...] = ("runs", "cache")) -> dict[str, bytes]:
    """Map of relative path -> bytes for every file under ``root`` (top-level ``exclude`` skipped)."""
    out: dict[str, bytes] = {}
    root = Path(root)
    for dirpath, dirnames, filenames in os.walk(root):
        rel_dir = Path(dirpath).relative_to(root)
        if rel_dir == Path("."):
            dirnames[:] = [d for d in dirnames if d not in exclude]
        for d in dirnames:
            out.setdefault(str(rel_dir / d) + "/", b"")
        for f in filenames:
            out[str(rel_dir / f)] = (Path(dirpath) / f).read_bytes()
    return out
