"""A file-backed, content-addressed artifact store behind ``agilink://`` URIs.

Layout of one store (``<root>/<store>/``)::

    objects/<sha256>                      immutable bytes, named by their hash
    names/<name>/versions/<sha256>.yaml   entry metadata (name, kind, created_at)
    names/<name>/latest                   mutable pointer: the newest version hash

Objects and version entries are create-once; ``latest`` is replaced by
atomic rename, so concurrent puts never leave a torn pointer.
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .errors import AgilinkUriError, StoreError
from .graph.io import dump_yaml

log = logging.getLogger(__name__)

SCHEME = "agilink://"
NAME_RE = re.compile(r"[a-z0-9_-]+")
VERSION_RE = re.compile(r"latest|[0-9a-f]{4,64}")
MEDIA_KINDS = ("graph", "manifest", "run-record", "schema")
DEFAULT_ROOT = ".agilink"


@dataclass(frozen=True)
class AgilinkUri:
    store: str
    name: str
    version: str = "latest"

    def __str__(self) -> str:
        return f"{SCHEME}{self.store}/{self.name}@{self.version}"


def parse_uri(text: str) -> AgilinkUri:
    """Parse ``agilink://<store>/<name>[@<version>]``; errors point a caret at the fault."""
    if not text.startswith(SCHEME):
        k = 0
        while k < min(len(text), len(SCHEME)) and text[k] == SCHEME[k]:
            k += 1
        raise AgilinkUriError(text, k, f"expected scheme {SCHEME!r}")
    pos = len(SCHEME)
    rest = text[pos:]
    store, slash, tail = rest.partition("/")
    m = NAME_RE.fullmatch(store)
    if not m:
        bad = next((i for i, ch in enumerate(store) if not NAME_RE.fullmatch(ch)), len(store))
        raise AgilinkUriError(text, pos + bad, "store name must match [a-z0-9_-]+")
    pos += len(store)
    if not slash:
        raise AgilinkUriError(text, pos, "expected '/<name>' after the store")
    pos += 1
    name, at, version = tail.partition("@")
    if not NAME_RE.fullmatch(name):
        bad = next((i for i, ch in enumerate(name) if not NAME_RE.fullmatch(ch)), len(name))
        raise AgilinkUriError(text, pos + bad, "artifact name must match [a-z0-9_-]+")
    pos += len(name) + 1
    if at and not VERSION_RE.fullmatch(version):
        raise AgilinkUriError(text, pos, "version must be 'latest' or a hex content-hash prefix (4+ chars)")
    return AgilinkUri(store, name, version if at else "latest")


def is_uri(text: str) -> bool:
    return text.startswith(SCHEME)


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def media_kind(doc: Any) -> str:
    """Classify a parsed document as one of :data:`MEDIA_KINDS`."""
    if isinstance(doc, dict):
        if "manifest_version" in doc:
            return "manifest"
        if "run_id" in doc and "nodes" in doc:
            return "run-record"
        if "nodes" in doc and "edges" in doc:
            return "graph"
        if doc.get("type") in ("object", "list", "str", "int", "float", "bool"):
            return "schema"
    raise StoreError("cannot classify artifact: not a graph, manifest, run record or schema")


@dataclass(frozen=True)
class ArtifactEntry:
    name: str
    version: str
    kind: str
    created_at: float
    size: int


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _create_once(path: Path, data: bytes) -> None:
    if path.exists():
        return
    _atomic_write(path, data)


class ArtifactStore:
    """All stores under one root directory."""

    def __init__(self, root: str | Path | None = None, env: dict[str, str] | None = None) -> None:
        env = os.environ if env is None else env
        self.root = Path(root if root is not None else env.get("AGILINK_ROOT") or DEFAULT_ROOT)

    def _store_dir(self, store: str) -> Path:
        if not NAME_RE.fullmatch(store):
            raise StoreError(f"invalid store name {store!r}")
        return self.root / store

    def put(self, data: bytes, name: str, store: str = "local", kind: str | None = None) -> AgilinkUri:
        if not NAME_RE.fullmatch(name):
            raise StoreError(f"invalid artifact name {name!r} (use [a-z0-9_-]+)")
        if kind is None:
            kind = media_kind(yaml.safe_load(data.decode("utf-8")))
        if kind not in MEDIA_KINDS:
            raise StoreError(f"unknown media kind {kind!r}")
        base = self._store_dir(store)
        version = content_hash(data)
        try:
            _create_once(base / "objects" / version, data)
            meta = {"name": name, "version": version, "kind": kind, "created_at": round(time.time(), 3),
                    "size": len(data)}
            _create_once(base / "names" / name / "versions" / f"{version}.yaml", dump_yaml(meta).encode("utf-8"))
            _atomic_write(base / "names" / name / "latest", (version + "\n").encode("ascii"))
        except OSError as exc:
            raise StoreError(f"write failure in store {store!r}: {exc}") from exc
        log.info("stored %s/%s@%s (%s, %d bytes)", store, name, version[:12], kind, len(data))
        return AgilinkUri(store, name, version)

    def resolve_version(self, uri: AgilinkUri) -> str:
        names = self._store_dir(uri.store) / "names" / uri.name
        if not names.is_dir():
            raise StoreError(f"unknown artifact {uri.name!r} in store {uri.store!r}")
        if uri.version == "latest":
            return (names / "latest").read_text().strip()
        matches = sorted(p.stem for p in (names / "versions").glob(f"{uri.version}*.yaml"))
        if not matches:
            raise StoreError(f"unknown version {uri.version!r} of {uri.name!r} in store {uri.store!r}")
        if len(matches) > 1:
            raise StoreError(f"version prefix {uri.version!r} of {uri.name!r} is ambiguous ({len(matches)} matches)")
        return matches[0]

    def get(self, uri: AgilinkUri | str) -> bytes:
        if isinstance(uri, str):
            uri = parse_uri(uri)
        version = self.resolve_version(uri)
        path = self._store_dir(uri.store) / "objects" / version
        if not path.is_file():
            raise StoreError(f"object {version} for {uri.name!r} missing from store {uri.store!r}")
        return path.read_bytes()

    def entry(self, uri: AgilinkUri | str) -> ArtifactEntry:
        if isinstance(uri, str):
            uri = parse_uri(uri)
        version = self.resolve_version(uri)
        meta_path = self._store_dir(uri.store) / "names" / uri.name / "versions" / f"{version}.yaml"
        meta = yaml.safe_load(meta_path.read_text())
        return ArtifactEntry(meta["name"], meta["version"], meta["kind"], meta["created_at"], meta["size"])

    def versions(self, store: str, name: str) -> list[str]:
        d = self._store_dir(store) / "names" / name / "versions"
        return sorted(p.stem for p in d.glob("*.yaml")) if d.is_dir() else []

    def stores(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir() and NAME_RE.fullmatch(p.name))

    def fsck(self) -> tuple[int, list[str]]:
        """Recompute every object hash and check every pointer; returns ``(objects checked, problems)``."""
        checked, problems = 0, []
        for store in self.stores():
            base = self.root / store
            objects = base / "objects"
            for obj in sorted(objects.iterdir()) if objects.is_dir() else []:
                if obj.name.startswith(".tmp-"):
                    continue
                checked += 1
                actual = content_hash(obj.read_bytes())
                if actual != obj.name:
                    problems.append(f"{store}: object {obj.name} has hash {actual}")
            names = base / "names"
            for nd in sorted(names.iterdir()) if names.is_dir() else []:
                for meta in sorted((nd / "versions").glob("*.yaml")):
                    if not (objects / meta.stem).is_file():
                        problems.append(f"{store}/{nd.name}: version {meta.stem} has no object")
                latest = nd / "latest"
                if not latest.is_file():
                    problems.append(f"{store}/{nd.name}: missing latest pointer")
                elif not (nd / "versions" / f"{latest.read_text().strip()}.yaml").is_file():
                    problems.append(f"{store}/{nd.name}: latest points at an unknown version")
        return checked, problems
