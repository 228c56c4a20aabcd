from __future__ import annotations

import hashlib
import threading

import pytest

from dagforge.errors import AgilinkUriError, StoreError
from dagforge.store import AgilinkUri, ArtifactStore, media_kind, parse_uri

GRAPH = b"version: 1\nname: g\nnodes: []\nedges: []\n"


def test_parse_uri_examples():
    assert parse_uri("agilink://local/pipeline@latest") == AgilinkUri("local", "pipeline", "latest")
    assert parse_uri("agilink://local/pipeline") == AgilinkUri("local", "pipeline", "latest")
    assert parse_uri("agilink://s-1/my_graph@abcd12").version == "abcd12"


@pytest.mark.parametrize(
    "text, caret",
    [
        ("http://x", 0),
        ("agilink://Local/p", 10),
        ("agilink://local", 15),
        ("agilink://local/Pipe", 16),
        ("agilink://local/p@zz", 18),
    ],
)
def test_parse_uri_errors_point_at_fault(text, caret):
    with pytest.raises(AgilinkUriError) as info:
        parse_uri(text)
    assert info.value.position == caret
    assert str(info.value).splitlines()[-1].index("^") - 2 == caret


def test_put_dedup_and_latest(tmp_path):
    store = ArtifactStore(tmp_path)
    a = store.put(GRAPH, "pipeline")
    b = store.put(GRAPH, "pipeline")
    assert a == b and a.version == hashlib.sha256(GRAPH).hexdigest()
    assert len(list((tmp_path / "local" / "objects").iterdir())) == 1
    changed = GRAPH.replace(b"name: g", b"name: h")
    c = store.put(changed, "pipeline")
    assert c.version != a.version
    assert store.get("agilink://local/pipeline@latest") == changed
    assert store.get(f"agilink://local/pipeline@{a.version[:8]}") == GRAPH
    assert store.get(a) == GRAPH
    assert store.entry(c).kind == "graph"


def test_get_unknown_names_store_and_artifact(tmp_path):
    store = ArtifactStore(tmp_path)
    with pytest.raises(StoreError) as info:
        store.get("agilink://local/missing")
    assert "missing" in str(info.value) and "local" in str(info.value)
    store.put(GRAPH, "p")
    with pytest.raises(StoreError):
        store.get("agilink://local/p@ffff")


def test_root_from_env(tmp_path):
    store = ArtifactStore(env={"AGILINK_ROOT": str(tmp_path / "r")})
    store.put(GRAPH, "g")
    assert (tmp_path / "r" / "local" / "names" / "g" / "latest").is_file()
    assert ArtifactStore(env={}).root.name == ".agilink"


def test_fsck_detects_corruption(tmp_path):
    store = ArtifactStore(tmp_path)
    uri = store.put(GRAPH, "g")
    assert store.fsck() == (1, [])
    (tmp_path / "local" / "objects" / uri.version).write_bytes(b"tampered")
    checked, problems = store.fsck()
    assert checked == 1 and len(problems) == 1 and uri.version in problems[0]


def test_concurrent_puts(tmp_path):
    store = ArtifactStore(tmp_path)
    blobs = [GRAPH.replace(b"name: g", f"name: g{i}".encode()) for i in range(8)]
    threads = [threading.Thread(target=store.put, args=(b, "shared")) for b in blobs for _ in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(store.versions("local", "shared")) == 8
    assert store.get("agilink://local/shared") in blobs
    assert store.fsck() == (8, [])


def test_media_kinds():
    assert media_kind({"manifest_version": 1}) == "manifest"
    assert media_kind({"run_id": "x", "nodes": []}) == "run-record"
    assert media_kind({"nodes": [], "edges": []}) == "graph"
    assert media_kind({"type": "object", "fields": {}}) == "schema"
    with pytest.raises(StoreError):
        media_kind([1, 2])
