from __future__ import annotations

import io
import os
import shutil
import subprocess
import sys

import pytest
import yaml

from builders import ETL, gateway
from dagforge.cli import main


class Result:
    def __init__(self, code, out, err):
        self.code, self.out, self.err = code, out, err

    @property
    def doc(self):
        return yaml.safe_load(self.out)


@pytest.fixture
def cli(tmp_path):
    env = {"DAGFORGE_WORKSPACE": str(tmp_path), "AGILINK_ROOT": str(tmp_path / ".agilink")}

    def run(tool, *argv, stdin="", gw=None, **extra_env):
        out, err = io.StringIO(), io.StringIO()
        code = main(tool, list(argv), io.StringIO(stdin), out, err, {**env, **extra_env}, gw)
        return Result(code, out.getvalue(), err.getvalue())

    run.ws = tmp_path
    return run


def _providers(tmp_path, large_fails=False, small_fails=False, extra=""):
    path = tmp_path / "providers.yaml"
    lines = ["providers:"]
    for pid, tier, fails in (("mock-small", 3, small_fails), ("mock-large", 9, large_fails)):
        lines.append(f"  - id: {pid}\n    tier: {tier}")
        if fails:
            lines.append("    failure_script: ['']")
    path.write_text("\n".join(lines) + "\n" + extra)
    return str(path)


def test_compose_etl(cli):
    r = cli("dagify", "compose", "--ascii", ETL)
    assert r.code == 0
    assert len(r.doc["nodes"]) == 3 and len(r.doc["edges"]) == 2
    assert {n["floor"] for n in r.doc["nodes"]} == {"text"}
    assert r.err.count("-->") == 2
    j = cli("dagify", "compose", "-f", "json", "--type", "plain_text", ETL)
    assert j.code == 0 and j.out.lstrip().startswith("{") and len(yaml.safe_load(j.out)["nodes"]) == 3


@pytest.mark.parametrize(
    "tool, argv",
    [
        ("dagify", ["compose"]),
        ("dagify", ["compose", "--bogus", "x"]),
        ("dagify", ["compose", "--type", "nonsense", "x"]),
        ("dagify", ["refine", "-"]),
        ("dagify", []),
        ("dagent", ["execute", "missing.yaml"]),
        ("dagent", ["execute", "-", "--jit", "eager"]),
        ("dagent", ["execute", "-", "--parallelism", "0"]),
        ("dagent", ["interpret"]),
    ],
)
def test_usage_errors_exit_4(cli, tool, argv):
    r = cli(tool, *argv)
    assert r.code == 4 and "usage error" in r.err and len(r.err.strip().splitlines()) == 1


def test_help_exits_0(cli):
    r = cli("dagent", "--help")
    assert r.code == 0 and "execute" in r.out


def test_refine_resolve_via_stdin(cli):
    g = cli("dagify", "compose", ETL).out
    r = cli("dagify", "refine", "-", "--node", "clean_data", "--note", "drop null ids", stdin=g)
    assert r.code == 0
    nodes = {n["id"]: n for n in r.doc["nodes"]}
    assert nodes["clean_data"]["context"] == ["drop null ids"] and nodes["load_into_postgresql"]["context"] == []
    res = cli("dagify", "resolve", "-", "--type-floor", "spec", stdin=r.out)
    assert res.code == 0 and {n["floor"] for n in res.doc["nodes"]} == {"spec"}


def test_compile_requires_shim_floor(cli):
    g = cli("dagify", "compose", ETL).out
    r = cli("dagify", "compile", "-", stdin=g)
    assert r.code == 1 and "below shim" in r.err
    m = cli("dagify", "compile", "-", "-t", "pure", "--build-target", "manifest", stdin=g)
    assert m.code == 0 and m.doc["floor"] == "pure" and len(m.doc["content_hash"]) == 64


def test_compile_forced_virtualization_warns(cli):
    providers = _providers(cli.ws, extra="")
    text = open(providers).read().replace(
        "tier: 9", "tier: 9\n    failure_script: [{kind: synthesize_body}]"
    ).replace("tier: 3", "tier: 3\n    failure_script: [{kind: synthesize_body}]")
    open(providers, "w").write(text)
    g = cli("dagify", "compose", ETL).out
    m = cli("dagify", "compile", "-", "-t", "pure", stdin=g, DAGFORGE_PROVIDERS=providers)
    assert m.code == 0 and m.doc["floor"] == "shim" and "warning" in m.err


def test_execute_whitelist_violation(cli):
    manifest = cli.ws / "http.yaml"
    manifest.write_text(
        yaml.safe_dump({
            "version": 1, "name": "fetch", "edges": [],
            "nodes": [{"id": "get", "floor": "pure", "state": "fully_resolved", "outputs": [{"name": "y", "type": "str"}],
                       "spec": {"pre": [], "post": []}, "body": 'out.y = tool.http.get("https://example.test/");',
                       "effects": ["network"]}],
        })
    )
    m = cli("dagify", "compile", str(manifest))
    assert m.code == 0 and m.doc["tools"] == ["http.get"]
    r = cli("dagent", "execute", "-", "--tools=fs", stdin=m.out)
    assert r.code == 1 and "tool not whitelisted: http" in r.err
    assert not (cli.ws / "runs").exists()


def test_failover_and_all_fail(cli):
    ok = cli("dagify", "compose", ETL, DAGFORGE_PROVIDERS=_providers(cli.ws, large_fails=True))
    assert ok.code == 0 and len(ok.doc["nodes"]) == 3
    # a fresh workspace, so the on-disk response cache from the first call cannot answer
    fresh = cli.ws / "fresh"
    fresh.mkdir()
    bad = cli("dagify", "compose", ETL, DAGFORGE_PROVIDERS=_providers(cli.ws, large_fails=True, small_fails=True),
              DAGFORGE_WORKSPACE=str(fresh))
    assert bad.code == 3 and "error" in bad.err
    cached = cli("dagify", "compose", ETL, DAGFORGE_PROVIDERS=_providers(cli.ws, large_fails=True, small_fails=True))
    assert cached.code == 0 and cached.out == ok.out


def test_bad_provider_registry_is_usage_error(cli):
    path = cli.ws / "bad.yaml"
    path.write_text("providers: []\n")
    assert cli("dagify", "compose", "x", DAGFORGE_PROVIDERS=str(path)).code == 4


def test_seed_reaches_every_request(cli):
    gw = gateway()
    seeds = []
    gw.listeners.append(lambda req: seeds.append(req.seed))
    g = cli("dagify", "compose", "--seed", "13", ETL, gw=gw).out
    cli("dagify", "resolve", "-", "--seed", "13", stdin=g, gw=gw)
    cli("dagent", "interpret", "--seed", "13", "summarize the log", gw=gw)
    assert seeds and set(seeds) == {13}


def test_interpret_and_synthesize(cli):
    r = cli("dagent", "interpret", "--seed", "7", ETL)
    assert r.code == 0 and len(r.doc["nodes"]) == 3 and "graph" in r.doc
    s = cli("dagent", "synthesize", "--seed", "7", "--tools", "fs,http", ETL)
    manifest, record = list(yaml.safe_load_all(s.out))
    assert s.code == 0 and manifest["floor"] == "pure" and record["status"] == "ok"


def test_execution_failure_exit_2(cli):
    g = {
        "version": 1, "name": "f", "edges": [],
        "nodes": [{"id": "f", "floor": "pure", "state": "fully_resolved", "outputs": [{"name": "y", "type": "int"}],
                   "spec": {"pre": [], "post": []}, "body": "out.y = 1 / 0;"}],
    }
    r = cli("dagent", "execute", "-", stdin=yaml.safe_dump(g))
    assert r.code == 2 and r.doc["status"] == "failed" and r.doc["failed_node"] == "f"


def test_validate(cli):
    g = cli("dagify", "compose", ETL).out
    assert cli("dagent", "validate", "-", stdin=g).code == 0
    broken = yaml.safe_load(g)
    broken["nodes"][0]["floor"] = "pure"
    r = cli("dagent", "validate", "-", stdin=yaml.safe_dump(broken))
    assert r.code == 1 and r.doc["ok"] is False


def test_agilink_roundtrip_and_fsck(cli):
    c = cli("dagify", "compose", "--output-agilink", "agilink://local/etl", ETL)
    assert c.code == 0 and "stored agilink://local/etl@" in c.err
    r = cli("dagify", "resolve", "agilink://local/etl@latest", "--output-agilink", "agilink://local/etl-pure")
    assert r.code == 0
    e = cli("dagent", "execute", "agilink://local/etl-pure", "--output-agilink", "agilink://local/etl-run")
    assert e.code == 0
    f = cli("dagify", "fsck")
    assert f.code == 0 and f.doc["objects"] == 3 and f.doc["problems"] == []
    assert cli("dagent", "execute", "agilink://local/nope").code == 1
    assert cli("dagify", "compose", "--output-agilink", "agilink://local/x@abc1", "y").code == 4


@pytest.mark.skipif(shutil.which("sh") is None, reason="needs a POSIX shell")
def test_shell_pipe_matches_three_files(tmp_path):
    env = {**os.environ, "DAGFORGE_WORKSPACE": str(tmp_path), "AGILINK_ROOT": str(tmp_path / ".agilink")}
    py = f'"{sys.executable}" -m dagforge'
    text = '"Fetch data from API → clean data → load into PostgreSQL"'
    piped = (f"{py} dagify compose --seed 7 {text} | {py} dagify resolve - --type-floor pure --seed 7 "
             f"| {py} dagent execute - --seed 7 --tools fs,http > piped.yaml")
    files = (f"{py} dagify compose --seed 7 {text} > g.yaml && {py} dagify resolve g.yaml --type-floor pure --seed 7 > p.yaml"
             f" && {py} dagent execute p.yaml --seed 7 --tools fs,http > files.yaml")
    for cmd in (piped, files):
        subprocess.run(["sh", "-c", cmd], cwd=tmp_path, env=env, check=True, capture_output=True)
    assert (tmp_path / "piped.yaml").read_bytes() == (tmp_path / "files.yaml").read_bytes()
    assert yaml.safe_load((tmp_path / "piped.yaml").read_text())["status"] == "ok"
