from __future__ import annotations

import dataclasses
import random

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from dagforge.compiler import (
    STEPS,
    Resolver,
    compile_graph,
    compose,
    parse_manifest,
    referenced_ids,
    refine,
    render_manifest,
    resolve,
)
from dagforge.errors import CompileError, GraphError, ResolutionIncomplete
from dagforge.gateway import DEFAULT_PROVIDERS, Gateway, Matcher, ProviderSpec
from dagforge.graph import (
    Contract,
    Edge,
    Node,
    PortSpec,
    ResolutionState,
    TypeFloor,
    WorkflowGraph,
    graph_floor,
    neighborhood,
    validate_graph,
)

ETL = "Fetch data from API → clean data → load into PostgreSQL"


def _gw(*specs):
    return Gateway(list(specs) or list(DEFAULT_PROVIDERS))


def _failing(match: str, kind: str | None = None):
    # every provider fails requests containing ``match``
    return _gw(
        ProviderSpec("a", tier=3, failure_script=(Matcher(match, kind=kind),)),
        ProviderSpec("b", tier=9, failure_script=(Matcher(match, kind=kind),)),
    )


def test_steps_cover_adjacent_pairs():
    assert [(s.from_floor, s.to_floor) for s in STEPS] == [
        (TypeFloor(i), TypeFloor(i + 1)) for i in range(TypeFloor.TEXT, TypeFloor.PURE)
    ]


def test_compose_etl_fixture():
    g = compose(ETL, _gw())
    assert [n.id for n in g.nodes] == ["fetch_data_from_api", "clean_data", "load_into_postgresql"]
    assert [(e.src, e.dst) for e in g.edges] == [("fetch_data_from_api", "clean_data"), ("clean_data", "load_into_postgresql")]
    assert all(n.floor == TypeFloor.TEXT and n.state == ResolutionState.UNRESOLVED for n in g.nodes)


def test_compose_to_spec():
    g = compose("ingest CSV -> validate -> aggregate -> report", _gw(), target=TypeFloor.SPEC)
    assert len(g.nodes) == 4 and len(g.edges) == 3
    assert graph_floor(g) == TypeFloor.SPEC and validate_graph(g).ok


def test_compose_single_sentence_and_empty():
    assert len(compose("just summarize the report", _gw()).nodes) == 1
    with pytest.raises(CompileError):
        compose("   ", _gw())


def test_resolve_typed_reifies_edges_as_str():
    g = resolve(compose(ETL, _gw()), TypeFloor.TYPED, _gw())
    assert all(n.outputs for n in g.nodes)
    for e in g.edges:
        assert e.src_port and e.dst_port
        assert g.node(e.src).output(e.src_port).type == "str" == g.node(e.dst).input(e.dst_port).type


def test_typed_to_spec_posts_reference_every_output():
    g = resolve(compose(ETL, _gw()), TypeFloor.SPEC, _gw())
    for n in g.nodes:
        for p in n.outputs:
            assert any(f"out.{p.name}" in post for post in n.spec.post)


def test_pure_graph_is_noop():
    gw = _gw()
    g = resolve(compose(ETL, gw), TypeFloor.PURE, gw)
    before = gw.invocations
    assert resolve(g, TypeFloor.PURE, gw) == g and gw.invocations == before


def test_target_below_floor_is_error():
    g = resolve(compose(ETL, _gw()), TypeFloor.SPEC, _gw())
    with pytest.raises(CompileError):
        resolve(g, TypeFloor.TYPED, _gw())


def test_refine_changes_only_context():
    g = compose(ETL, _gw())
    r = refine(g, "clean_data", "drop rows with null ids")
    assert r.node("clean_data").context == ("drop rows with null ids",)
    assert r.replace_node(g.node("clean_data")) == g
    everywhere = refine(g, None, "use ISO dates")
    assert all(n.context == ("use ISO dates",) for n in everywhere.nodes)
    with pytest.raises(GraphError):
        refine(g, "nope", "x")


def test_failure_on_spec_to_stub_virtualizes():
    gw = _failing("", kind="resolve_stub")
    g = resolve(compose(ETL, _gw()), TypeFloor.SHIM, gw)
    for n in g.nodes:
        assert n.floor == TypeFloor.SHIM
        assert "virtual.impl(" in n.body and n.virtual_calls[0].name == "impl"
    assert validate_graph(g).ok


def test_failure_on_text_to_typed_defers():
    gw = _failing("[node clean_data] role=target", kind="resolve_typed")
    with pytest.raises(ResolutionIncomplete) as info:
        resolve(compose(ETL, _gw()), TypeFloor.TYPED, gw)
    err = info.value
    assert err.unresolved == ["clean_data"]
    stuck = err.graph.node("clean_data")
    assert stuck.deferred and stuck.state == ResolutionState.PARTIALLY_RESOLVED and stuck.floor == TypeFloor.TEXT
    assert err.exit_code == 3  # only provider failures


def test_decompose_rewires_chain():
    g = WorkflowGraph(
        (Node("a", description="start"), Node("b", description="parse input. score rows"), Node("c", description="end")),
        (Edge("a", "b"), Edge("b", "c")),
    )
    gw = _failing("[node b] role=target", kind="resolve_typed")
    out = resolve(g, TypeFloor.TYPED, gw)
    assert [n.id for n in out.nodes] == ["a", "b_1", "b_2", "c"]
    assert {(e.src, e.dst) for e in out.edges} == {("a", "b_1"), ("b_1", "b_2"), ("b_2", "c")}
    assert validate_graph(out).ok


def test_locality_on_large_graph():
    rng = random.Random(3)
    n = 500
    nodes = tuple(Node(f"n{i}", description=f"step {i}") for i in range(n))
    edges = {(f"n{i}", f"n{i + 1}") for i in range(n - 1)}
    edges |= {(f"n{i}", f"n{i + rng.randint(2, 9)}") for i in range(0, n - 10, 7)}
    g = WorkflowGraph(nodes, tuple(Edge(a, b) for a, b in sorted(edges)))
    violations = []

    def observe(node_id, sl, prompt):
        extra = referenced_ids(prompt) - sl.ids
        if extra or node_id not in referenced_ids(prompt):
            violations.append((node_id, extra))

    resolve(g, TypeFloor.TYPED, _gw(), on_prompt=observe)
    assert violations == []


def test_slice_size_independent_of_graph_size():
    def chain(n):
        return WorkflowGraph(tuple(Node(f"n{i}") for i in range(n)), tuple(Edge(f"n{i}", f"n{i + 1}") for i in range(n - 1)))

    small, large = chain(20), chain(500)
    assert max(len(neighborhood(small, i)) for i in small.node_ids) == 3
    assert max(len(neighborhood(large, i)) for i in large.node_ids) == 3


def test_disjoint_resolutions_commute():
    g = WorkflowGraph(tuple(Node(x, description=f"do {x}") for x in "abcde"), tuple(Edge(x, y) for x, y in ["ab", "bc", "cd", "de"]))
    r = Resolver(_gw())
    ab = r.resolve_node(r.resolve_node(g, "a", TypeFloor.TYPED).graph, "c", TypeFloor.TYPED).graph
    ba = r.resolve_node(r.resolve_node(g, "c", TypeFloor.TYPED).graph, "a", TypeFloor.TYPED).graph
    assert ab == ba


def test_compile_manifest_roundtrip_and_hash():
    gw = _gw()
    m = compile_graph(compose(ETL, gw), gw, TypeFloor.PURE, seed=7)
    assert m.floor == TypeFloor.PURE and len(m.schedule) == 3
    text = render_manifest(m)
    back = parse_manifest(text)
    assert back == m and render_manifest(back) == text
    again = compile_graph(compose(ETL, _gw()), _gw(), TypeFloor.PURE, seed=7)
    assert again.content_hash == m.content_hash


def test_compile_shim_with_warning_when_virtualization_forced():
    gw = _failing("", kind="synthesize_body")
    m = compile_graph(compose(ETL, gw), gw, TypeFloor.PURE)
    assert m.floor == TypeFloor.SHIM and m.warnings


def test_compile_tools_from_bodies():
    body = 'let page = tool.http.get("https://example.test");\nout.y = tool.fs.read(page);'
    node = Node(
        "n",
        floor=TypeFloor.SHIM,
        state=ResolutionState.PARTIALLY_RESOLVED,
        outputs=(PortSpec("y", "str"),),
        spec=Contract((), ()),
        body=body,
    )
    m = compile_graph(WorkflowGraph((node,), ()))
    assert m.tools == ("fs.read", "http.get") and m.floor == TypeFloor.SHIM


def test_compile_below_shim_fails():
    with pytest.raises(CompileError):
        compile_graph(compose(ETL, _gw()))


def test_tampered_manifest_rejected():
    gw = _gw()
    text = render_manifest(compile_graph(compose(ETL, gw), gw, TypeFloor.PURE))
    with pytest.raises(GraphError):
        parse_manifest(text.replace("content_hash: ", "content_hash: 0"))


# -- monotonicity and refinement neutrality ------------------------------------------

TEXTS = [ETL, "ingest CSV -> validate -> aggregate -> report", "Read the file. Count words. Report it", "summarize"]
FAILS = [None, "resolve_typed", "resolve_spec", "resolve_stub", "synthesize_body"]
_op = st.one_of(
    st.tuples(st.just("refine"), st.sampled_from([None, 0, 1, 2]), st.sampled_from(["note a", "note b"])),
    st.tuples(st.just("resolve"), st.sampled_from(list(TypeFloor)), st.sampled_from(FAILS)),
)


def _erase_context(g: WorkflowGraph) -> WorkflowGraph:
    return WorkflowGraph(tuple(dataclasses.replace(n, context=()) for n in g.nodes), g.edges, g.name, g.version)


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(text=st.sampled_from(TEXTS), ops=st.lists(_op, min_size=1, max_size=6), seed=st.integers(0, 50))
def test_floors_never_decrease(text, ops, seed):
    g = compose(text, _gw(), seed=seed)
    for op in ops:
        before = {n.id: n.floor for n in g.nodes}
        if op[0] == "refine":
            ids = g.node_ids
            target = None if op[1] is None else ids[op[1] % len(ids)]
            after = refine(g, target, op[2])
            assert _erase_context(after) == _erase_context(g)
            assert graph_floor(after) == graph_floor(g)
        else:
            _, floor, fail = op
            if floor < graph_floor(g):
                continue
            gw = _failing("", kind=fail) if fail else _gw()
            try:
                after = resolve(g, floor, gw, seed=seed)
            except ResolutionIncomplete as exc:
                after = exc.graph
        for n in after.nodes:
            if n.id in before:
                assert n.floor >= before[n.id]
        g = after
