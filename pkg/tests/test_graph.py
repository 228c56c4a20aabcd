from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from dagforge.errors import CycleError, GraphError
from dagforge.graph import (
    Contract,
    Edge,
    Node,
    PortSpec,
    ResolutionState,
    TypeFloor,
    WorkflowGraph,
    graph_floor,
    meet,
    neighborhood,
    parse_graph,
    partition_independent,
    render_graph,
    topo_layers,
    validate_graph,
)
from dagforge.graph.io import canonical_json, graph_digest

MINIMAL = """
version: 1
nodes:
  - {id: a, floor: text, description: "say hi"}
edges: []
"""


def chain(*ids: str) -> WorkflowGraph:
    return WorkflowGraph(tuple(Node(i) for i in ids), tuple(Edge(a, b) for a, b in zip(ids, ids[1:])))


def diamond() -> WorkflowGraph:
    return WorkflowGraph(tuple(Node(i) for i in "ABCD"), (Edge("A", "B"), Edge("A", "C"), Edge("B", "D"), Edge("C", "D")))


def typed(id_: str, ins=(), outs=(("y", "str"),), floor=TypeFloor.TYPED) -> Node:
    return Node(
        id_,
        floor=floor,
        state=ResolutionState.PARTIALLY_RESOLVED,
        inputs=tuple(PortSpec(n, t) for n, t in ins),
        outputs=tuple(PortSpec(n, t) for n, t in outs),
    )


def test_parse_minimal_document():
    g = parse_graph(MINIMAL)
    assert len(g.nodes) == 1 and g.edges == ()
    assert g.node("a").floor == TypeFloor.TEXT and g.node("a").description == "say hi"


def test_self_loop_is_cycle():
    text = MINIMAL.replace("edges: []", "edges:\n  - {from: a, to: a}")
    with pytest.raises(GraphError) as info:
        parse_graph(text)
    assert "cycle" in str(info.value).lower()


def test_typed_edge_mismatch_names_both_ports():
    g = WorkflowGraph((typed("a", outs=(("y", "str"),)), typed("b", ins=(("x", "int"),))), (Edge("a", "b", "y", "x"),))
    report = validate_graph(g)
    assert not report.ok
    msg = " ".join(str(d) for d in report.errors)
    assert "a.y" in msg and "b.x" in msg


def test_render_ascii_counts():
    text = render_graph(chain("a", "b", "c"), "ascii")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    assert sum(1 for ln in lines if any(x in ln for x in ("a", "b", "c"))) >= 3
    assert text.count("->") + text.count("→") == 2
    two = render_graph(WorkflowGraph((Node("p"), Node("q")), ()), "ascii")
    assert "->" not in two and "→" not in two and "p" in two and "q" in two


def test_validate_etl_chain_and_invariants():
    g = chain("fetch", "clean", "load")
    assert validate_graph(g).ok and validate_graph(g).diagnostics == []
    pure = Node("p", floor=TypeFloor.PURE, state=ResolutionState.FULLY_RESOLVED, outputs=(PortSpec("y", "str"),),
                spec=Contract((), ()), body="out.y = virtual.f();")
    msg = " ".join(str(d) for d in validate_graph(WorkflowGraph((pure,), ())).errors)
    assert "PURE node contains virtual reference" in msg
    dangling = WorkflowGraph((typed("a", ins=(("x", "int"),)),), ())
    msg = " ".join(str(d) for d in validate_graph(dangling).errors)
    assert "x" in msg


def test_fan_in_to_one_input_rejected():
    g = WorkflowGraph((typed("a"), typed("b"), typed("c", ins=(("x", "str"),))), (Edge("a", "c", "y", "x"), Edge("b", "c", "y", "x")))
    assert not validate_graph(g).ok


def test_topo_layers_examples():
    assert topo_layers(chain("A", "B", "C")) == [["A"], ["B"], ["C"]]
    assert topo_layers(diamond()) == [["A"], ["B", "C"], ["D"]]
    two = WorkflowGraph(tuple(Node(i) for i in "abcd"), (Edge("a", "b"), Edge("c", "d")))
    assert topo_layers(two) == [["a", "c"], ["b", "d"]]
    cyc = WorkflowGraph((Node("a"), Node("b")), (Edge("a", "b"), Edge("b", "a")))
    with pytest.raises(CycleError) as info:
        topo_layers(cyc)
    assert "a" in str(info.value) and "b" in str(info.value)


def test_graph_floor_examples():
    def g(*floors):
        return WorkflowGraph(tuple(Node(f"n{i}", floor=f) for i, f in enumerate(floors)), ())

    assert graph_floor(g(TypeFloor.PURE, TypeFloor.PURE)) == TypeFloor.PURE
    assert graph_floor(g(TypeFloor.TYPED, TypeFloor.PURE)) == TypeFloor.TYPED
    assert graph_floor(g(TypeFloor.TEXT, TypeFloor.SPEC, TypeFloor.SHIM)) == TypeFloor.TEXT
    with pytest.raises(GraphError):
        graph_floor(WorkflowGraph((), ()))


def test_meet_lattice_exhaustive():
    floors = list(TypeFloor)
    assert len(list(itertools.product(floors, repeat=2))) == 36
    for a, b in itertools.product(floors, repeat=2):
        assert meet(a, b) == min(a, b) == meet(b, a)
        assert meet(a, a) == a
        for c in floors:
            assert meet(meet(a, b), c) == meet(a, meet(b, c))


def test_neighborhood_examples():
    sl = neighborhood(chain("A", "B", "C"), "B")
    assert sl.ids == {"A", "B", "C"} and len(sl.edges) == 2
    assert neighborhood(diamond(), "A").ids == {"A", "B", "C"}
    path = chain(*[f"n{i}" for i in range(100)])
    assert len(neighborhood(path, "n50")) == 3
    with pytest.raises(GraphError):
        neighborhood(path, "missing")


def test_partition_examples():
    assert len(partition_independent(diamond())) == 1
    two = WorkflowGraph(tuple(Node(i) for i in "abcd"), (Edge("a", "b"), Edge("c", "d")))
    parts = partition_independent(two)
    assert sorted(sorted(p.node_ids) for p in parts) == [["a", "b"], ["c", "d"]]
    assert len(partition_independent(WorkflowGraph(tuple(Node(i) for i in "vwxyz"), ()))) == 5


# -- random valid graphs ----------------------------------------------------------------

TYPES = ["str", "int", "float", "bool", "list[str]", "list[int]"]


@st.composite
def random_graph(draw):
    n = draw(st.integers(1, 8))
    floors = [draw(st.sampled_from([TypeFloor.TEXT, TypeFloor.TYPED])) for _ in range(n)]
    out_types = [draw(st.sampled_from(TYPES)) for _ in range(n)]
    nodes, edges = [], []
    for i in range(n):
        ins = []
        if floors[i] == TypeFloor.TYPED and i and floors[i - 1] == TypeFloor.TYPED and draw(st.booleans()):
            ins.append(PortSpec("x", out_types[i - 1]))
            edges.append(Edge(f"n{i - 1}", f"n{i}", "y", "x"))
        elif i and floors[i] == TypeFloor.TEXT and floors[i - 1] == TypeFloor.TEXT and draw(st.booleans()):
            edges.append(Edge(f"n{i - 1}", f"n{i}"))
        desc = draw(st.text(st.characters(codec="utf-8", exclude_categories=("Cs", "Cc")), max_size=20))
        ctx = tuple(draw(st.lists(st.sampled_from(["note", "ISO dates", "üñí"]), max_size=2)))
        if floors[i] == TypeFloor.TEXT:
            nodes.append(Node(f"n{i}", name=f"step {i}", description=desc, context=ctx))
        else:
            nodes.append(Node(f"n{i}", name=f"step {i}", floor=TypeFloor.TYPED, state=ResolutionState.PARTIALLY_RESOLVED,
                              description=desc, context=ctx, inputs=tuple(ins), outputs=(PortSpec("y", out_types[i]),)))
    return WorkflowGraph(tuple(nodes), tuple(edges), name=draw(st.sampled_from(["", "etl", "a b"])))


@settings(max_examples=1000, deadline=None)
@given(random_graph(), st.sampled_from(["yaml", "json"]))
def test_render_parse_roundtrip(g, fmt):
    assert validate_graph(g).ok
    back = parse_graph(render_graph(g, fmt), fmt)
    assert back == g
    assert graph_digest(back) == graph_digest(g)


@settings(max_examples=200, deadline=None)
@given(random_graph())
def test_layers_are_stratification(g):
    layers = topo_layers(g)
    assert topo_layers(g) == layers
    pos = {nid: k for k, layer in enumerate(layers) for nid in layer}
    assert sorted(pos) == sorted(g.node_ids)
    assert all(layer == sorted(layer) for layer in layers)
    for e in g.edges:
        assert pos[e.src] < pos[e.dst]
    for nid in g.node_ids:
        assert len(neighborhood(g, nid)) <= 1 + len(g.in_edges(nid)) + len(g.out_edges(nid))


def test_canonical_json_is_key_sorted_and_compact():
    assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
