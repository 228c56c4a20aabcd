from __future__ import annotations

import time

import pytest
from hypothesis import given, settings, strategies as st

from dagforge.errors import SchemaValidationError
from dagforge.gateway import Gateway, ProviderSpec, ScriptedResponse
from dagforge.hfill import PartialInstance, decompose, fill, merge
from dagforge.schema import SchemaNode, leaf_paths, list_of, obj, scalar, validate_instance

PERSON = obj(
    {
        "name": scalar("str"),
        "age": scalar("int"),
        "address": obj({"city": scalar("str"), "zip": scalar("str")}),
        "tags": scalar("list[str]"),
    }
)


def _shape(plan):
    return [[(g.kind, ".".join(g.prefix), g.fields or g.branch) for g in level] for level in plan.levels]


def test_all_scalar_object_is_one_group():
    plan = decompose(obj({"name": scalar("str"), "age": scalar("int")}))
    assert _shape(plan) == [[("scalars", "", ("name", "age"))]]


def test_nested_example_levels():
    # worked by hand: level 0 = root scalars {name, age, tags} + branch address;
    # level 1 = address scalars {city, zip}
    assert _shape(decompose(PERSON)) == [
        [("scalars", "", ("name", "age", "tags")), ("object", "", "address")],
        [("scalars", "address", ("city", "zip"))],
    ]


def test_two_branches_share_level_zero():
    plan = decompose(obj({"a": obj({"x": scalar("str")}), "b": obj({"y": scalar("str")})}))
    assert [g.branch for g in plan.levels[0]] == ["a", "b"]
    assert plan.call_count == 2


def test_list_of_objects_is_one_group():
    plan = decompose(obj({"rows": list_of(obj({"k": scalar("int")}))}))
    assert _shape(plan) == [[("list", "", "rows")]]


def test_root_must_be_object():
    with pytest.raises(ValueError):
        decompose(scalar("int"))


def _gw(latency=None, **kw):
    return Gateway([ProviderSpec("m", simulated_latency=latency, **kw)])


def test_four_scalars_one_call():
    gw = _gw()
    inst = fill(obj({k: scalar("int") for k in "abcd"}), "ctx", gw)
    assert gw.invocations == 1 and set(inst) == set("abcd")


def test_empty_schema_no_calls():
    gw = _gw()
    assert fill(obj({}), "ctx", gw) == {} and gw.invocations == 0


def test_end_to_end_person_validates_and_is_deterministic():
    a = fill(PERSON, "a person", _gw(), seed=4)
    b = fill(PERSON, "a person", _gw(), seed=4)
    assert validate_instance(PERSON, a) == [] and a == b


def test_prompt_is_focused():
    gw = _gw()
    prompts = []
    gw.listeners.append(lambda r: prompts.append(r.prompt))
    fill(PERSON, "CTX", gw)
    address_prompt = next(p for p in prompts if "address.city" in p)
    assert "name" not in address_prompt and "CTX" in address_prompt


def test_six_branches_run_in_one_latency_unit():
    schema = obj({f"b{i}": obj({"v": scalar("str")}) for i in range(6)})
    gw = _gw(latency=0.1)
    start = time.perf_counter()
    fill(schema, "ctx", gw)
    assert time.perf_counter() - start <= 0.15
    assert gw.invocations == 6


def test_regeneration_retries_only_failing_group():
    bad = ScriptedResponse("address.city", payload={"city": 1, "zip": "z"}, times=3)
    gw = Gateway([ProviderSpec("m", responses=(bad,))])
    inst = fill(PERSON, "ctx", gw)
    assert validate_instance(PERSON, inst) == []
    # root group: 1 call; address: 3 invalid attempts then regeneration succeeds
    assert gw.invocations == 1 + 4


def test_regeneration_exhausted_raises():
    bad = ScriptedResponse("address.city", payload={"city": 1, "zip": "z"})
    with pytest.raises(SchemaValidationError):
        fill(PERSON, "ctx", Gateway([ProviderSpec("m", responses=(bad,))]))


def test_merge_disjoint_and_overlap():
    schema = obj({"a": obj({"x": scalar("int")}), "b": obj({"y": scalar("int")})})
    merged = merge([PartialInstance(("a",), {"x": 1}), PartialInstance(("b",), {"y": 2})], schema)
    assert merged == {"a": {"x": 1}, "b": {"y": 2}}
    with pytest.raises(ValueError, match="a.x"):
        merge([PartialInstance(("a",), {"x": 1}), PartialInstance(("a",), {"x": 3}), PartialInstance(("b",), {"y": 2})], schema)
    with pytest.raises(ValueError, match="b.y"):
        merge([PartialInstance(("a",), {"x": 1})], schema)


# -- coverage over random schemas ----------------------------------------------

_scalars = st.sampled_from(["str", "int", "float", "bool", "list[str]", "list[int]"]).map(scalar)


def _schemas(depth: int):
    if depth == 0:
        return st.dictionaries(st.sampled_from("abcdef"), _scalars, max_size=4).map(obj)
    child = st.one_of(_scalars, _schemas(depth - 1), _schemas(depth - 1).map(list_of))
    return st.dictionaries(st.sampled_from("abcdefgh"), child, max_size=4).map(obj)


@settings(max_examples=200, deadline=None)
@given(_schemas(4))
def test_plan_partitions_leaves(schema: SchemaNode):
    leaves = leaf_paths(schema)
    if len(leaves) > 40:
        return
    covered = [p for g in decompose(schema).groups() for p in g.paths()]
    assert sorted(covered) == sorted(leaves) and len(covered) == len(set(covered))
    for k, level in enumerate(decompose(schema).levels):
        assert all(len(g.prefix) == k for g in level)
