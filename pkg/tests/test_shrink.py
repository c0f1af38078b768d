import itertools
import json

import pytest
from hypothesis import given, settings, strategies as st

from quickrest.errors import ShrinkBudgetExceeded
from quickrest.model import parse_document
from quickrest.shrink import candidates, shrink_search, shrink_value
from quickrest.specs import SpecRegistry, definitions_to_specs, is_valid, primitive_spec


def has_control(v):
    return isinstance(v, str) and any(ord(c) < 32 for c in v)


def brute_force_minimal(s, pred):
    """Every string reachable by deleting characters or substituting 'a'/'0'."""
    best = None
    for n in range(len(s) + 1):
        for idx in itertools.combinations(range(len(s)), n):
            sub = "".join(s[i] for i in idx)
            if pred(sub) and (best is None or len(sub) < len(best)):
                best = sub
        if best is not None:
            return best
    return best


def test_control_character_shrinks_to_itself():
    s = "abc\u0007xy"
    out = shrink_value(primitive_spec("string"), s, has_control)
    assert out == "\u0007"
    assert out == brute_force_minimal(s, has_control)
    assert not any(has_control(c) for c in candidates(out))


def test_minimal_string_unchanged():
    def non_alnum(v):
        return any(not ("a" <= c <= "z" or "A" <= c <= "Z" or "0" <= c <= "9") for c in v)

    assert shrink_value(None, "¹", non_alnum) == "¹"


def test_integers_shrink_toward_zero():
    assert shrink_value(None, 1000, lambda v: v >= 17) == 17
    assert shrink_value(None, -1000, lambda v: v <= -3) == -3
    assert list(candidates(10)) == [5, 9]
    assert list(candidates(-1)) == [0]
    assert list(candidates(0)) == []


def test_float_and_bool_steps():
    assert list(candidates(2.5)) == [2.0]
    assert list(candidates(True)) == [False]
    assert list(candidates(None)) == []


def test_string_step_order():
    assert list(candidates("xy")) == ["y", "x", "ay", "0y", "xa", "x0"]


def _registry():
    doc = {"swagger": "2.0", "paths": {}, "definitions": {
        "Item": {"type": "object", "required": ["name"], "properties": {
            "name": {"type": "string"}, "note": {"type": "string"},
            "count": {"type": "integer"}, "id": {"type": "string", "format": "uuid"}}},
        "Body": {"type": "array", "items": {"$ref": "#/definitions/Item"}}}}
    reg = SpecRegistry()
    definitions_to_specs("definitions", parse_document(json.dumps(doc)).definitions, reg)
    return reg


def test_large_body_shrinks_to_failing_field():
    reg = _registry()
    body = [{"name": f"item{i}", "note": "n" * i, "count": i * 7,
             "id": "077de3d9-3f50-4756-bb45-ee61be31e8a2"} for i in range(12)]
    body[8]["name"] = "bad name!"
    assert len(json.dumps(body, indent=2).splitlines()) > 60

    def fails(v):
        return any(not c.isalnum() for e in v for c in e.get("name", ""))

    out = shrink_value("definitions/Body", body, fails, registry=reg)
    assert len(out) == 1 and set(out[0]) == {"name"}
    assert len(out[0]["name"]) == 1 and not out[0]["name"].isalnum()
    assert is_valid(reg, "definitions/Body", out)


def test_required_keys_and_formats_kept():
    reg = _registry()
    value = {"name": "x", "id": "077de3d9-3f50-4756-bb45-ee61be31e8a2"}
    cands = list(candidates(value, reg, "definitions/Item"))
    assert {"id": value["id"]} not in cands
    assert all(c.get("id") in (None, value["id"]) for c in cands)


def test_enum_moves_to_earlier_members():
    doc = {"swagger": "2.0", "paths": {}, "definitions": {
        "E": {"type": "string", "enum": ["low", "mid", "high"]}}}
    reg = SpecRegistry()
    definitions_to_specs("definitions", parse_document(json.dumps(doc)).definitions, reg)
    assert list(candidates("high", reg, "definitions/E")) == ["low", "mid"]


def test_budget_reports_best_so_far():
    with pytest.raises(ShrinkBudgetExceeded) as info:
        shrink_search("x" * 200, lambda v: len(v) > 0, budget=5)
    exc = info.value
    assert exc.steps == 5
    assert len(exc.best) < 200 and len(exc.best) > 0


def test_result_counts():
    res = shrink_search(8, lambda v: v >= 1)
    assert res.value == 1
    # 8 -> 4 -> 2 -> 1, then 0 is rejected
    assert res.accepted == 3 and res.executions == 4


# -- properties ------------------------------------------------------------------

json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-200, 200) | st.text("abé\u0007 0", max_size=6),
    lambda inner: st.lists(inner, max_size=3) | st.dictionaries(st.sampled_from("xyz"), inner,
                                                                  max_size=3),
    max_leaves=6)


def _size(v):
    if isinstance(v, list):
        return 1 + sum(_size(x) for x in v)
    if isinstance(v, dict):
        return 1 + sum(_size(x) for x in v.values())
    if isinstance(v, str):
        return len(v)
    return 0


preds = st.sampled_from([
    lambda v: "\u0007" in json.dumps(v, ensure_ascii=False),
    lambda v: "b" in json.dumps(v),
    lambda v: _size(v) >= 3,
    lambda v: isinstance(v, (list, dict)),
    lambda v: json.dumps(v).count("1") >= 1,
])


@settings(max_examples=300, deadline=None)
@given(json_values, preds)
def test_shrink_valid_and_locally_minimal(value, pred):
    if not pred(value):
        return
    seen = []

    def tracked(v):
        ok = pred(v)
        if ok:
            seen.append(v)
        return ok

    out = shrink_value(None, value, tracked, budget=100_000)
    assert pred(out)
    assert all(pred(v) for v in seen)
    assert not any(pred(c) for c in candidates(out))
