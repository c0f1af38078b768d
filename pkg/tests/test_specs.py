import json

import jsonschema
import pytest
from hypothesis import given, settings, strategies as st

from quickrest.errors import CollisionError, UnknownSpec, UnsupportedType
from quickrest.model import ObjectSchema, Primitive, parse_document, schema_to_json
from quickrest.specs import (
    ArrNode,
    ObjNode,
    PrimNode,
    SpecRef,
    SpecRegistry,
    compile_api,
    definitions_to_specs,
    is_valid,
    json_equal,
    primitive_spec,
    validate,
)

OBJECTINFO = ObjectSchema({"name": Primitive("string"), "id": Primitive("string", "uuid")})


def registry_for(definitions, strict=False):
    reg = SpecRegistry(strict_objects=strict)
    definitions_to_specs("definitions", definitions, reg)
    return reg


def defs(text):
    return parse_document(json.dumps({"swagger": "2.0", "paths": {}, "definitions": text})).definitions


# -- compilation -------------------------------------------------------------

def test_objectinfo_gives_three_specs():
    refs = definitions_to_specs("definitions", {"ObjectInfo": OBJECTINFO}, SpecRegistry())
    assert [r.name for r in refs] == [
        "definitions.ObjectInfo/name", "definitions.ObjectInfo/id", "definitions/ObjectInfo"]
    assert [r.kind for r in refs] == ["primitive", "primitive", "object"]


def test_object_spec_lists_its_keys():
    reg = registry_for({"ObjectInfo": OBJECTINFO})
    node = reg.node("definitions/ObjectInfo")
    assert node == ObjNode({"name": "definitions.ObjectInfo/name",
                            "id": "definitions.ObjectInfo/id"}, ())
    # property specs point at the predefined primitives
    assert reg.node("definitions.ObjectInfo/id") == reg.node("prim/string-uuid")


def test_empty_definitions():
    assert definitions_to_specs("definitions", {}, SpecRegistry()) == []


def test_namespace_is_used():
    refs = definitions_to_specs("petstore", {"ObjectInfo": OBJECTINFO}, SpecRegistry())
    assert refs[-1].name == "petstore/ObjectInfo"


def test_array_of_reference_spec():
    d = defs({"ObjectInfo": {"type": "object", "required": ["name"], "properties": {
        "name": {"type": "string"}, "id": {"type": "string", "format": "uuid"}}},
        "Wrap": {"type": "array", "items": {"$ref": "#/definitions/ObjectInfo"}}})
    reg = registry_for(d)
    assert reg.node("array/ObjectInfo") == ArrNode("definitions/ObjectInfo")
    assert reg.ref("definitions/Wrap").kind == "array"

    # hand-applied rules: list; every element an object holding a string name;
    # id, when present, a canonical uuid
    u = "077de3d9-3f50-4756-bb45-ee61be31e8a2"
    cases = [
        ([], True),
        ([{"name": "a", "id": u}, {"name": ""}], True),
        ([{"id": u}], False),
        ([{"name": "a", "id": "nope"}], False),
        ({"name": "a"}, False),
    ]
    for value, expected in cases:
        assert is_valid(reg, "definitions/Wrap", value) is expected, value


def test_inline_items_named_after_owner():
    reg = registry_for(defs({"Tags": {"type": "array", "items": {"type": "integer", "minimum": 0}}}))
    assert reg.node("definitions/Tags") == ArrNode("definitions/Tags-items")
    assert reg.node("definitions/Tags-items") == PrimNode("integer", minimum=0)


def test_registration_idempotent_and_collisions():
    reg = SpecRegistry()
    reg.register("x/a", PrimNode("string"), Primitive("string"))
    reg.register("x/a", PrimNode("string"), Primitive("string"))
    with pytest.raises(CollisionError):
        reg.register("x/a", PrimNode("integer"), Primitive("integer"))


def test_recompiling_same_definitions_is_idempotent():
    reg = registry_for({"ObjectInfo": OBJECTINFO})
    assert definitions_to_specs("definitions", {"ObjectInfo": OBJECTINFO}, reg) == []


def test_unresolvable_reference():
    from quickrest.errors import UnresolvableReference
    from quickrest.model import Reference
    with pytest.raises(UnresolvableReference):
        definitions_to_specs("definitions", {"A": Reference("B")}, SpecRegistry())


def test_compile_api_names(objects_api):
    c = compile_api(objects_api)
    assert c.params[("GET /objects", "q")] == "GET /objects#param/q"
    assert c.registry.node(c.responses[("GET /objects", "200")]) == ArrNode("definitions/ObjectInfo")
    assert ("GET /objects/{objectid}", "404") not in c.responses


# -- primitives --------------------------------------------------------------

def test_uuid_spec():
    reg = SpecRegistry()
    ref = primitive_spec("string", "uuid")
    assert ref == SpecRef("prim/string-uuid", "primitive")
    assert validate(reg, ref, "077de3d9-3f50-4756-bb45-ee61be31e8a2").conforms
    res = validate(reg, ref, "")
    assert [(v.json_path, v.expected) for v in res.violations] == [
        ("$", "does not match uuid pattern")]


def test_integer_rejects_fraction():
    reg = SpecRegistry()
    ref = primitive_spec("integer")
    assert not validate(reg, ref, 1.5).conforms
    assert validate(reg, ref, 2.0).conforms
    assert not validate(reg, ref, True).conforms


def test_number_accepts_both():
    reg = SpecRegistry()
    assert is_valid(reg, primitive_spec("number"), 1)
    assert is_valid(reg, primitive_spec("number"), 1.5)
    assert not is_valid(reg, primitive_spec("number"), False)


def test_unknown_format_falls_back():
    assert primitive_spec("string", "email") == primitive_spec("string")


def test_unsupported_primitive():
    with pytest.raises(UnsupportedType):
        primitive_spec("date")


def test_datetime():
    reg = SpecRegistry()
    ref = primitive_spec("string", "date-time")
    assert is_valid(reg, ref, "2019-03-01T12:00:00Z")
    assert is_valid(reg, ref, "2019-03-01T12:00:00.123456789+02:00")
    assert not is_valid(reg, ref, "2019-02-30T12:00:00Z")
    assert not is_valid(reg, ref, "yesterday")


# -- validate ----------------------------------------------------------------

def test_age_spec():
    # nat-int below 150
    reg = registry_for(defs({"age": {"type": "integer", "minimum": 0, "maximum": 150,
                                     "exclusiveMaximum": True}}))
    assert validate(reg, "definitions/age", 15).conforms
    assert not validate(reg, "definitions/age", 150).conforms
    assert not validate(reg, "definitions/age", -1).conforms


def test_required_key_violation_path():
    loose = registry_for({"ObjectInfo": OBJECTINFO})
    assert validate(loose, "definitions/ObjectInfo", {}).conforms
    strict = registry_for({"ObjectInfo": ObjectSchema(OBJECTINFO.properties, ("name",))})
    res = validate(strict, "definitions/ObjectInfo", {})
    assert [(v.json_path, v.expected, v.actual) for v in res.violations] == [
        ("$.name", "required key present", "missing")]


def test_top_level_array_type():
    reg = registry_for(defs({"L": {"type": "array", "items": {"type": "string"}}}))
    res = validate(reg, "definitions/L", 7)
    assert [(v.json_path, v.expected) for v in res.violations] == [("$", "expected array")]


def test_nested_paths():
    reg = registry_for(defs({"A": {"type": "object", "properties": {
        "items": {"type": "array", "items": {"type": "object", "properties": {
            "n": {"type": "integer"}, "odd key": {"type": "boolean"}}}}}}}))
    res = validate(reg, "definitions/A", {"items": [{"n": 1}, {"n": "x", "odd key": 0}]})
    assert [v.json_path for v in res.violations] == ['$.items[1].n', '$.items[1]["odd key"]']


def test_enum_deep_equality():
    reg = registry_for(defs({"E": {"type": "integer", "enum": [1, 2]}}))
    assert is_valid(reg, "definitions/E", 1.0)
    assert not is_valid(reg, "definitions/E", True)
    assert not is_valid(reg, "definitions/E", 3)


def test_extra_keys_allowed_unless_strict():
    assert is_valid(registry_for({"O": OBJECTINFO}), "definitions/O", {"extra": 1})
    res = validate(registry_for({"O": OBJECTINFO}, strict=True), "definitions/O", {"extra": 1})
    assert [v.json_path for v in res.violations] == ["$.extra"]


def test_unknown_spec():
    with pytest.raises(UnknownSpec):
        validate(SpecRegistry(), "definitions/Nope", 1)


def test_pattern():
    reg = registry_for(defs({"P": {"type": "string", "pattern": "^[a-z]{2}[0-9]$"}}))
    assert is_valid(reg, "definitions/P", "ab1")
    assert not is_valid(reg, "definitions/P", "abc")


def test_json_equal():
    assert json_equal({"a": [1, 2.0]}, {"a": [1.0, 2]})
    assert not json_equal(1, True)
    assert not json_equal([0], [False])
    assert not json_equal({"a": 1}, {"a": 1, "b": 2})


# -- properties --------------------------------------------------------------

json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-1000, 1000)
    | st.floats(allow_nan=False, allow_infinity=False) | st.text(max_size=5),
    lambda inner: st.lists(inner, max_size=3) | st.dictionaries(st.text("abn", max_size=2), inner,
                                                                  max_size=3),
    max_leaves=8)

prims = st.one_of(
    st.just({"type": "string"}),
    st.just({"type": "string", "format": "uuid"}),
    st.just({"type": "string", "pattern": "^a"}),
    st.builds(lambda lo: {"type": "integer", "minimum": lo}, st.integers(-3, 3)),
    st.builds(lambda hi: {"type": "number", "maximum": hi, "exclusiveMaximum": True},
              st.integers(-3, 3)),
    st.just({"type": "boolean"}),
    st.just({"type": "integer", "enum": [0, 1, 2]}),
)
schemas = st.recursive(prims, lambda inner: st.one_of(
    st.builds(lambda i: {"type": "array", "items": i}, inner),
    st.dictionaries(st.text("abn", min_size=1, max_size=2), inner, max_size=3).flatmap(
        lambda props: st.builds(lambda req: {"type": "object", "properties": props,
                                             "required": req},
                                st.lists(st.sampled_from(sorted(props)), unique=True)
                                if props else st.just([])))), max_leaves=5)


# draft-4 keywords, but integral floats count as integers (as in later drafts)
Oracle = jsonschema.validators.extend(jsonschema.Draft4Validator,
                                      type_checker=jsonschema.Draft6Validator.TYPE_CHECKER)


def _oracle_schema(s):
    # jsonschema's draft-4 validator does not check "uuid"; spell it as a pattern
    if isinstance(s, dict):
        if s.get("format") == "uuid":
            s = {k: v for k, v in s.items() if k != "format"}
            s["pattern"] = "^[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}$"
        return {k: _oracle_schema(v) for k, v in s.items()}
    return s


@settings(max_examples=400, deadline=None)
@given(schemas, json_values)
def test_validate_agrees_with_jsonschema(schema, value):
    reg = registry_for(defs({"S": schema}))
    ours = validate(reg, "definitions/S", value).conforms
    theirs = Oracle(_oracle_schema(schema)).is_valid(value)
    assert ours == theirs


@settings(max_examples=200, deadline=None)
@given(schemas, json_values)
def test_conforms_iff_no_violations(schema, value):
    reg = registry_for(defs({"S": schema}))
    res = validate(reg, "definitions/S", value)
    assert res.conforms == (len(res.violations) == 0)
    assert res == validate(reg, "definitions/S", value)


@settings(max_examples=100, deadline=None)
@given(schemas)
def test_identical_schemas_compile_identically(schema):
    d = defs({"A": schema, "B": schema})
    reg = registry_for(d)
    assert schema_to_json(d["A"]) == schema_to_json(d["B"])
    a, b = reg.node("definitions/A"), reg.node("definitions/B")
    assert type(a) is type(b)


@pytest.mark.parametrize("pattern,value,ok", [
    ("^abc$", "abc", True), ("^abc$", "abc\n", False), ("^[a$]+$", "a$", True),
    (r"^a\$$", "a$", True), ("b", "abc", True)])
def test_pattern_dollar_means_end_of_input(pattern, value, ok):
    from quickrest.specs import schema_pattern
    assert bool(schema_pattern(pattern).search(value)) is ok


@pytest.mark.parametrize("fmt,value", [
    ("uuid", "077de3d9-3f50-4756-bb45-ee61be31e8a2\n"),
    ("date-time", "2020-01-01T00:00:00Z\n"),
    ("date-time", "２020-01-01T00:00:00Z")])
def test_formats_reject_trailing_newline_and_wide_digits(fmt, value):
    reg = SpecRegistry()
    assert not validate(reg, f"prim/string-{fmt}", value).conforms
