"""Compile data schemas into named specs that both validate and generate.

A spec is a node registered under a namespaced name. Object specs refer to
one sub-spec per property by name, array specs refer to their item spec, and
unconstrained primitives alias the predefined ``prim/<type>[-<format>]``
specs. The same registry drives response validation here and value
generation in :mod:`quickrest.gen`.
"""
from __future__ import annotations

import functools
import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional, Tuple, Union

from .errors import (
    CollisionError,
    CyclicReference,
    UnknownSpec,
    UnresolvableReference,
    UnsupportedType,
)
from .model import (
    KNOWN_FORMATS,
    AnySchema,
    ApiDescription,
    ArraySchema,
    DataSchema,
    ObjectSchema,
    Primitive,
    Reference,
    list_operations,
)

UUID_RE = re.compile(r"[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}")
DATE_TIME_RE = re.compile(
    r"\d{4}-\d{2}-\d{2}[Tt]\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+-]\d{2}:\d{2})", re.ASCII)


@functools.lru_cache(maxsize=256)
def schema_pattern(pattern: str) -> "re.Pattern":
    """Compile a schema ``pattern``. An unescaped ``$`` outside a class means end of
    input, as in ECMA 262; Python's ``$`` would also match before a final newline."""
    out, i, in_class = [], 0, False
    while i < len(pattern):
        c = pattern[i]
        if c == "\\":
            out.append(pattern[i:i + 2])
            i += 2
            continue
        if c == "[":
            in_class = True
        elif c == "]":
            in_class = False
        out.append(r"\Z" if c == "$" and not in_class else c)
        i += 1
    return re.compile("".join(out))


# -- nodes -------------------------------------------------------------------

@dataclass(frozen=True)
class PrimNode:
    type: str
    format: Optional[str] = None
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    exclusive_minimum: bool = False
    exclusive_maximum: bool = False
    pattern: Optional[str] = None


@dataclass(frozen=True)
class EnumNode:
    values: Tuple[Any, ...]


@dataclass(frozen=True)
class ArrNode:
    items: str


@dataclass(frozen=True)
class ObjNode:
    properties: Dict[str, str]
    required: Tuple[str, ...] = ()


@dataclass(frozen=True)
class AnyNode:
    pass


@dataclass(frozen=True)
class AliasNode:
    target: str


Node = Union[PrimNode, EnumNode, ArrNode, ObjNode, AnyNode, AliasNode]


@dataclass(frozen=True)
class SpecRef:
    name: str
    kind: str  # primitive | array | object | enum | any


@dataclass
class CompiledSpec:
    name: str
    node: Node
    schema: Any  # the source DataSchema, used for collision checks


@dataclass(frozen=True)
class Violation:
    json_path: str
    expected: str
    actual: str


@dataclass(frozen=True)
class ValidationResult:
    violations: Tuple[Violation, ...] = ()

    @property
    def conforms(self) -> bool:
        return not self.violations


# -- registry ----------------------------------------------------------------

def _prim_name(typ: str, fmt: Optional[str]) -> str:
    return f"prim/{typ}-{fmt}" if fmt else f"prim/{typ}"


class SpecRegistry:
    """Name -> compiled spec. Predefined primitive specs are always present.

    ``strict_objects`` makes undeclared keys in objects a violation.
    """

    def __init__(self, strict_objects: bool = False):
        self.specs: Dict[str, CompiledSpec] = {}
        self.strict_objects = strict_objects
        for typ, formats in KNOWN_FORMATS.items():
            for fmt in (None, *sorted(formats)):
                name = _prim_name(typ, fmt)
                self.specs[name] = CompiledSpec(name, PrimNode(typ, fmt), Primitive(typ, fmt))

    def __contains__(self, name: str) -> bool:
        return name in self.specs

    def register(self, name: str, node: Node, schema: Any) -> None:
        existing = self.specs.get(name)
        if existing is not None:
            if existing.schema != schema:
                raise CollisionError(f"spec {name!r} already registered with a different schema")
            return
        self.specs[name] = CompiledSpec(name, node, schema)

    def node(self, name: str) -> Node:
        """The concrete (non-alias) node behind ``name``."""
        seen = []
        while True:
            try:
                node = self.specs[name].node
            except KeyError:
                raise UnknownSpec(name) from None
            if not isinstance(node, AliasNode):
                return node
            if name in seen:
                raise CyclicReference(seen)
            seen.append(name)
            name = node.target

    def ref(self, name: str) -> SpecRef:
        return SpecRef(name, _kind(self.node(name)))


def _kind(node: Node) -> str:
    return {PrimNode: "primitive", EnumNode: "enum", ArrNode: "array",
            ObjNode: "object", AnyNode: "any"}[type(node)]


def _child_prefix(name: str) -> str:
    ns, _, local = name.rpartition("/")
    return f"{ns}.{local}" if ns else local


# -- compilation ---------------------------------------------------------------

class _Compiler:
    def __init__(self, registry: SpecRegistry, definitions: Dict[str, DataSchema],
                 def_ns: str = "definitions"):
        self.registry = registry
        self.definitions = definitions
        self.def_ns = def_ns
        self.created: List[str] = []

    def _register(self, name: str, node: Node, schema: Any) -> str:
        fresh = name not in self.registry
        self.registry.register(name, node, schema)
        if fresh:
            self.created.append(name)
        return name

    def def_name(self, ref: str) -> str:
        if ref not in self.definitions:
            raise UnresolvableReference(ref)
        return f"{self.def_ns}/{ref}"

    def check_alias_chain(self, start: str) -> None:
        chain = []
        schema: Any = Reference(start)
        while isinstance(schema, Reference):
            if schema.name in chain:
                raise CyclicReference(chain[chain.index(schema.name):])
            if schema.name not in self.definitions:
                raise UnresolvableReference(schema.name)
            chain.append(schema.name)
            schema = self.definitions[schema.name]

    def compile(self, name: str, schema: DataSchema) -> str:
        """Register ``schema`` under ``name`` and return the name to reference."""
        if isinstance(schema, Reference):
            self.check_alias_chain(schema.name)
            target = self.def_name(schema.name)
            if target == name:
                raise CyclicReference([schema.name])
            return self._register(name, AliasNode(target), schema)
        if isinstance(schema, AnySchema):
            return self._register(name, AnyNode(), schema)
        if isinstance(schema, Primitive):
            if schema.enum is not None:
                return self._register(name, EnumNode(tuple(schema.enum)), schema)
            node = PrimNode(schema.type, schema.format, schema.minimum, schema.maximum,
                            schema.exclusive_minimum, schema.exclusive_maximum, schema.pattern)
            if node == PrimNode(schema.type, schema.format):
                return self._register(name, AliasNode(_prim_name(schema.type, schema.format)),
                                      schema)
            return self._register(name, node, schema)
        if isinstance(schema, ArraySchema):
            if isinstance(schema.items, Reference):
                self.check_alias_chain(schema.items.name)
                shared = f"array/{schema.items.name}"
                self._register(shared, ArrNode(self.def_name(schema.items.name)), schema)
                if name == shared:
                    return shared
                return self._register(name, AliasNode(shared), schema)
            items = self.compile(f"{name}-items", schema.items)
            return self._register(name, ArrNode(items), schema)
        if isinstance(schema, ObjectSchema):
            prefix = _child_prefix(name)
            props = {}
            for prop, sub in schema.properties.items():
                props[prop] = self.compile(f"{prefix}/{prop}", sub)
            return self._register(name, ObjNode(props, tuple(schema.required)), schema)
        raise UnsupportedType(f"cannot compile {schema!r}")


def definitions_to_specs(namespace: str, definitions: Dict[str, DataSchema],
                         registry: SpecRegistry) -> List[SpecRef]:
    """Register one spec per definition (plus property/item sub-specs).

    Returns refs for every spec newly created, sub-specs before the spec
    that ties them together.
    """
    comp = _Compiler(registry, definitions, namespace)
    for name, schema in definitions.items():
        comp.compile(f"{namespace}/{name}", schema)
    return [registry.ref(n) for n in comp.created]


def primitive_spec(type: str, format: Optional[str] = None) -> SpecRef:
    if type not in KNOWN_FORMATS:
        raise UnsupportedType(f"unsupported primitive type {type!r}")
    if format not in KNOWN_FORMATS[type]:
        format = None
    return SpecRef(_prim_name(type, format), "primitive")


@dataclass
class CompiledApi:
    """Every spec needed to test an API, keyed the way the checker looks them up."""

    registry: SpecRegistry
    params: Dict[Tuple[str, str], str] = field(default_factory=dict)      # (op id, key) -> spec
    responses: Dict[Tuple[str, str], str] = field(default_factory=dict)   # (op id, status key)

    def assignment_spec(self, op) -> ObjNode:
        """An object node whose properties are the operation's parameters."""
        keys = op.param_keys()
        return ObjNode({k: self.params[(op.id, k)] for k in keys},
                       tuple(k for k, p in keys.items() if p.required))


def compile_api(api: ApiDescription, strict_objects: bool = False) -> CompiledApi:
    registry = SpecRegistry(strict_objects=strict_objects)
    definitions_to_specs("definitions", api.definitions, registry)
    out = CompiledApi(registry)
    comp = _Compiler(registry, api.definitions)
    for op in list_operations(api):
        for key, p in op.param_keys().items():
            out.params[(op.id, key)] = comp.compile(f"{op.id}#param/{key}", p.schema)
        for status, resp in op.responses.items():
            if resp.schema is not None:
                out.responses[(op.id, status)] = comp.compile(
                    f"{op.id}#response/{status}", resp.schema)
    return out


# -- validation --------------------------------------------------------------

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _key_path(path: str, key: str) -> str:
    return f"{path}.{key}" if _IDENT.match(key) else f"{path}[{json.dumps(key)}]"


def render(value: Any, limit: int = 60) -> str:
    text = json.dumps(value, ensure_ascii=True, default=repr)
    return text if len(text) <= limit else text[:limit - 3] + "..."


def json_type(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "array"
    if isinstance(value, dict):
        return "object"
    return type(value).__name__


def json_equal(a: Any, b: Any) -> bool:
    """Structural equality that keeps booleans and numbers apart."""
    ta, tb = json_type(a), json_type(b)
    if {ta, tb} <= {"integer", "number"}:
        return a == b
    if ta != tb:
        return False
    if ta == "array":
        return len(a) == len(b) and all(json_equal(x, y) for x, y in zip(a, b))
    if ta == "object":
        return a.keys() == b.keys() and all(json_equal(a[k], b[k]) for k in a)
    return a == b


def is_integer(value: Any) -> bool:
    if isinstance(value, bool):
        return False
    if isinstance(value, int):
        return True
    return isinstance(value, float) and math.isfinite(value) and value.is_integer()


def _check_prim(node: PrimNode, value: Any, path: str, out: List[Violation]) -> None:
    typ = node.type
    if typ == "string":
        if not isinstance(value, str):
            out.append(Violation(path, "string", render(value)))
            return
        if node.format == "uuid" and not UUID_RE.fullmatch(value):
            out.append(Violation(path, "does not match uuid pattern", render(value)))
        elif node.format == "date-time" and not _valid_datetime(value):
            out.append(Violation(path, "RFC 3339 date-time", render(value)))
        if node.pattern is not None and not schema_pattern(node.pattern).search(value):
            out.append(Violation(path, f"string matching /{node.pattern}/", render(value)))
        return
    if typ == "boolean":
        if not isinstance(value, bool):
            out.append(Violation(path, "boolean", render(value)))
        return
    if typ == "integer":
        if not is_integer(value):
            out.append(Violation(path, "integer", render(value)))
            return
    elif isinstance(value, bool) or not isinstance(value, (int, float)) \
            or not math.isfinite(value):
        out.append(Violation(path, "number", render(value)))
        return
    if node.minimum is not None:
        if value < node.minimum or (node.exclusive_minimum and value == node.minimum):
            op = ">" if node.exclusive_minimum else ">="
            out.append(Violation(path, f"{typ} {op} {node.minimum}", render(value)))
    if node.maximum is not None:
        if value > node.maximum or (node.exclusive_maximum and value == node.maximum):
            op = "<" if node.exclusive_maximum else "<="
            out.append(Violation(path, f"{typ} {op} {node.maximum}", render(value)))


def _valid_datetime(value: str) -> bool:
    if not DATE_TIME_RE.fullmatch(value):
        return False
    text = value.upper().replace("Z", "+00:00")
    # fromisoformat before 3.11 only takes 0, 3 or 6 fractional digits
    if "." in text:
        head, _, rest = text.partition(".")
        digits = len(rest) - 6
        text = head + "." + (rest[:digits] + "000000")[:6] + rest[digits:]
    try:
        datetime.fromisoformat(text)
    except ValueError:
        return False
    return True


def _validate(registry: SpecRegistry, name: str, value: Any, path: str,
              out: List[Violation]) -> None:
    node = registry.node(name)
    if isinstance(node, PrimNode):
        _check_prim(node, value, path, out)
    elif isinstance(node, EnumNode):
        if not any(json_equal(value, v) for v in node.values):
            out.append(Violation(path, "one of " + render(list(node.values)), render(value)))
    elif isinstance(node, ArrNode):
        if not isinstance(value, list):
            out.append(Violation(path, "expected array", render(value)))
            return
        for i, item in enumerate(value):
            _validate(registry, node.items, item, f"{path}[{i}]", out)
    elif isinstance(node, ObjNode):
        if not isinstance(value, dict):
            out.append(Violation(path, "expected object", render(value)))
            return
        for key in node.required:
            if key not in value:
                out.append(Violation(_key_path(path, key), "required key present", "missing"))
        for key, item in value.items():
            sub = node.properties.get(key)
            if sub is not None:
                _validate(registry, sub, item, _key_path(path, key), out)
            elif registry.strict_objects:
                out.append(Violation(_key_path(path, key), "no undeclared keys", render(item)))


def validate(registry: SpecRegistry, spec: Union[SpecRef, str], value: Any) -> ValidationResult:
    """Check ``value`` against a registered spec, collecting every violation."""
    name = spec.name if isinstance(spec, SpecRef) else spec
    if name not in registry:
        raise UnknownSpec(name)
    out: List[Violation] = []
    _validate(registry, name, value, "$", out)
    return ValidationResult(tuple(out))


def is_valid(registry: SpecRegistry, spec: Union[SpecRef, str], value: Any) -> bool:
    return validate(registry, spec, value).conforms
