"""OpenAPI 2.0 document model: parsing, reference resolution and serialization.

Only the JSON flavour of Swagger 2.0 is accepted. Anything the tool does not
use (descriptions, tags, security definitions, vendor extensions) is dropped
during parsing.
"""
from __future__ import annotations

import json
import logging
import re
import urllib.request
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

from .errors import (
    CyclicReference,
    InvalidModel,
    MalformedJson,
    UnknownReference,
    UnsupportedVersion,
)

log = logging.getLogger(__name__)

VERBS = ("get", "post", "put", "delete", "patch", "head")
LOCATIONS = ("path", "query", "header", "body", "form")
PRIMITIVE_TYPES = ("string", "integer", "number", "boolean")
KNOWN_FORMATS = {
    "string": {"uuid", "date-time"},
    "integer": {"int32", "int64"},
    "number": {"float", "double"},
    "boolean": set(),
}
DEFAULT_MEDIA = ("application/json",)

_PLACEHOLDER = re.compile(r"\{([^{}]+)\}")
_STATUS_KEY = re.compile(r"^[0-9]{3}$")


# -- schemas -----------------------------------------------------------------

@dataclass(frozen=True)
class Primitive:
    type: str
    format: Optional[str] = None
    enum: Optional[Tuple[Any, ...]] = None
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    exclusive_minimum: bool = False
    exclusive_maximum: bool = False
    pattern: Optional[str] = None


@dataclass(frozen=True)
class ArraySchema:
    items: "DataSchema"


@dataclass(frozen=True)
class ObjectSchema:
    properties: Dict[str, "DataSchema"] = field(default_factory=dict)
    required: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Reference:
    name: str


@dataclass(frozen=True)
class AnySchema:
    """A schema without a type: any JSON value is accepted."""


DataSchema = Union[Primitive, ArraySchema, ObjectSchema, Reference, AnySchema]


# -- document ----------------------------------------------------------------

@dataclass(frozen=True)
class ParameterSpec:
    name: str
    location: str
    required: bool
    schema: DataSchema
    collection_format: Optional[str] = None


@dataclass(frozen=True)
class ResponseSpec:
    status_key: str
    schema: Optional[DataSchema] = None


@dataclass(frozen=True)
class OperationSpec:
    verb: str
    path_template: str
    parameters: Tuple[ParameterSpec, ...] = ()
    responses: Dict[str, ResponseSpec] = field(default_factory=dict)
    consumes: Tuple[str, ...] = DEFAULT_MEDIA
    produces: Tuple[str, ...] = DEFAULT_MEDIA

    @property
    def id(self) -> str:
        return f"{self.verb} {self.path_template}"

    def response_for(self, status: int) -> Optional[ResponseSpec]:
        """The documented response for ``status``, falling back to ``default``."""
        return self.responses.get(str(status)) or self.responses.get("default")

    def documents(self, status: int) -> bool:
        return self.response_for(status) is not None

    def param_keys(self) -> Dict[str, ParameterSpec]:
        """Assignment keys for the parameters.

        The key is the bare parameter name unless two parameters of this
        operation share a name, in which case it becomes ``location:name``.
        """
        counts: Dict[str, int] = {}
        for p in self.parameters:
            counts[p.name] = counts.get(p.name, 0) + 1
        return {
            (p.name if counts[p.name] == 1 else f"{p.location}:{p.name}"): p
            for p in self.parameters
        }


@dataclass(frozen=True)
class ApiDescription:
    scheme: str = "http"
    host: str = ""
    base_path: str = ""
    paths: Dict[str, Dict[str, OperationSpec]] = field(default_factory=dict)
    definitions: Dict[str, DataSchema] = field(default_factory=dict)
    warnings: Tuple[str, ...] = field(default=(), compare=False)

    @property
    def base_url(self) -> str:
        if not self.host:
            return ""
        return f"{self.scheme}://{self.host}{self.base_path}"

    def operation(self, op_id: str) -> OperationSpec:
        verb, _, path = op_id.partition(" ")
        return self.paths[path][verb.upper()]


# -- parsing -----------------------------------------------------------------

def _ptr(*parts) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


class _Parser:
    def __init__(self, doc: dict):
        self.doc = doc
        self.violations: List[Tuple[str, str]] = []
        self.warnings: List[str] = []
        self.refs: List[Tuple[str, str]] = []  # (pointer, definition name)

    def violate(self, pointer: str, msg: str) -> None:
        self.violations.append((pointer, msg))

    def schema(self, node: Any, pointer: str) -> DataSchema:
        if not isinstance(node, dict):
            self.violate(pointer, "schema must be an object")
            return AnySchema()
        if "$ref" in node:
            ref = node["$ref"]
            if not isinstance(ref, str) or not ref.startswith("#/definitions/"):
                self.violate(pointer + "/$ref", f"unsupported reference {ref!r}")
                return AnySchema()
            name = ref[len("#/definitions/"):]
            self.refs.append((pointer + "/$ref", name))
            return Reference(name)

        typ = node.get("type")
        if typ is None:
            if "properties" in node or "required" in node:
                typ = "object"
            elif "items" in node:
                typ = "array"
            else:
                return AnySchema()

        if typ == "object":
            props = {}
            raw_props = node.get("properties") or {}
            if not isinstance(raw_props, dict):
                self.violate(pointer + "/properties", "properties must be an object")
                raw_props = {}
            for name, sub in raw_props.items():
                props[name] = self.schema(sub, pointer + _ptr("properties", name))
            required = node.get("required") or []
            if not isinstance(required, list):
                self.violate(pointer + "/required", "required must be a list")
                required = []
            for i, name in enumerate(required):
                if name not in props:
                    self.violate(pointer + _ptr("required", i),
                                 f"required key {name!r} is not a declared property")
            return ObjectSchema(props, tuple(required))

        if typ == "array":
            if "items" not in node:
                self.violate(pointer, "array schema without items")
                return ArraySchema(AnySchema())
            return ArraySchema(self.schema(node["items"], pointer + "/items"))

        if typ not in PRIMITIVE_TYPES:
            self.violate(pointer + "/type", f"unsupported type {typ!r}")
            return AnySchema()

        fmt = node.get("format")
        if fmt is not None and fmt not in KNOWN_FORMATS[typ]:
            self.warnings.append(
                f"{pointer or '/'}: unknown format {fmt!r} for {typ}, treated as plain {typ}")
            fmt = None
        enum = node.get("enum")
        if enum is not None:
            if not isinstance(enum, list) or not enum:
                self.violate(pointer + "/enum", "enum must be a non-empty list")
                enum = None
            else:
                enum = tuple(enum)
        pattern = node.get("pattern")
        if pattern is not None:
            try:
                re.compile(pattern)
            except re.error as exc:
                self.violate(pointer + "/pattern", f"bad pattern: {exc}")
                pattern = None
        for bound in ("minimum", "maximum"):
            if bound in node and not _is_number(node[bound]):
                self.violate(pointer + "/" + bound, f"{bound} must be a number")
        return Primitive(
            type=typ,
            format=fmt,
            enum=enum,
            minimum=node.get("minimum") if _is_number(node.get("minimum")) else None,
            maximum=node.get("maximum") if _is_number(node.get("maximum")) else None,
            exclusive_minimum=bool(node.get("exclusiveMinimum", False)),
            exclusive_maximum=bool(node.get("exclusiveMaximum", False)),
            pattern=pattern,
        )

    def deref(self, node: Any, section: str, pointer: str) -> Tuple[Any, str]:
        """Follow a ``#/parameters/..`` or ``#/responses/..`` indirection."""
        if isinstance(node, dict) and isinstance(node.get("$ref"), str) \
                and node["$ref"].startswith(f"#/{section}/"):
            name = node["$ref"][len(section) + 3:]
            target = (self.doc.get(section) or {}).get(name)
            if target is None:
                self.violate(pointer + "/$ref", f"dangling reference {node['$ref']!r}")
                return None, pointer
            return target, _ptr(section, name)
        return node, pointer

    def parameter(self, node: Any, pointer: str) -> Optional[ParameterSpec]:
        node, pointer = self.deref(node, "parameters", pointer)
        if not isinstance(node, dict):
            if node is not None:
                self.violate(pointer, "parameter must be an object")
            return None
        name, loc = node.get("name"), node.get("in")
        if loc == "formData":
            loc = "form"
        if not isinstance(name, str) or not name:
            self.violate(pointer + "/name", "parameter name missing")
            return None
        if loc not in LOCATIONS:
            self.violate(pointer + "/in", f"unknown parameter location {node.get('in')!r}")
            return None
        required = bool(node.get("required", False))
        if loc == "path" and not required:
            self.violate(pointer + "/required", "path parameters must be required")
        if loc == "body":
            if "schema" not in node:
                self.violate(pointer, "body parameter without schema")
                schema: DataSchema = AnySchema()
            else:
                schema = self.schema(node["schema"], pointer + "/schema")
        else:
            if node.get("type") == "file":
                self.warnings.append(f"{pointer}: file parameters are sent as plain strings")
                node = dict(node, type="string")
            schema = self.schema({k: v for k, v in node.items()
                                  if k not in ("name", "in", "required", "description")},
                                 pointer)
        cf = node.get("collectionFormat")
        if cf is not None and cf not in ("csv", "multi"):
            self.warnings.append(
                f"{pointer}: collectionFormat {cf!r} unsupported, csv used instead")
            cf = "csv"
        return ParameterSpec(name, loc, required, schema, cf)

    def operation(self, path: str, verb: str, node: Any, shared: List[ParameterSpec],
                  consumes, produces) -> OperationSpec:
        pointer = _ptr("paths", path, verb)
        if not isinstance(node, dict):
            self.violate(pointer, "operation must be an object")
            node = {}
        params: Dict[Tuple[str, str], ParameterSpec] = {(p.location, p.name): p for p in shared}
        seen = set()
        for i, raw in enumerate(node.get("parameters") or []):
            p = self.parameter(raw, pointer + _ptr("parameters", i))
            if p is None:
                continue
            key = (p.location, p.name)
            if key in seen:
                self.violate(pointer + _ptr("parameters", i),
                             f"duplicate parameter {p.name!r} in {p.location}")
            seen.add(key)
            params[key] = p
        plist = tuple(params.values())
        if sum(1 for p in plist if p.location == "body") > 1:
            self.violate(pointer + "/parameters", "more than one body parameter")
        holes = set(_PLACEHOLDER.findall(path))
        path_names = {p.name for p in plist if p.location == "path"}
        for name in sorted(holes - path_names):
            self.violate(pointer, f"placeholder {{{name}}} has no path parameter")
        for name in sorted(path_names - holes):
            self.violate(pointer, f"path parameter {name!r} has no placeholder")

        responses = {}
        for key, raw in (node.get("responses") or {}).items():
            if key.startswith("x-"):
                continue
            rptr = pointer + _ptr("responses", key)
            if key != "default":
                if not _STATUS_KEY.match(key):
                    self.violate(rptr, f"invalid status key {key!r}")
                    continue
                if not 100 <= int(key) <= 599:
                    self.violate(rptr, f"status {key} outside 100-599")
                    continue
            raw, rptr = self.deref(raw, "responses", rptr)
            schema = None
            if isinstance(raw, dict) and "schema" in raw:
                schema = self.schema(raw["schema"], rptr + "/schema")
            responses[key] = ResponseSpec(key, schema)

        return OperationSpec(
            verb=verb.upper(),
            path_template=path,
            parameters=plist,
            responses=responses,
            consumes=tuple(node.get("consumes") or consumes),
            produces=tuple(node.get("produces") or produces),
        )

    def run(self) -> ApiDescription:
        doc = self.doc
        definitions = {}
        for name, raw in (doc.get("definitions") or {}).items():
            definitions[name] = self.schema(raw, _ptr("definitions", name))

        consumes = doc.get("consumes") or DEFAULT_MEDIA
        produces = doc.get("produces") or DEFAULT_MEDIA
        paths: Dict[str, Dict[str, OperationSpec]] = {}
        raw_paths = doc.get("paths") or {}
        if not isinstance(raw_paths, dict):
            self.violate("/paths", "paths must be an object")
            raw_paths = {}
        for path, item in raw_paths.items():
            if path.startswith("x-"):
                continue
            if not path.startswith("/"):
                self.violate(_ptr("paths", path), "path template must start with '/'")
                continue
            if not isinstance(item, dict):
                self.violate(_ptr("paths", path), "path item must be an object")
                continue
            shared = []
            for i, raw in enumerate(item.get("parameters") or []):
                p = self.parameter(raw, _ptr("paths", path, "parameters", i))
                if p is not None:
                    shared.append(p)
            ops = {}
            for verb, raw in item.items():
                if verb in VERBS:
                    op = self.operation(path, verb, raw, shared, consumes, produces)
                    ops[op.verb] = op
                elif verb == "options":
                    self.warnings.append(f"{_ptr('paths', path, verb)}: OPTIONS is not tested")
            paths[path] = ops

        for pointer, name in self.refs:
            if name not in definitions:
                self.violate(pointer, f"dangling reference #/definitions/{name}")

        if self.violations:
            raise InvalidModel(self.violations)
        for w in self.warnings:
            log.warning(w)
        return ApiDescription(
            scheme=(doc.get("schemes") or ["http"])[0],
            host=doc.get("host", "") or "",
            base_path=(doc.get("basePath", "") or "").rstrip("/"),
            paths=paths,
            definitions=definitions,
            warnings=tuple(self.warnings),
        )


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def parse_document(text: Union[str, bytes]) -> ApiDescription:
    """Parse an OpenAPI 2.0 JSON document into an :class:`ApiDescription`."""
    try:
        doc = json.loads(text)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedJson(str(exc)) from None
    if not isinstance(doc, dict):
        raise MalformedJson("top-level JSON value must be an object")
    if doc.get("swagger") != "2.0":
        raise UnsupportedVersion(f"swagger version {doc.get('swagger')!r}, expected '2.0'")
    return _Parser(doc).run()


def load_source(source: str, timeout: float = 10.0) -> bytes:
    """Read a document from a file path or an http(s) URL."""
    if source.startswith(("http://", "https://")):
        with urllib.request.urlopen(source, timeout=timeout) as resp:
            return resp.read()
    with open(source, "rb") as fh:
        return fh.read()


def resolve_reference(api: ApiDescription, name: str) -> DataSchema:
    """Chase ``name`` through definition aliases down to a concrete schema."""
    chain: List[str] = []
    schema: DataSchema = Reference(name)
    while isinstance(schema, Reference):
        if schema.name in chain:
            raise CyclicReference(chain[chain.index(schema.name):])
        if schema.name not in api.definitions:
            raise UnknownReference(schema.name)
        chain.append(schema.name)
        schema = api.definitions[schema.name]
    return schema


def list_operations(api: ApiDescription) -> List[OperationSpec]:
    return [api.paths[p][v] for p in sorted(api.paths) for v in sorted(api.paths[p])]


# -- serialization -----------------------------------------------------------

def schema_to_json(schema: DataSchema) -> dict:
    if isinstance(schema, Reference):
        return {"$ref": "#/definitions/" + schema.name}
    if isinstance(schema, AnySchema):
        return {}
    if isinstance(schema, ArraySchema):
        return {"type": "array", "items": schema_to_json(schema.items)}
    if isinstance(schema, ObjectSchema):
        out: Dict[str, Any] = {
            "type": "object",
            "properties": {k: schema_to_json(v) for k, v in schema.properties.items()},
        }
        if schema.required:
            out["required"] = list(schema.required)
        return out
    out = {"type": schema.type}
    if schema.format:
        out["format"] = schema.format
    if schema.enum is not None:
        out["enum"] = list(schema.enum)
    if schema.minimum is not None:
        out["minimum"] = schema.minimum
    if schema.maximum is not None:
        out["maximum"] = schema.maximum
    if schema.exclusive_minimum:
        out["exclusiveMinimum"] = True
    if schema.exclusive_maximum:
        out["exclusiveMaximum"] = True
    if schema.pattern is not None:
        out["pattern"] = schema.pattern
    return out


def _param_to_json(p: ParameterSpec) -> dict:
    loc = "formData" if p.location == "form" else p.location
    out: Dict[str, Any] = {"name": p.name, "in": loc, "required": p.required}
    if p.location == "body":
        out["schema"] = schema_to_json(p.schema)
    else:
        out.update(schema_to_json(p.schema))
        if p.collection_format:
            out["collectionFormat"] = p.collection_format
    return out


def to_document(api: ApiDescription) -> dict:
    """Serialize back to the OAS2 subset understood by :func:`parse_document`."""
    paths = {}
    for path, ops in api.paths.items():
        item = {}
        for verb, op in ops.items():
            item[verb.lower()] = {
                "parameters": [_param_to_json(p) for p in op.parameters],
                "responses": {
                    k: ({"description": k, "schema": schema_to_json(r.schema)}
                        if r.schema is not None else {"description": k})
                    for k, r in op.responses.items()
                },
                "consumes": list(op.consumes),
                "produces": list(op.produces),
            }
        paths[path] = item
    doc: Dict[str, Any] = {"swagger": "2.0", "schemes": [api.scheme]}
    if api.host:
        doc["host"] = api.host
    if api.base_path:
        doc["basePath"] = api.base_path
    doc["paths"] = paths
    doc["definitions"] = {k: schema_to_json(v) for k, v in api.definitions.items()}
    return doc
