"""Seeded value generation from compiled specs, plus specification mutation."""
from __future__ import annotations

import copy
import hashlib
import math
import random
import string
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple

from . import regex_gen
from .errors import GenerationExhausted
from .model import ParameterSpec, Primitive
from .specs import (
    AnyNode,
    ArrNode,
    CompiledApi,
    EnumNode,
    ObjNode,
    PrimNode,
    SpecRef,
    SpecRegistry,
    is_integer,
    json_type,
    schema_pattern,
)

ALPHANUMERIC = string.ascii_letters + string.digits
MAX_CODE_POINT = 0x10FFFF
PATTERN_RETRIES = 100
MAX_DEPTH = 32
# past this depth optional properties are dropped so recursive specs terminate
OPTIONAL_DEPTH = 6


class Rng:
    """Seeded random stream that can be split into independent named children."""

    def __init__(self, seed: int):
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self._r = random.Random(self.seed)

    def split(self, *labels) -> "Rng":
        key = ":".join(str(x) for x in (self.seed, *labels)).encode()
        return Rng(int.from_bytes(hashlib.sha256(key).digest()[:8], "big"))

    def random(self) -> float:
        return self._r.random()

    def bernoulli(self, p: float) -> bool:
        return self._r.random() < p

    def randint(self, a: int, b: int) -> int:
        return self._r.randint(a, b)

    def uniform(self, a: float, b: float) -> float:
        return self._r.uniform(a, b)

    def choice(self, seq):
        return self._r.choice(seq)

    def getrandbits(self, k: int) -> int:
        return self._r.getrandbits(k)

    def shuffle(self, seq) -> None:
        self._r.shuffle(seq)


@dataclass(frozen=True)
class GeneratorConfig:
    string_mix: float = 0.5          # P(any-string); alphanumeric otherwise
    charset_max: int = 255
    int_mode: float = 0.5            # P(nat-int); any signed int otherwise
    omit_required_prob: float = 0.0
    out_of_range_prob: float = 0.0
    max_size: int = 200

    def __post_init__(self):
        for name in ("string_mix", "int_mode", "omit_required_prob", "out_of_range_prob"):
            p = getattr(self, name)
            if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0):
                raise ValueError(f"{name} must be a probability in [0, 1], got {p!r}")
        if not 0 <= self.charset_max <= MAX_CODE_POINT:
            raise ValueError(f"charset_max must be within 0..{MAX_CODE_POINT:#x}")
        if self.max_size < 0:
            raise ValueError("max_size must be >= 0")


def size_schedule(test_index: int, cfg: GeneratorConfig) -> int:
    """Size for the ``test_index``-th test of an iteration.

    Size grows by one per test and saturates at ``cfg.max_size``, so the
    longer iterations of later tiers reach larger inputs.
    """
    if test_index < 0:
        raise ValueError("test_index must be >= 0")
    return min(test_index, cfg.max_size)


# -- primitive generators ----------------------------------------------------

def any_char(rng: Rng, charset_max: int) -> str:
    while True:
        cp = rng.randint(0, charset_max)
        if not 0xD800 <= cp <= 0xDFFF:
            return chr(cp)


def gen_string(rng: Rng, cfg: GeneratorConfig, size: int) -> str:
    n = rng.randint(0, size)
    if rng.bernoulli(cfg.string_mix):
        return "".join(any_char(rng, cfg.charset_max) for _ in range(n))
    return "".join(rng.choice(ALPHANUMERIC) for _ in range(n))


def gen_uuid(rng: Rng) -> str:
    return str(uuid.UUID(int=rng.getrandbits(128), version=4))


def gen_datetime(rng: Rng) -> str:
    secs = rng.randint(0, 4102444799)  # through 2099
    return datetime.fromtimestamp(secs, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _pattern_string(node: PrimNode, rng: Rng, cfg: GeneratorConfig, size: int) -> str:
    pick = lambda: any_char(rng, cfg.charset_max) if rng.bernoulli(cfg.string_mix) \
        else rng.choice(ALPHANUMERIC)
    for _ in range(PATTERN_RETRIES):
        if node.format == "uuid":
            s = gen_uuid(rng)
        elif node.format == "date-time":
            s = gen_datetime(rng)
        else:
            try:
                s = regex_gen.generate(node.pattern, rng, size, pick)
            except regex_gen.Unsupported:
                s = gen_string(rng, cfg, size)
        if schema_pattern(node.pattern).search(s):
            return s
    raise GenerationExhausted(
        f"no string matching /{node.pattern}/ after {PATTERN_RETRIES} attempts")


def _int_bounds(node: PrimNode) -> Tuple[Optional[int], Optional[int]]:
    lo = hi = None
    if node.minimum is not None:
        lo = math.ceil(node.minimum)
        if node.exclusive_minimum and lo == node.minimum:
            lo += 1
    if node.maximum is not None:
        hi = math.floor(node.maximum)
        if node.exclusive_maximum and hi == node.maximum:
            hi -= 1
    return lo, hi


def _place(base_lo, base_hi, lo, hi, size):
    """Intersect the size window with the schema bounds, sliding it if they miss."""
    a = base_lo if lo is None else max(base_lo, lo)
    b = base_hi if hi is None else min(base_hi, hi)
    if a <= b:
        return a, b
    if lo is not None and base_hi < lo:
        return lo, lo + size if hi is None else min(hi, lo + size)
    return (hi - size if lo is None else max(lo, hi - size)), hi


def gen_integer(node: PrimNode, rng: Rng, cfg: GeneratorConfig, size: int) -> int:
    base = (0, size) if rng.bernoulli(cfg.int_mode) else (-size, size)
    lo, hi = _int_bounds(node)
    if lo is not None and hi is not None and lo > hi:
        raise GenerationExhausted(f"empty integer range [{node.minimum}, {node.maximum}]")
    a, b = _place(*base, lo, hi, size)
    return rng.randint(a, b)


def gen_number(node: PrimNode, rng: Rng, cfg: GeneratorConfig, size: int) -> float:
    base = (0.0, float(size)) if rng.bernoulli(cfg.int_mode) else (-float(size), float(size))
    a, b = _place(*base, node.minimum, node.maximum, size)
    # a size-0 window sitting on an exclusive bound has nothing inside; open it by one
    if node.exclusive_minimum and b == node.minimum:
        b = a + 1 if node.maximum is None else min(a + 1, node.maximum)
    if node.exclusive_maximum and a == node.maximum:
        a = b - 1 if node.minimum is None else max(b - 1, node.minimum)
    for _ in range(PATTERN_RETRIES):
        v = rng.uniform(a, b)
        if node.exclusive_minimum and v == node.minimum:
            continue
        if node.exclusive_maximum and v == node.maximum:
            continue
        return v
    raise GenerationExhausted(f"empty number range ({node.minimum}, {node.maximum})")


def gen_primitive(node: PrimNode, rng: Rng, cfg: GeneratorConfig, size: int) -> Any:
    if node.type == "string":
        if node.pattern is not None:
            return _pattern_string(node, rng, cfg, size)
        if node.format == "uuid":
            return gen_uuid(rng)
        if node.format == "date-time":
            return gen_datetime(rng)
        return gen_string(rng, cfg, size)
    if node.type == "integer":
        return gen_integer(node, rng, cfg, size)
    if node.type == "number":
        return gen_number(node, rng, cfg, size)
    return rng.bernoulli(0.5)


def gen_any(rng: Rng, cfg: GeneratorConfig, size: int) -> Any:
    kind = rng.randint(0, 4)
    if kind == 0:
        return None
    if kind == 1:
        return rng.bernoulli(0.5)
    if kind == 2:
        return rng.randint(-size, size)
    if kind == 3:
        return gen_string(rng, cfg, size)
    return {gen_string(rng, cfg, size): gen_string(rng, cfg, size)
            for _ in range(rng.randint(0, min(size, 3)))}


# -- spec-driven generation --------------------------------------------------

def _gen(registry: SpecRegistry, name: str, cfg: GeneratorConfig, rng: Rng, size: int,
         depth: int) -> Any:
    if depth > MAX_DEPTH:
        raise GenerationExhausted(f"spec {name!r} nests deeper than {MAX_DEPTH}")
    node = registry.node(name)
    if isinstance(node, PrimNode):
        return gen_primitive(node, rng, cfg, size)
    if isinstance(node, EnumNode):
        return copy.deepcopy(rng.choice(node.values))
    if isinstance(node, ArrNode):
        n = 0 if depth >= OPTIONAL_DEPTH else rng.randint(0, size)
        return [_gen(registry, node.items, cfg, rng, size // 2, depth + 1) for _ in range(n)]
    if isinstance(node, ObjNode):
        out = {}
        for key, sub in node.properties.items():
            if key in node.required or (depth < OPTIONAL_DEPTH and rng.bernoulli(0.5)):
                out[key] = _gen(registry, sub, cfg, rng, size, depth + 1)
        return out
    return gen_any(rng, cfg, size)


def gen_value(registry: SpecRegistry, spec, cfg: GeneratorConfig, rng: Rng, size: int) -> Any:
    """Generate one value conforming to ``spec`` (a :class:`SpecRef` or name)."""
    name = spec.name if isinstance(spec, SpecRef) else spec
    return _gen(registry, name, cfg, rng, max(0, size), 0)


def minimal_value(registry: SpecRegistry, spec) -> Any:
    """The smallest conforming value, used to hold parameters still."""
    name = spec.name if isinstance(spec, SpecRef) else spec
    node = registry.node(name)
    if isinstance(node, PrimNode):
        if node.pattern is not None:
            return _pattern_string(node, Rng(0), GeneratorConfig(string_mix=0.0), 0)
        if node.type == "string":
            if node.format == "uuid":
                return "00000000-0000-0000-0000-000000000000"
            if node.format == "date-time":
                return "1970-01-01T00:00:00Z"
            return ""
        if node.type == "boolean":
            return False
        if node.type == "integer":
            lo, hi = _int_bounds(node)
            v = 0
            if lo is not None and v < lo:
                v = lo
            if hi is not None and v > hi:
                v = hi
            return v
        lo, hi = node.minimum, node.maximum
        if lo is not None and (lo > 0 or (lo == 0 and node.exclusive_minimum)):
            if not node.exclusive_minimum:
                return lo
            return lo + 1 if hi is None else (lo + hi) / 2
        if hi is not None and (hi < 0 or (hi == 0 and node.exclusive_maximum)):
            if not node.exclusive_maximum:
                return hi
            return hi - 1 if lo is None else (lo + hi) / 2
        return 0
    if isinstance(node, EnumNode):
        return copy.deepcopy(node.values[0])
    if isinstance(node, ArrNode):
        return []
    if isinstance(node, ObjNode):
        return {k: minimal_value(registry, node.properties[k]) for k in node.required}
    return None


# -- assignments and mutation ------------------------------------------------

@dataclass
class Assignment:
    """Parameter values for one request, keyed like ``OperationSpec.param_keys``."""

    values: Dict[str, Any] = field(default_factory=dict)
    mutations: List[str] = field(default_factory=list)


def gen_assignment(compiled: CompiledApi, op, cfg: GeneratorConfig, rng: Rng, size: int,
                   only: Optional[str] = None, held: Optional[Dict[str, Any]] = None
                   ) -> Assignment:
    """Generate values for every parameter of ``op``.

    With ``only`` set, that parameter is generated and the rest are held at
    their minimal values (required) or left out (optional). Keys in ``held``
    are pinned to the given values.
    """
    values = {}
    for key, p in op.param_keys().items():
        name = compiled.params[(op.id, key)]
        if held and key in held:
            values[key] = copy.deepcopy(held[key])
        elif only is not None and key != only:
            if p.required:
                values[key] = minimal_value(compiled.registry, name)
        elif p.required or rng.bernoulli(0.5):
            values[key] = gen_value(compiled.registry, name, cfg, rng.split(key), size)
    return Assignment(values)


def _other_type(value: Any, rng: Rng, size: int) -> Any:
    kinds = ["string", "integer", "boolean", "null", "array", "object"]
    current = json_type(value)
    if current == "number":
        current = "integer"
    options = [k for k in kinds if k != current]
    kind = rng.choice(options)
    if kind == "string":
        return "".join(rng.choice(ALPHANUMERIC) for _ in range(rng.randint(1, max(1, size))))
    if kind == "integer":
        return rng.randint(-size - 1, size + 1)
    if kind == "boolean":
        return rng.bernoulli(0.5)
    if kind == "null":
        return None
    if kind == "array":
        return []
    return {}


def out_of_range(schema, value: Any, rng: Rng, size: int) -> Tuple[Any, str]:
    """Replace ``value`` by one that breaks ``schema``; returns (value, description)."""
    if isinstance(schema, Primitive) and schema.type in ("integer", "number") \
            and schema.enum is None and (schema.minimum is not None or schema.maximum is not None):
        sides = [s for s, b in (("above", schema.maximum), ("below", schema.minimum))
                 if b is not None]
        side = rng.choice(sides)
        step = 1 + rng.randint(0, size)
        if side == "above":
            v = math.floor(schema.maximum) + step
        else:
            v = math.ceil(schema.minimum) - step
        return v, f"out of range ({side})"
    if isinstance(value, dict) and value:
        key = rng.choice(sorted(value))
        mutated = dict(value)
        mutated[key] = _other_type(value[key], rng, size)
        return mutated, f"type of property {key!r} changed"
    v = _other_type(value, rng, size)
    return v, f"type changed to {json_type(v)}"


def mutate_assignment(params: Dict[str, ParameterSpec], assignment: Assignment,
                      cfg: GeneratorConfig, rng: Rng, size: int = 10) -> Assignment:
    """Drop required parameters and push values out of their documented range."""
    values = dict(assignment.values)
    mutations = list(assignment.mutations)
    for key, p in params.items():
        if key not in values:
            continue
        if p.required and rng.bernoulli(cfg.omit_required_prob):
            del values[key]
            mutations.append(f"omitted required parameter {key!r}")
            continue
        if rng.bernoulli(cfg.out_of_range_prob):
            values[key], what = out_of_range(p.schema, values[key], rng, size)
            mutations.append(f"{key!r}: {what}")
    return Assignment(values, mutations)
