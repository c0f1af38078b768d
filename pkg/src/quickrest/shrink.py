"""Greedy shrinking of failing JSON values.

Every candidate costs one predicate call, and in practice the predicate
re-sends an HTTP request, so candidates are produced lazily and the first
one that still fails is taken.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Optional

from .errors import ShrinkBudgetExceeded
from .specs import ArrNode, EnumNode, ObjNode, PrimNode, SpecRef, SpecRegistry, json_equal

DEFAULT_BUDGET = 1000


def _resolve(registry: Optional[SpecRegistry], spec):
    if spec is None or registry is None:
        return spec if not isinstance(spec, (str, SpecRef)) else None
    if isinstance(spec, SpecRef):
        spec = spec.name
    if isinstance(spec, str):
        return registry.node(spec) if spec in registry else None
    return spec


def _int_steps(v: int) -> Iterator[int]:
    if v == 0:
        return
    sign = 1 if v > 0 else -1
    half = sign * (abs(v) // 2)
    yield half
    if v - sign != half:
        yield v - sign


def candidates(value: Any, registry: Optional[SpecRegistry] = None, spec=None) -> Iterator[Any]:
    """Single shrink steps of ``value``, smallest-first within each kind.

    ``spec`` (a name, ref or node) only steers the steps: enum values move
    toward earlier members, format-constrained strings are left intact and
    required object keys are never dropped.
    """
    node = _resolve(registry, spec)

    if isinstance(node, EnumNode):
        for i, member in enumerate(node.values):
            if json_equal(member, value):
                yield from node.values[:i]
                return

    if value is None:
        return
    if isinstance(value, bool):
        if value:
            yield False
        return
    if isinstance(value, int):
        yield from _int_steps(value)
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            yield 0.0
        elif not value.is_integer():
            yield float(math.trunc(value))
        else:
            for v in _int_steps(int(value)):
                yield float(v)
        return
    if isinstance(value, str):
        if isinstance(node, PrimNode) and (node.format or node.pattern):
            return
        for i in range(len(value)):
            yield value[:i] + value[i + 1:]
        for i, c in enumerate(value):
            if c != "a":
                yield value[:i] + "a" + value[i + 1:]
            if c not in "a0":
                yield value[:i] + "0" + value[i + 1:]
        return
    if isinstance(value, list):
        item_spec = node.items if isinstance(node, ArrNode) else None
        for i in range(len(value)):
            yield value[:i] + value[i + 1:]
        for i, item in enumerate(value):
            for c in candidates(item, registry, item_spec):
                yield value[:i] + [c] + value[i + 1:]
        return
    if isinstance(value, dict):
        required = node.required if isinstance(node, ObjNode) else ()
        props = node.properties if isinstance(node, ObjNode) else {}
        for key in value:
            if key not in required:
                yield {k: v for k, v in value.items() if k != key}
        for key, item in value.items():
            for c in candidates(item, registry, props.get(key)):
                out = dict(value)
                out[key] = c
                yield out


@dataclass
class ShrinkResult:
    value: Any
    executions: int
    accepted: int


def shrink_search(failing: Any, still_fails: Callable[[Any], bool],
                  registry: Optional[SpecRegistry] = None, spec=None,
                  budget: int = DEFAULT_BUDGET) -> ShrinkResult:
    """Greedy first-improvement descent; raises ShrinkBudgetExceeded past ``budget`` calls."""
    current = failing
    executions = accepted = 0
    while True:
        for cand in candidates(current, registry, spec):
            if executions >= budget:
                raise ShrinkBudgetExceeded(current, executions, accepted)
            executions += 1
            if still_fails(cand):
                current = cand
                accepted += 1
                break
        else:
            return ShrinkResult(current, executions, accepted)


def shrink_value(spec, failing: Any, still_fails: Callable[[Any], bool],
                 registry: Optional[SpecRegistry] = None, budget: int = DEFAULT_BUDGET) -> Any:
    """Shrink ``failing`` to a local minimum of :func:`candidates` under ``still_fails``."""
    return shrink_search(failing, still_fails, registry, spec, budget).value
