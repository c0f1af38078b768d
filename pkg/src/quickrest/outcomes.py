"""Result types shared by the checker, the stateful runner and the reporter.

Each type converts to and from plain JSON-compatible dicts so reports can
be written and read back without loss.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .client import CallRecord, RequestPlan, parse_json
from .specs import Violation

PROPERTIES = ("Non500", "StatusDocumented", "BodyConforms")


# -- bytes -------------------------------------------------------------------

def encode_bytes(data: Optional[bytes]) -> Optional[Dict[str, str]]:
    if data is None:
        return None
    try:
        return {"encoding": "utf-8", "data": data.decode("utf-8")}
    except UnicodeDecodeError:
        return {"encoding": "base64", "data": base64.b64encode(data).decode("ascii")}


def decode_bytes(obj: Optional[Dict[str, str]]) -> Optional[bytes]:
    if obj is None:
        return None
    if obj["encoding"] == "base64":
        return base64.b64decode(obj["data"])
    return obj["data"].encode("utf-8")


def plan_to_dict(plan: RequestPlan) -> dict:
    return {
        "operation": plan.operation,
        "verb": plan.verb,
        "url": plan.url,
        "headers": [list(h) for h in plan.headers],
        "body": encode_bytes(plan.body),
        "mediaType": plan.media_type,
    }


def plan_from_dict(d: dict) -> RequestPlan:
    return RequestPlan(d["operation"], d["verb"], d["url"],
                       tuple(tuple(h) for h in d.get("headers", [])),
                       decode_bytes(d.get("body")), d.get("mediaType"))


def record_to_dict(r: CallRecord, canonical: bool = False) -> dict:
    out = {
        "request": plan_to_dict(r.plan),
        "status": r.status,
        "transportError": r.transport_error,
        "responseHeaders": [list(h) for h in r.response_headers],
        "responseBody": encode_bytes(r.response_body),
        "isJson": r.is_json,
        "truncated": r.truncated,
        "context": r.context,
    }
    if not canonical:
        out["latencyMs"] = r.latency_ms
        out["timestamp"] = r.timestamp
    return out


def record_from_dict(d: dict) -> CallRecord:
    body = decode_bytes(d.get("responseBody")) or b""
    rec = CallRecord(
        plan=plan_from_dict(d["request"]),
        status=d.get("status"),
        transport_error=d.get("transportError"),
        response_headers=tuple(tuple(h) for h in d.get("responseHeaders", [])),
        response_body=body,
        is_json=d.get("isJson", False),
        latency_ms=d.get("latencyMs", 0.0),
        timestamp=d.get("timestamp", 0.0),
        context=d.get("context", {}),
        truncated=d.get("truncated", False),
    )
    if rec.is_json and not rec.truncated:
        rec.json_body = parse_json(body)
    return rec


def _violations_to_list(vs) -> list:
    return [{"jsonPath": v.json_path, "expected": v.expected, "actual": v.actual} for v in vs]


def _violations_from_list(vs) -> Tuple[Violation, ...]:
    return tuple(Violation(v["jsonPath"], v["expected"], v["actual"]) for v in vs)


# -- verdicts ----------------------------------------------------------------

@dataclass(frozen=True)
class PropertyVerdict:
    property: str
    status: str  # pass | fail | skip
    detail: str = ""
    violations: Tuple[Violation, ...] = ()

    @property
    def failed(self) -> bool:
        return self.status == "fail"


@dataclass
class Failure:
    property: str
    detail: str
    original_input: Dict[str, Any]
    shrunk_input: Dict[str, Any]
    shrink_steps: int = 0
    shrink_executions: int = 0
    shrink_exhausted: bool = False
    reproduced: bool = True
    status: Optional[int] = None
    violations: Tuple[Violation, ...] = ()
    mutations: List[str] = field(default_factory=list)
    test_id: str = ""
    repro_command: str = ""

    def to_dict(self) -> dict:
        return {
            "property": self.property,
            "detail": self.detail,
            "status": self.status,
            "originalInput": self.original_input,
            "shrunkInput": self.shrunk_input,
            "shrinkSteps": self.shrink_steps,
            "shrinkExecutions": self.shrink_executions,
            "shrinkExhausted": self.shrink_exhausted,
            "reproduced": self.reproduced,
            "violations": _violations_to_list(self.violations),
            "mutations": list(self.mutations),
            "testId": self.test_id,
            "reproCommand": self.repro_command,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Failure":
        return cls(
            property=d["property"], detail=d["detail"],
            original_input=d["originalInput"], shrunk_input=d["shrunkInput"],
            shrink_steps=d["shrinkSteps"], shrink_executions=d["shrinkExecutions"],
            shrink_exhausted=d["shrinkExhausted"], reproduced=d["reproduced"],
            status=d.get("status"), violations=_violations_from_list(d["violations"]),
            mutations=list(d["mutations"]), test_id=d["testId"],
            repro_command=d["reproCommand"],
        )


@dataclass
class CheckOutcome:
    operation: str
    verdict: str  # pass | fail | aborted
    failures: List[Failure] = field(default_factory=list)
    tests_run: int = 0
    skipped: int = 0
    transport_errors: int = 0
    record_count: int = 0

    @property
    def failure(self) -> Optional[Failure]:
        return self.failures[0] if self.failures else None

    def to_dict(self) -> dict:
        return {
            "kind": "operation",
            "operation": self.operation,
            "verdict": self.verdict,
            "failures": [f.to_dict() for f in self.failures],
            "testsRun": self.tests_run,
            "skipped": self.skipped,
            "transportErrors": self.transport_errors,
            "recordCount": self.record_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CheckOutcome":
        return cls(d["operation"], d["verdict"], [Failure.from_dict(f) for f in d["failures"]],
                   d["testsRun"], d["skipped"], d["transportErrors"], d["recordCount"])


@dataclass
class PoolSource:
    """Where a pool-drawn value came from: entry ``entry`` harvested at step ``step``."""

    step: int
    entry: int
    attribute: str


@dataclass
class CallStep:
    operation: str
    values: Dict[str, Any] = field(default_factory=dict)
    provenance: Dict[str, str] = field(default_factory=dict)  # key -> random | pool
    sources: Dict[str, PoolSource] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "operation": self.operation,
            "values": self.values,
            "provenance": self.provenance,
            "sources": {k: {"step": s.step, "entry": s.entry, "attribute": s.attribute}
                        for k, s in self.sources.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CallStep":
        return cls(d["operation"], d["values"], d["provenance"],
                   {k: PoolSource(**s) for k, s in d["sources"].items()})


@dataclass
class SequenceOutcome:
    verdict: str  # pass | fail | aborted
    sequences_run: int = 0
    steps: List[CallStep] = field(default_factory=list)
    failure: Optional[Failure] = None
    failed_operation: Optional[str] = None
    shrunk_sequence: Optional[List[CallStep]] = None
    shrink_executions: int = 0
    shrink_exhausted: bool = False
    values_may_differ: bool = False
    transport_errors: int = 0
    record_count: int = 0

    @property
    def operation(self) -> str:
        return "sequence"

    def to_dict(self) -> dict:
        return {
            "kind": "sequence",
            "verdict": self.verdict,
            "sequencesRun": self.sequences_run,
            "steps": [s.to_dict() for s in self.steps],
            "failure": self.failure.to_dict() if self.failure else None,
            "failedOperation": self.failed_operation,
            "shrunkSequence": ([s.to_dict() for s in self.shrunk_sequence]
                               if self.shrunk_sequence is not None else None),
            "shrinkExecutions": self.shrink_executions,
            "shrinkExhausted": self.shrink_exhausted,
            "valuesMayDiffer": self.values_may_differ,
            "transportErrors": self.transport_errors,
            "recordCount": self.record_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SequenceOutcome":
        return cls(
            verdict=d["verdict"], sequences_run=d["sequencesRun"],
            steps=[CallStep.from_dict(s) for s in d["steps"]],
            failure=Failure.from_dict(d["failure"]) if d["failure"] else None,
            failed_operation=d["failedOperation"],
            shrunk_sequence=([CallStep.from_dict(s) for s in d["shrunkSequence"]]
                             if d["shrunkSequence"] is not None else None),
            shrink_executions=d["shrinkExecutions"], shrink_exhausted=d["shrinkExhausted"],
            values_may_differ=d["valuesMayDiffer"], transport_errors=d["transportErrors"],
            record_count=d["recordCount"],
        )


def outcome_from_dict(d: dict):
    return SequenceOutcome.from_dict(d) if d.get("kind") == "sequence" \
        else CheckOutcome.from_dict(d)
