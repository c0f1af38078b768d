"""Test reports: status-code frequency table, text summary and JSON log."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

from .client import CallRecord
from .model import ApiDescription
from .outcomes import outcome_from_dict, record_from_dict, record_to_dict

REPORT_VERSION = 1
DEFAULT_BODY_CAP = 64 * 1024


@dataclass(frozen=True)
class FrequencyRow:
    path_template: str
    verb: str
    status: int
    count: int
    documented: bool


@dataclass
class TestReport:
    metadata: Dict[str, Any] = field(default_factory=dict)
    outcomes: list = field(default_factory=list)
    records: List[CallRecord] = field(default_factory=list)
    frequency_table: List[FrequencyRow] = field(default_factory=list)

    __test__ = False  # not a pytest class

    @property
    def failed(self) -> bool:
        return any(o.verdict != "pass" for o in self.outcomes)

    def exit_code(self) -> int:
        return 1 if self.failed else 0


def _split_op(op_id: str) -> Tuple[str, str]:
    verb, _, path = op_id.partition(" ")
    return verb, path


def frequency_table(records: List[CallRecord], api: Optional[ApiDescription]) -> List[FrequencyRow]:
    counts = Counter()
    for r in records:
        if r.status is not None:
            verb, path = _split_op(r.operation)
            counts[(path, verb, r.status)] += 1
    rows = []
    for (path, verb, status), n in sorted(counts.items()):
        documented = False
        if api is not None:
            op = api.paths.get(path, {}).get(verb)
            documented = op is not None and op.documents(status)
        rows.append(FrequencyRow(path, verb, status, n, documented))
    return rows


def coverage(table: List[FrequencyRow], api: ApiDescription) -> Dict[str, List[str]]:
    """Documented status keys (excluding ``default``) never observed, per operation id."""
    seen: Dict[Tuple[str, str], set] = {}
    for row in table:
        seen.setdefault((row.path_template, row.verb), set()).add(str(row.status))
    out = {}
    for path, ops in sorted(api.paths.items()):
        for verb, op in sorted(ops.items()):
            keys = [k for k in op.responses if k != "default"]
            out[op.id] = sorted(k for k in keys if k not in seen.get((path, verb), set()))
    return out


def fully_covered(table: List[FrequencyRow], api: ApiDescription, op_id: str) -> bool:
    return not coverage(table, api)[op_id]


def truncate_record(record: CallRecord, cap: int) -> CallRecord:
    if len(record.response_body) <= cap:
        return record
    return replace(record, response_body=record.response_body[:cap], json_body=None,
                   truncated=True)


def build_report(api: Optional[ApiDescription], outcomes: list, records: List[CallRecord],
                 metadata: Optional[Dict[str, Any]] = None, started: Optional[float] = None,
                 finished: Optional[float] = None, body_cap: int = DEFAULT_BODY_CAP
                 ) -> TestReport:
    meta = dict(metadata or {})
    meta["reportVersion"] = REPORT_VERSION
    if started is not None:
        meta["startTime"] = started
    if finished is not None:
        meta["endTime"] = finished
    if api is not None:
        meta.setdefault("warnings", list(api.warnings))
    kept = [truncate_record(r, body_cap) for r in records]
    return TestReport(meta, list(outcomes), kept, frequency_table(kept, api))


# -- JSON --------------------------------------------------------------------

_VOLATILE_META = ("startTime", "endTime")


def report_to_dict(report: TestReport, canonical: bool = False) -> dict:
    meta = dict(report.metadata)
    if canonical:
        for k in _VOLATILE_META:
            meta.pop(k, None)
    return {
        "reportVersion": REPORT_VERSION,
        "metadata": meta,
        "outcomes": [o.to_dict() for o in report.outcomes],
        "frequencyTable": [
            {"pathTemplate": r.path_template, "verb": r.verb, "status": r.status,
             "count": r.count, "documented": r.documented}
            for r in report.frequency_table
        ],
        "records": [record_to_dict(r, canonical) for r in report.records],
    }


def render_json(report: TestReport, canonical: bool = False) -> str:
    """UTF-8 JSON text; ``canonical`` drops timestamps and latencies."""
    return json.dumps(report_to_dict(report, canonical), ensure_ascii=False, indent=2,
                      sort_keys=True) + "\n"


def parse_report(text) -> TestReport:
    d = json.loads(text)
    version = d.get("reportVersion")
    if version != REPORT_VERSION:
        raise ValueError(f"unsupported report version {version!r}")
    rows = [FrequencyRow(r["pathTemplate"], r["verb"], r["status"], r["count"], r["documented"])
            for r in d.get("frequencyTable", [])]
    return TestReport(d.get("metadata", {}), [outcome_from_dict(o) for o in d.get("outcomes", [])],
                      [record_from_dict(r) for r in d.get("records", [])], rows)


# -- text --------------------------------------------------------------------

def _compact(value: Any, limit: int = 400) -> str:
    text = json.dumps(value, ensure_ascii=True, sort_keys=True)
    return text if len(text) <= limit else text[:limit - 3] + "..."


def _failure_lines(f, indent: str = "    ") -> List[str]:
    lines = [
        f"{indent}failed:  {f.property}" + (f" ({f.detail})" if f.detail else ""),
        f"{indent}input:   {_compact(f.original_input)}",
        f"{indent}smallest: {_compact(f.shrunk_input)}",
        f"{indent}shrink:  {f.shrink_steps} steps, {f.shrink_executions} executions"
        + (" (budget exhausted)" if f.shrink_exhausted else "")
        + ("" if f.reproduced else " (did not reproduce on replay)"),
    ]
    for v in f.violations[:5]:
        lines.append(f"{indent}  at {v.json_path}: expected {v.expected}, got {v.actual}")
    if f.mutations:
        lines.append(f"{indent}mutations: {'; '.join(f.mutations)}")
    if f.repro_command:
        lines.append(f"{indent}repro:   {f.repro_command}")
    return lines


def render_text(report: TestReport) -> str:
    lines = []
    meta = report.metadata
    if "seed" in meta:
        lines.append(f"seed {meta['seed']}")
    n_fail = n_abort = 0
    for o in report.outcomes:
        if o.verdict == "fail":
            n_fail += 1
        elif o.verdict == "aborted":
            n_abort += 1
        if getattr(o, "failures", None) is not None:
            head = f"{o.operation}: {o.verdict.upper()} ({o.tests_run} tests"
            if o.skipped:
                head += f", {o.skipped} unsendable"
            lines.append(head + ")")
            for f in o.failures:
                lines.extend(_failure_lines(f))
        else:
            lines.append(f"stateful: {o.verdict.upper()} ({o.sequences_run} sequences)")
            if o.failure:
                lines.append(f"    failing step: {o.failed_operation}")
                lines.extend(_failure_lines(o.failure))
            if o.shrunk_sequence is not None:
                lines.append("    smallest sequence:")
                for i, step in enumerate(o.shrunk_sequence):
                    lines.append(f"      {i + 1}. {step.operation} {_compact(step.values, 200)}")
                if o.values_may_differ:
                    lines.append("    note: state was recreated while shrinking; "
                                 "parameter values may differ from the original run")
        if o.verdict == "aborted":
            lines.append(f"    aborted after {o.transport_errors} transport errors")
    lines.append("")
    lines.append(f"{len(report.outcomes)} checked, {n_fail} failed, {n_abort} aborted, "
                 f"{len(report.records)} calls")
    if report.frequency_table:
        lines.append("")
        width = max(len(r.path_template) for r in report.frequency_table)
        lines.append(f"{'path'.ljust(width)}  verb    status  count  documented")
        for r in report.frequency_table:
            lines.append(f"{r.path_template.ljust(width)}  {r.verb.ljust(6)}  {r.status:>6}  "
                         f"{r.count:>5}  {'yes' if r.documented else 'NO'}")
    warnings = meta.get("warnings") or []
    for w in warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"
