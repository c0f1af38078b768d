"""Property-based checking of single operations.

Each test generates an assignment, sends it, and evaluates the three
oracle properties. The first failure in an operation is shrunk and ends
that operation's run.
"""
from __future__ import annotations

import fnmatch
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Optional, Tuple

from .client import CallRecord, build_request
from .errors import GenerationExhausted, MissingPathParameter, ShrinkBudgetExceeded, UnsendableRequest
from .gen import (
    Assignment,
    GeneratorConfig,
    Rng,
    gen_assignment,
    minimal_value,
    mutate_assignment,
    size_schedule,
)
from .model import ApiDescription, OperationSpec, list_operations
from .outcomes import CheckOutcome, Failure, PropertyVerdict
from .shrink import DEFAULT_BUDGET, shrink_search
from .specs import CompiledApi, validate

log = logging.getLogger(__name__)


class Property(str, Enum):
    NON500 = "Non500"
    STATUS_DOCUMENTED = "StatusDocumented"
    BODY_CONFORMS = "BodyConforms"


ALL_PROPERTIES: FrozenSet[Property] = frozenset(Property)
PARAM_STRATEGIES = ("all-params", "per-param-first")
ALL_CAMPAIGN = "all"


def parse_properties(text: str) -> FrozenSet[Property]:
    """``"Non500,BodyConforms"`` -> property set; ``"none"`` -> empty set."""
    text = text.strip()
    if text.lower() == "none" or not text:
        return frozenset()
    if text.lower() == "all":
        return ALL_PROPERTIES
    out = set()
    for part in text.split(","):
        try:
            out.add(Property(part.strip()))
        except ValueError:
            raise ValueError(f"unknown property {part.strip()!r}") from None
    return frozenset(out)


@dataclass(frozen=True)
class RunPlan:
    tests_per_iteration: int = 10
    iterations: int = 30
    tiers: int = 1
    tier_growth: int = 10
    seed: int = 0
    enabled_properties: FrozenSet[Property] = ALL_PROPERTIES
    param_strategy: str = "all-params"
    shrink_budget: int = DEFAULT_BUDGET
    max_transport_errors: int = 10
    keep_going: bool = False
    repro_base: str = "quickrest"

    def __post_init__(self):
        for name in ("tests_per_iteration", "iterations", "tiers", "tier_growth",
                     "shrink_budget", "max_transport_errors"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.param_strategy not in PARAM_STRATEGIES:
            raise ValueError(f"param_strategy must be one of {PARAM_STRATEGIES}")
        object.__setattr__(self, "enabled_properties",
                           frozenset(Property(p) for p in self.enabled_properties))

    def tests_in_tier(self, tier: int) -> int:
        return self.tests_per_iteration * self.tier_growth ** tier

    def test_budget(self) -> int:
        return sum(self.iterations * self.tests_in_tier(t) for t in range(self.tiers))


# -- oracle ------------------------------------------------------------------

def evaluate_properties(op: OperationSpec, record: CallRecord, compiled: CompiledApi,
                        enabled: Iterable = ALL_PROPERTIES) -> List[PropertyVerdict]:
    """Verdicts for the enabled properties, in a fixed order."""
    enabled = {Property(p) for p in enabled}
    status = record.status
    if status is None:
        raise ValueError("record has no HTTP status")
    out = []
    if Property.NON500 in enabled:
        bad = 500 <= status <= 599
        out.append(PropertyVerdict(Property.NON500.value, "fail" if bad else "pass",
                                   f"status {status}" if bad else ""))
    resp = op.response_for(status)
    if Property.STATUS_DOCUMENTED in enabled:
        if resp is None:
            out.append(PropertyVerdict(Property.STATUS_DOCUMENTED.value, "fail",
                                       f"status {status} is not documented"))
        else:
            out.append(PropertyVerdict(Property.STATUS_DOCUMENTED.value, "pass"))
    if Property.BODY_CONFORMS in enabled:
        out.append(_body_verdict(op, record, compiled, resp))
    return out


def _body_verdict(op, record, compiled, resp) -> PropertyVerdict:
    name = Property.BODY_CONFORMS.value
    if resp is None or op.verb == "HEAD":
        return PropertyVerdict(name, "skip", "status not documented")
    spec = compiled.responses.get((op.id, resp.status_key))
    if spec is None:
        return PropertyVerdict(name, "skip", "no schema documented")
    if not record.is_json:
        return PropertyVerdict(name, "fail", "body is not JSON")
    result = validate(compiled.registry, spec, record.json_body)
    if result.conforms:
        return PropertyVerdict(name, "pass")
    first = result.violations[0]
    detail = f"{first.json_path}: expected {first.expected}, got {first.actual}"
    return PropertyVerdict(name, "fail", detail, tuple(result.violations))


def first_failure(verdicts: List[PropertyVerdict]) -> Optional[PropertyVerdict]:
    for v in verdicts:
        if v.failed:
            return v
    return None


# -- per-operation run -------------------------------------------------------

OMIT = object()


def format_test_id(campaign: str, tier: int, iteration: int, index: int) -> str:
    return f"{campaign}:{tier}:{iteration}:{index}"


def parse_test_id(text: str) -> Tuple[str, int, int, int]:
    parts = text.rsplit(":", 3)
    if len(parts) != 4:
        raise ValueError(f"bad test id {text!r}; expected campaign:tier:iteration:index")
    campaign, tier, it, idx = parts
    return campaign, int(tier), int(it), int(idx)


class OperationRunner:
    """State for checking one operation: records, failures and held parameters."""

    def __init__(self, op: OperationSpec, cfg: GeneratorConfig, plan: RunPlan,
                 compiled: CompiledApi, client, base_url: str,
                 sink: Optional[Callable[[CallRecord], None]] = None):
        self.op = op
        self.cfg = cfg
        self.plan = plan
        self.compiled = compiled
        self.client = client
        self.base_url = base_url
        self.params = op.param_keys()
        self.records: List[CallRecord] = []
        self.sink = sink
        self.held: Dict[str, Any] = {}
        self.outcome = CheckOutcome(op.id, "pass")
        self._consecutive = 0

    # one exchange ----------------------------------------------------------
    def _send(self, values: Dict[str, Any], context: Dict[str, Any]) -> Optional[CallRecord]:
        try:
            req = build_request(self.op, values, self.base_url)
        except (MissingPathParameter, UnsendableRequest):
            return None
        rec = self.client.execute(req, context)
        self.records.append(rec)
        if self.sink:
            self.sink(rec)
        if rec.transport_error:
            self.outcome.transport_errors += 1
        return rec

    def _assignment(self, campaign, tier, iteration, index) -> Assignment:
        rng = Rng(self.plan.seed).split(self.op.id, campaign, tier, iteration, index)
        size = size_schedule(index, self.cfg)
        pinned = {k: v for k, v in self.held.items() if v is not OMIT}
        a = gen_assignment(self.compiled, self.op, self.cfg, rng.split("gen"), size,
                           only=None if campaign == ALL_CAMPAIGN else campaign, held=pinned)
        for k, v in self.held.items():
            if v is OMIT:
                a.values.pop(k, None)
        free = {k: p for k, p in self.params.items() if k not in self.held}
        return mutate_assignment(free, a, self.cfg, rng.split("mutate"), size)

    def campaigns(self) -> List[str]:
        if self.plan.param_strategy == "per-param-first":
            return list(self.params) + [ALL_CAMPAIGN]
        return [ALL_CAMPAIGN]

    def run(self, replay: Optional[str] = None) -> CheckOutcome:
        if replay is not None:
            self._run_test(*parse_test_id(replay))
        else:
            self._run_all()
        out = self.outcome
        if out.verdict != "aborted":
            out.verdict = "fail" if out.failures else "pass"
        out.record_count = len(self.records)
        return out

    def _run_all(self) -> None:
        plan = self.plan
        for campaign in self.campaigns():
            for tier in range(plan.tiers):
                for iteration in range(plan.iterations):
                    for index in range(plan.tests_in_tier(tier)):
                        if self._run_test(campaign, tier, iteration, index) == "stop":
                            return

    def _run_test(self, campaign, tier, iteration, index) -> str:
        tid = format_test_id(campaign, tier, iteration, index)
        try:
            assignment = self._assignment(campaign, tier, iteration, index)
        except GenerationExhausted:
            self.outcome.skipped += 1
            return "next"
        ctx = {"seed": self.plan.seed, "test": tid, "phase": "test"}
        rec = self._send(assignment.values, ctx)
        if rec is None:
            self.outcome.skipped += 1
            return "next"
        self.outcome.tests_run += 1
        if rec.transport_error:
            self._consecutive += 1
            if self._consecutive >= self.plan.max_transport_errors:
                self.outcome.verdict = "aborted"
                return "stop"
            return "next"
        self._consecutive = 0
        failed = first_failure(evaluate_properties(self.op, rec, self.compiled,
                                                   self.plan.enabled_properties))
        if failed is None:
            return "next"
        failure = self._shrink(assignment, rec, failed, tid)
        self.outcome.failures.append(failure)
        if not self.plan.keep_going:
            return "stop"
        return "next" if self._exclude_offenders(failure) else "stop"

    # shrinking -------------------------------------------------------------
    def _reproduces(self, values, prop: str, phase: str = "shrink") -> bool:
        rec = self._send(values, {"seed": self.plan.seed, "phase": phase})
        if rec is None or rec.status is None:
            return False
        v = first_failure(evaluate_properties(self.op, rec, self.compiled, {prop}))
        return v is not None

    def _shrink(self, assignment: Assignment, rec: CallRecord, failed: PropertyVerdict,
                tid: str) -> Failure:
        original = assignment.values
        spec = self.compiled.assignment_spec(self.op)
        budget = self.plan.shrink_budget
        exhausted = False
        try:
            # one execution is kept back for the confirming replay
            res = shrink_search(original, lambda v: self._reproduces(v, failed.property),
                                self.compiled.registry, spec, budget=max(1, budget - 1))
            shrunk, executions, accepted = res.value, res.executions, res.accepted
        except ShrinkBudgetExceeded as exc:
            shrunk, executions, accepted, exhausted = exc.best, exc.steps, exc.accepted, True
        reproduced = True
        if not accepted:
            reproduced = self._reproduces(shrunk, failed.property, phase="confirm")
            executions += 1
        return Failure(
            property=failed.property,
            detail=failed.detail,
            original_input=original,
            shrunk_input=shrunk,
            shrink_steps=accepted,
            shrink_executions=executions,
            shrink_exhausted=exhausted,
            reproduced=reproduced,
            status=rec.status,
            violations=failed.violations,
            mutations=list(assignment.mutations),
            test_id=tid,
            repro_command=f"{self.plan.repro_base} --endpoint '{self.op.id}' --replay {tid}",
        )

    # keep-going ------------------------------------------------------------
    def _exclude_offenders(self, failure: Failure) -> bool:
        """Hold the parameters the failure depends on; False if none can be found."""
        prop = failure.property
        shrunk = failure.shrunk_input
        found = False
        for key, p in self.params.items():
            if key in self.held or key not in shrunk:
                continue
            neutral = OMIT if not p.required else minimal_value(
                self.compiled.registry, self.compiled.params[(self.op.id, key)])
            trial = dict(shrunk)
            if neutral is OMIT:
                del trial[key]
            else:
                trial[key] = neutral
            if not self._reproduces(trial, prop, phase="isolate"):
                self.held[key] = neutral
                found = True
                log.info("%s: holding parameter %r after failure", self.op.id, key)
        return found


def check_operation(op: OperationSpec, cfg: GeneratorConfig, plan: RunPlan,
                    compiled: CompiledApi, client, base_url: str,
                    replay: Optional[str] = None) -> Tuple[CheckOutcome, List[CallRecord]]:
    """Check one operation; returns the outcome and every record it produced."""
    runner = OperationRunner(op, cfg, plan, compiled, client, base_url)
    outcome = runner.run(replay)
    return outcome, runner.records


def select_operations(api: ApiDescription, pattern: Optional[str] = None) -> List[OperationSpec]:
    """Operations in path/verb order, filtered by a glob over ``"VERB /path"``."""
    ops = list_operations(api)
    if not pattern:
        return ops
    return [op for op in ops if fnmatch.fnmatchcase(op.id, pattern)
            or fnmatch.fnmatchcase(op.path_template, pattern)]


def check_all(api: ApiDescription, cfg: GeneratorConfig, plan: RunPlan, compiled: CompiledApi,
              client, base_url: Optional[str] = None, endpoint: Optional[str] = None,
              workers: int = 1, replay: Optional[str] = None, metadata=None,
              body_cap: int = 64 * 1024):
    """Check every selected operation and assemble a :class:`TestReport`."""
    from .report import build_report

    base_url = base_url or api.base_url
    ops = select_operations(api, endpoint)
    started = time.time()

    def one(op):
        return check_operation(op, cfg, plan, compiled, client, base_url, replay)

    if workers > 1 and len(ops) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, ops))
    else:
        results = [one(op) for op in ops]
    outcomes = [r[0] for r in results]
    records = [rec for r in results for rec in r[1]]
    return build_report(api, outcomes, records, metadata=metadata,
                        started=started, finished=time.time(), body_cap=body_cap)
