"""Stateful checking: sequences of calls that feed on earlier responses.

Objects returned by the target are harvested into a :class:`ResponsePool`.
Later steps fill identity parameters (``id`` by default) from the pool, so a
sequence can create a resource and then act on it.
"""
from __future__ import annotations

import copy
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from .checker import RunPlan, evaluate_properties, first_failure, select_operations
from .client import CallRecord, build_request
from .errors import MissingPathParameter, ShrinkBudgetExceeded, UnsendableRequest
from .gen import GeneratorConfig, Rng, gen_assignment, mutate_assignment, size_schedule
from .model import ApiDescription, OperationSpec
from .outcomes import CallStep, Failure, PoolSource, SequenceOutcome
from .shrink import DEFAULT_BUDGET, candidates
from .report import DEFAULT_BODY_CAP
from .specs import CompiledApi, compile_api

log = logging.getLogger(__name__)

DEFAULT_IDENTITY = {"id": "id"}


# -- pool --------------------------------------------------------------------

@dataclass
class ResponsePool:
    entries: List[dict] = field(default_factory=list)
    # attribute -> [(entry index, value)]
    index: Dict[str, List[Tuple[int, Any]]] = field(default_factory=dict)
    # entry index -> (step that returned it, ordinal among that step's entries)
    origins: List[Tuple[Optional[int], int]] = field(default_factory=list)

    def clear(self) -> None:
        self.entries.clear()
        self.index.clear()
        self.origins.clear()

    def harvested_by(self, step: int) -> List[dict]:
        return [e for e, (s, _) in zip(self.entries, self.origins) if s == step]


def _objects(value: Any):
    if isinstance(value, dict):
        yield value
        for v in value.values():
            yield from _objects(v)
    elif isinstance(value, list):
        for v in value:
            yield from _objects(v)


def record_response(pool: ResponsePool, body: Any, step: Optional[int] = None) -> ResponsePool:
    """Append every object in ``body`` (at any depth) and index its scalar attributes."""
    ordinal = 0
    for obj in _objects(body):
        entry = copy.deepcopy(obj)
        i = len(pool.entries)
        pool.entries.append(entry)
        pool.origins.append((step, ordinal))
        ordinal += 1
        for k, v in entry.items():
            if v is not None and not isinstance(v, (dict, list)):
                pool.index.setdefault(k, []).append((i, v))
    return pool


def draw_entry(pool: ResponsePool, attribute: str, rng: Rng) -> Optional[Tuple[int, Any]]:
    hits = pool.index.get(attribute)
    if not hits:
        return None
    i, v = hits[rng.randint(0, len(hits) - 1)]
    return i, copy.deepcopy(v)


def draw_input(pool: ResponsePool, attribute: str, rng: Rng) -> Optional[Any]:
    """A uniformly drawn value of ``attribute``, or None when the pool has none."""
    hit = draw_entry(pool, attribute, rng)
    return None if hit is None else hit[1]


def parse_identity_map(items: Sequence[str]) -> Dict[str, str]:
    """``["objectid=id"]`` -> ``{"id": "id", "objectid": "id"}``."""
    out = dict(DEFAULT_IDENTITY)
    for item in items:
        param, sep, attr = item.partition("=")
        if not sep or not param.strip() or not attr.strip():
            raise ValueError(f"identity mapping {item!r} must look like param=attribute")
        out[param.strip()] = attr.strip()
    return out


# -- generation --------------------------------------------------------------

def gen_step(op: OperationSpec, compiled: CompiledApi, pool: ResponsePool, cfg: GeneratorConfig,
             rng: Rng, size: int, identity: Optional[Dict[str, str]] = None) -> CallStep:
    identity = DEFAULT_IDENTITY if identity is None else identity
    params = op.param_keys()
    a = gen_assignment(compiled, op, cfg, rng.split("gen"), size)
    a = mutate_assignment(params, a, cfg, rng.split("mutate"), size)
    step = CallStep(op.id, dict(a.values), {k: "random" for k in a.values})
    for key, p in params.items():
        attr = identity.get(p.name)
        if attr is None or p.location == "body" or key not in step.values:
            continue
        hit = draw_entry(pool, attr, rng.split("pool", key))
        if hit is None:
            continue
        entry, value = hit
        src_step, ordinal = pool.origins[entry]
        step.values[key] = value
        step.provenance[key] = "pool"
        if src_step is not None:
            step.sources[key] = PoolSource(src_step, ordinal, attr)
    return step


def gen_sequence(api: ApiDescription, length_range: Tuple[int, int], pool: ResponsePool,
                 cfg: GeneratorConfig, rng: Rng, compiled: Optional[CompiledApi] = None,
                 identity: Optional[Dict[str, str]] = None, size: int = 10,
                 ops: Optional[List[OperationSpec]] = None) -> List[CallStep]:
    """Random steps drawn against the pool as it stands (nothing is executed)."""
    lo, hi = length_range
    if lo < 1 or hi < lo:
        raise ValueError("length range must satisfy 1 <= min <= max")
    compiled = compiled or compile_api(api)
    ops = ops if ops is not None else select_operations(api)
    if not ops:
        return []
    n = rng.randint(lo, hi)
    return [gen_step(rng.choice(ops), compiled, pool, cfg, rng.split("step", i), size, identity)
            for i in range(n)]


# -- shrinking ---------------------------------------------------------------

def drop_step(steps: List[CallStep], i: int) -> List[CallStep]:
    """Remove step ``i``; pool sources are renumbered and orphaned ones become literal."""
    out = []
    for j, s in enumerate(steps):
        if j == i:
            continue
        sources, provenance = {}, dict(s.provenance)
        for k, src in s.sources.items():
            if src.step == i:
                provenance[k] = "random"
            else:
                sources[k] = replace(src, step=src.step - 1 if src.step > i else src.step)
        out.append(CallStep(s.operation, dict(s.values), provenance, sources))
    return out


@dataclass
class SequenceShrink:
    steps: List[CallStep]
    executions: int


def shrink_sequence(seq: List[CallStep], still_fails: Callable[[List[CallStep]], bool],
                    budget: int = DEFAULT_BUDGET,
                    spec_for: Optional[Callable[[str], Tuple[Any, Any]]] = None) -> SequenceShrink:
    """Greedy step removal, then per-step shrinking of randomly generated values.

    ``spec_for(op_id)`` returns ``(registry, assignment spec)`` to steer value
    shrinking; without it only steps are removed. Raises ShrinkBudgetExceeded
    carrying the best sequence found.
    """
    current = list(seq)
    executions = 0

    def attempt(cand) -> bool:
        nonlocal executions
        if executions >= budget:
            raise ShrinkBudgetExceeded(current, executions)
        executions += 1
        return still_fails(cand)

    progress = True
    while progress and len(current) > 1:
        progress = False
        for i in range(len(current)):
            cand = drop_step(current, i)
            if attempt(cand):
                current = cand
                progress = True
                break

    if spec_for is not None:
        for i in range(len(current)):
            registry, spec = spec_for(current[i].operation)
            progress = True
            while progress:
                progress = False
                step = current[i]
                free = {k: v for k, v in step.values.items() if step.provenance.get(k) != "pool"}
                for c in candidates(free, registry, spec):
                    values = {k: (c[k] if k in c else v) for k, v in step.values.items()
                              if k in c or step.provenance.get(k) == "pool"}
                    cand = list(current)
                    cand[i] = replace(step, values=values,
                                      provenance={k: step.provenance.get(k, "random")
                                                  for k in values},
                                      sources={k: s for k, s in step.sources.items()
                                               if k in values})
                    if attempt(cand):
                        current = cand
                        progress = True
                        break
    return SequenceShrink(current, executions)


# -- execution ---------------------------------------------------------------

@dataclass
class SequenceRun:
    steps: List[CallStep]          # values as actually sent
    records: List[CallRecord]
    failed_at: Optional[int] = None
    verdict: Any = None            # PropertyVerdict of the failing step
    transport_error: bool = False
    rebound: bool = False          # some pool value changed on replay


class StatefulRunner:
    def __init__(self, api: ApiDescription, compiled: CompiledApi, cfg: GeneratorConfig,
                 plan: RunPlan, client, base_url: str,
                 identity: Optional[Dict[str, str]] = None,
                 reset: Optional[Callable[[], None]] = None,
                 ops: Optional[List[OperationSpec]] = None):
        self.api = api
        self.compiled = compiled
        self.cfg = cfg
        self.plan = plan
        self.client = client
        self.base_url = base_url
        self.identity = dict(DEFAULT_IDENTITY if identity is None else identity)
        self.reset = reset
        self.ops = ops if ops is not None else select_operations(api)
        self.records: List[CallRecord] = []
        self.pool = ResponsePool()

    def _reset(self) -> None:
        if self.reset is not None:
            self.reset()
            self.pool.clear()

    def _send(self, op: OperationSpec, values, ctx) -> Optional[CallRecord]:
        try:
            req = build_request(op, values, self.base_url)
        except (MissingPathParameter, UnsendableRequest):
            return None
        rec = self.client.execute(req, ctx)
        self.records.append(rec)
        return rec

    def _after(self, step_index: int, rec: CallRecord, enabled) -> Optional[Any]:
        if rec.status is not None and 200 <= rec.status < 300 and rec.is_json:
            record_response(self.pool, rec.json_body, step_index)
        if rec.status is None:
            return None
        return first_failure(evaluate_properties(self.api.operation(rec.operation), rec,
                                                 self.compiled, enabled))

    def replay(self, steps: List[CallStep], ctx: Dict[str, Any], enabled=None) -> SequenceRun:
        """Execute ``steps`` in order, rebinding pool-drawn values to fresh responses."""
        enabled = self.plan.enabled_properties if enabled is None else enabled
        self._reset()
        pool_start = len(self.pool.entries)
        run = SequenceRun([], [])
        for i, step in enumerate(steps):
            values = dict(step.values)
            for k, src in step.sources.items():
                fresh = [e for e, (s, _) in zip(self.pool.entries[pool_start:],
                                                 self.pool.origins[pool_start:]) if s == src.step]
                if src.entry < len(fresh) and src.attribute in fresh[src.entry]:
                    values[k] = copy.deepcopy(fresh[src.entry][src.attribute])
                    run.rebound = run.rebound or values[k] != step.values.get(k)
            sent = replace(step, values=values)
            run.steps.append(sent)
            rec = self._send(self.api.operation(step.operation), values, dict(ctx, step=i))
            if rec is None:
                continue
            run.records.append(rec)
            if rec.transport_error:
                run.transport_error = True
                return run
            failed = self._after(i, rec, enabled)
            if failed is not None:
                run.failed_at, run.verdict = i, failed
                return run
        return run

    def _generate_and_run(self, seq_index: int, rng: Rng) -> SequenceRun:
        self._reset()
        size = size_schedule(seq_index, self.cfg)
        lo, hi = self.plan_lengths
        n = rng.randint(lo, hi)
        run = SequenceRun([], [])
        for i in range(n):
            srng = rng.split("step", i)
            op = srng.choice(self.ops)
            step = gen_step(op, self.compiled, self.pool, self.cfg, srng, size, self.identity)
            run.steps.append(step)
            rec = self._send(op, step.values, {"seed": self.plan.seed, "sequence": seq_index,
                                               "step": i, "phase": "test"})
            if rec is None:
                continue
            run.records.append(rec)
            if rec.transport_error:
                run.transport_error = True
                return run
            failed = self._after(i, rec, self.plan.enabled_properties)
            if failed is not None:
                run.failed_at, run.verdict = i, failed
                return run
        return run

    def run(self, sequences: int, length_range: Tuple[int, int]) -> SequenceOutcome:
        lo, hi = length_range
        if lo < 1 or hi < lo:
            raise ValueError("length range must satisfy 1 <= min <= max")
        self.plan_lengths = (lo, hi)
        outcome = SequenceOutcome("pass")
        consecutive = 0
        base = Rng(self.plan.seed).split("stateful")
        for s in range(sequences if self.ops else 0):
            run = self._generate_and_run(s, base.split(s))
            outcome.sequences_run += 1
            if run.transport_error:
                outcome.transport_errors += 1
                consecutive += 1
                if consecutive >= self.plan.max_transport_errors:
                    outcome.verdict = "aborted"
                    break
                continue
            consecutive = 0
            if run.failed_at is not None:
                self._fail(outcome, run, s)
                break
        outcome.record_count = len(self.records)
        return outcome

    def _fail(self, outcome: SequenceOutcome, run: SequenceRun, seq_index: int) -> None:
        failing = run.steps[:run.failed_at + 1]
        prop = run.verdict.property
        rec = run.records[-1]
        last_ok: List[List[CallStep]] = []
        rebound = [False]

        def still_fails(cand: List[CallStep]) -> bool:
            r = self.replay(cand, {"seed": self.plan.seed, "phase": "shrink"}, {prop})
            if r.failed_at is not None and r.failed_at == len(cand) - 1:
                last_ok.append(r.steps)
                rebound[0] = rebound[0] or r.rebound
                return True
            return False

        def spec_for(op_id):
            op = self.api.operation(op_id)
            return self.compiled.registry, self.compiled.assignment_spec(op)

        exhausted = False
        try:
            res = shrink_sequence(failing, still_fails, self.plan.shrink_budget, spec_for)
            executions = res.executions
        except ShrinkBudgetExceeded as exc:
            executions, exhausted = exc.steps, True
        shrunk = last_ok[-1] if last_ok else failing
        if not last_ok:
            # nothing was accepted: confirm the original still fails on a fresh target
            still_fails(failing)
            executions += 1
        outcome.verdict = "fail"
        outcome.steps = run.steps
        outcome.failed_operation = failing[-1].operation
        outcome.shrunk_sequence = shrunk
        outcome.shrink_executions = executions
        outcome.shrink_exhausted = exhausted
        outcome.values_may_differ = self.reset is None or rebound[0]
        outcome.failure = Failure(
            property=prop, detail=run.verdict.detail,
            original_input={"steps": [s.values for s in failing]},
            shrunk_input={"steps": [s.values for s in shrunk]},
            shrink_steps=len(failing) - len(shrunk), shrink_executions=executions,
            shrink_exhausted=exhausted, reproduced=bool(last_ok),
            status=rec.status, violations=run.verdict.violations,
            test_id=f"sequence:{seq_index}",
            repro_command=f"{self.plan.repro_base} --sequences {seq_index + 1}",
        )
        if self.reset is None:
            log.warning("no reset hook configured; sequence shrinking ran against live state")


def run_stateful(api: ApiDescription, compiled: CompiledApi, cfg: GeneratorConfig, plan: RunPlan,
                 client, base_url: Optional[str] = None, sequences: int = 100,
                 length_range: Tuple[int, int] = (2, 5), identity=None, reset=None,
                 endpoint: Optional[str] = None, metadata=None,
                 body_cap: int = DEFAULT_BODY_CAP):
    """Run ``sequences`` random call sequences and assemble a :class:`TestReport`."""
    from .report import build_report

    started = time.time()
    runner = StatefulRunner(api, compiled, cfg, plan, client, base_url or api.base_url,
                            identity, reset, select_operations(api, endpoint))
    outcome = runner.run(sequences, length_range)
    return build_report(api, [outcome], runner.records, metadata=metadata,
                        started=started, finished=time.time(), body_cap=body_cap)
