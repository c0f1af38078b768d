"""Command-line entry point: ``quickrest --spec DOC [options]``.

Exit codes: 0 when every check passes, 1 when any property fails or a run
is aborted, 2 for configuration or document errors.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shlex
import sys
from typing import Callable, List, Optional, Sequence
from urllib.error import URLError

from .checker import PARAM_STRATEGIES, RunPlan, check_all, parse_properties
from .client import ClientConfig, HttpClient, RequestPlan
from .errors import QuickRestError
from .gen import GeneratorConfig
from .model import load_source, parse_document
from .report import render_json, render_text
from .specs import compile_api
from .stateful import parse_identity_map, run_stateful

AUTH_ENV = "QUICKREST_AUTH_HEADER"

# flags that identify a single failing test; dropped when building repro commands
_REPRO_DROP = ("--endpoint", "--replay", "--report-json")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _probability(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not a probability in [0, 1]")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="quickrest",
                 description="Property-based testing of REST APIs described by OpenAPI 2.0.",
                 formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    ap.add_argument("--config", help="JSON file of option values; flags override it")
    ap.add_argument("--spec", help="OpenAPI document: file path or http(s) URL (required)")
    ap.add_argument("--base-url", help="target base URL; defaults to the document's scheme/host/basePath")
    ap.add_argument("--mode", choices=("stateless", "stateful"), default="stateless",
                    help="check operations one by one, or random call sequences")
    ap.add_argument("--endpoint", help="glob over 'VERB /path' or the path template")

    run = ap.add_argument_group("run plan")
    run.add_argument("--tests", type=_positive, default=10, help="tests per iteration")
    run.add_argument("--iterations", type=_positive, default=30, help="iterations per tier")
    run.add_argument("--tiers", type=_positive, default=1,
                     help="tiers; each tier multiplies the tests per iteration by --tier-growth")
    run.add_argument("--tier-growth", type=_positive, default=10,
                     help="factor applied to the tests per iteration from one tier to the next")
    run.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    run.add_argument("--properties", default="all",
                     help="comma list of Non500,StatusDocumented,BodyConforms, 'all' or 'none'")
    run.add_argument("--param-strategy", choices=PARAM_STRATEGIES, default="all-params",
                     help="per-param-first varies one parameter at a time before combining them")
    run.add_argument("--keep-going", action="store_true",
                     help="after a failure, hold the offending parameter and continue")
    run.add_argument("--shrink-budget", type=_positive, default=1000,
                     help="max executions spent shrinking one failure")
    run.add_argument("--max-transport-errors", type=_positive, default=10,
                     help="consecutive transport errors before an operation is aborted")
    run.add_argument("--replay", help="rerun one test by id (campaign:tier:iteration:index)")

    gen = ap.add_argument_group("generators")
    gen.add_argument("--string-mix", type=_probability, default=0.5,
                     help="probability of drawing an any-character string (else alphanumeric)")
    gen.add_argument("--charset-max", type=int, default=255,
                     help="highest code point for any-character strings")
    gen.add_argument("--int-mode", type=_probability, default=0.5,
                     help="probability of drawing a natural number (else any integer)")
    gen.add_argument("--omit-required-prob", type=_probability, default=0.0,
                     help="probability of leaving out each required parameter")
    gen.add_argument("--out-of-range-prob", type=_probability, default=0.0,
                     help="probability of pushing a value outside its documented range or type")
    gen.add_argument("--max-size", type=int, default=200,
                     help="cap on generated string and array lengths and integer magnitudes")
    gen.add_argument("--strict-objects", action="store_true",
                     help="treat undeclared object keys in responses as violations")

    st = ap.add_argument_group("stateful")
    st.add_argument("--sequences", type=_positive, default=100, help="sequences to run")
    st.add_argument("--seq-min", type=_positive, default=2, help="shortest sequence")
    st.add_argument("--seq-max", type=_positive, default=5, help="longest sequence")
    st.add_argument("--identity-map", action="append", default=[],
                    help="param=attribute mapping for pool lookups (repeatable)")
    st.add_argument("--reset-hook",
                    help="'VERB URL' request that resets the target, e.g. 'POST http://host/reset'")

    io = ap.add_argument_group("transport and output")
    io.add_argument("--auth-header", help=f"'Name: value' sent on every request (env {AUTH_ENV})")
    io.add_argument("--timeout", type=float, default=10.0, help="seconds per request")
    io.add_argument("--workers", type=_positive, default=1,
                    help="operations checked in parallel (stateless only)")
    io.add_argument("--report-json", help="write the JSON report to this path")
    io.add_argument("--canonical-json", action="store_true",
                    help="leave timestamps and latencies out of the JSON report")
    io.add_argument("--body-cap", type=_positive, default=64 * 1024,
                    help="response bytes kept per call in the report")
    io.add_argument("--quiet", action="store_true", help="do not print the text report")
    io.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return ap


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    ap = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            with open(known.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {known.config}: {exc}")
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        valid = {a.dest for a in ap._actions}
        defaults = {}
        for key, value in data.items():
            dest = key.replace("-", "_")
            if dest not in valid or dest in ("help", "config"):
                raise UsageError(f"unknown config key {key!r}")
            defaults[dest] = value
        ap.set_defaults(**defaults)
    args = ap.parse_args(argv)
    if not args.spec:
        raise UsageError("--spec is required")
    if args.seq_max < args.seq_min:
        raise UsageError("--seq-max must be >= --seq-min")
    if args.replay and args.mode != "stateless":
        raise UsageError("--replay applies to stateless runs")
    return args


def repro_base(argv: Sequence[str]) -> str:
    kept: List[str] = []
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        name = a.split("=", 1)[0]
        if name in _REPRO_DROP:
            skip = "=" not in a
            continue
        kept.append(a)
    return " ".join(["quickrest"] + [shlex.quote(a) for a in kept])


def _reset_hook(text: Optional[str], client: HttpClient) -> Optional[Callable[[], None]]:
    if not text:
        return None
    verb, _, url = text.strip().partition(" ")
    if not url.strip() or not verb.isalpha():
        raise UsageError("--reset-hook must look like 'VERB URL'")
    plan = RequestPlan("reset", verb.upper(), url.strip())

    def reset():
        rec = client.execute(plan)
        if rec.transport_error or rec.status is None or rec.status >= 400:
            raise QuickRestError(f"reset hook failed: {rec.transport_error or rec.status}")

    return reset


def run(argv: Optional[Sequence[str]] = None, out=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = out or sys.stdout
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"quickrest: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = GeneratorConfig(args.string_mix, args.charset_max, args.int_mode,
                              args.omit_required_prob, args.out_of_range_prob, args.max_size)
        plan = RunPlan(args.tests, args.iterations, args.tiers, args.tier_growth, args.seed,
                       parse_properties(args.properties), args.param_strategy,
                       args.shrink_budget, args.max_transport_errors, args.keep_going,
                       repro_base(argv))
        auth = args.auth_header or os.environ.get(AUTH_ENV) or None
        client = HttpClient(ClientConfig(args.timeout, auth))
        identity = parse_identity_map(args.identity_map)
        reset = _reset_hook(args.reset_hook, client)
    except (ValueError, UsageError) as exc:
        print(f"quickrest: error: {exc}", file=sys.stderr)
        return 2

    try:
        raw = load_source(args.spec, timeout=args.timeout)
        api = parse_document(raw)
        compiled = compile_api(api, strict_objects=args.strict_objects)
    except (OSError, URLError) as exc:
        print(f"quickrest: error: cannot read {args.spec}: {exc}", file=sys.stderr)
        return 2
    except QuickRestError as exc:
        print(f"quickrest: error: {args.spec}: {exc}", file=sys.stderr)
        return 2

    base_url = args.base_url or api.base_url
    if not base_url:
        print("quickrest: error: document has no host; pass --base-url", file=sys.stderr)
        return 2

    metadata = {
        "seed": args.seed,
        "mode": args.mode,
        "source": args.spec,
        "documentSha256": hashlib.sha256(raw).hexdigest(),
        "baseUrl": base_url,
        "config": _config_dict(args),
    }
    try:
        if reset is not None:
            reset()
        if args.mode == "stateful":
            report = run_stateful(api, compiled, cfg, plan, client, base_url, args.sequences,
                                  (args.seq_min, args.seq_max), identity, reset,
                                  args.endpoint, metadata, args.body_cap)
        else:
            report = check_all(api, cfg, plan, compiled, client, base_url, args.endpoint,
                               args.workers, args.replay, metadata, args.body_cap)
    except QuickRestError as exc:
        print(f"quickrest: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"quickrest: error: {exc}", file=sys.stderr)
        return 2
    finally:
        client.close()

    if not args.quiet:
        out.write(render_text(report))
    if args.report_json:
        with open(args.report_json, "w", encoding="utf-8") as fh:
            fh.write(render_json(report, canonical=args.canonical_json))
    return report.exit_code()


def _config_dict(args: argparse.Namespace) -> dict:
    skip = {"config", "spec", "report_json", "quiet", "verbose", "auth_header", "base_url"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv: Optional[Sequence[str]] = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
