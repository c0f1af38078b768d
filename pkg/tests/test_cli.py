import io
import json
import subprocess
import sys

import pytest

from quickrest.checker import PARAM_STRATEGIES
from quickrest.cli import build_parser, parse_args, repro_base, run
from quickrest.report import parse_report

from conftest import data_path, write_doc


def cli(argv):
    out = io.StringIO()
    code = run(argv, out)
    return code, out.getvalue()


def test_objects_api_clean_fixture_exits_zero(clean_server):
    argv = ["--spec", data_path("objects_api.json"), "--base-url", clean_server.url,
            "--tests", "10", "--iterations", "30", "--seed", "7"]
    code, text = cli(argv)
    assert code == 0, text
    assert "GET /objects: PASS (300 tests)" in text
    assert "GET /objects/{objectid}: PASS (300 tests)" in text


def test_identical_argv_identical_runs(clean_server, tmp_path):
    reports = []
    for i in range(2):
        path = tmp_path / f"r{i}.json"
        argv = ["--spec", data_path("objects_api.json"), "--base-url", clean_server.url,
                "--iterations", "3", "--seed", "7", "--report-json", str(path),
                "--canonical-json", "--quiet"]
        clean_server.service.reset()
        assert cli(argv)[0] == 0
        reports.append(path.read_text())
    assert reports[0] == reports[1]


def test_missing_spec_file(capsys):
    code, _ = cli(["--spec", "missing.json", "--base-url", "http://127.0.0.1:1"])
    assert code == 2
    assert "cannot read missing.json" in capsys.readouterr().err


def test_spec_required(capsys):
    assert cli([])[0] == 2
    assert "--spec is required" in capsys.readouterr().err


@pytest.mark.parametrize("flag,value", [("--string-mix", "1.5"), ("--int-mode", "-1"),
                                        ("--omit-required-prob", "2"), ("--tests", "0"),
                                        ("--mode", "fuzzy"), ("--properties", "Speed")])
def test_bad_flags(tmp_path, flag, value):
    assert cli(["--spec", data_path("objects_api.json"), flag, value])[0] == 2


def test_invalid_document(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"swagger": "3.0", "paths": {}}))
    assert cli(["--spec", str(bad), "--base-url", "http://x"])[0] == 2
    assert capsys.readouterr().err.startswith("quickrest: error:")


def test_no_host_needs_base_url(tmp_path, capsys):
    doc = tmp_path / "nohost.json"
    doc.write_text(json.dumps({"swagger": "2.0", "paths": {}}))
    assert cli(["--spec", str(doc)])[0] == 2
    assert "--base-url" in capsys.readouterr().err


def test_empty_document_passes(tmp_path):
    doc = tmp_path / "empty.json"
    doc.write_text(json.dumps({"swagger": "2.0", "paths": {}}))
    code, text = cli(["--spec", str(doc), "--base-url", "http://127.0.0.1:1"])
    assert code == 0 and "0 checked, 0 failed" in text


def test_string_mix_flag_reaches_generator():
    args = parse_args(["--spec", "x.json", "--string-mix", "0.1"])
    assert args.string_mix == 0.1


def test_defaults():
    a = parse_args(["--spec", "x.json"])
    assert (a.tests, a.iterations, a.tier_growth, a.charset_max) == (10, 30, 10, 255)
    assert (a.string_mix, a.int_mode, a.omit_required_prob, a.out_of_range_prob) == \
        (0.5, 0.5, 0.0, 0.0)
    assert a.workers == 1 and a.mode == "stateless" and a.properties == "all"
    assert a.param_strategy in PARAM_STRATEGIES


def test_help_lists_every_flag_with_default():
    parser = build_parser()
    text = parser.format_help()
    for action in parser._actions:
        if action.dest == "help":
            continue
        for opt in action.option_strings:
            assert opt in text
        assert action.help, action.dest
    assert "(default: 0.5)" in text and "(default: stateless)" in text


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"spec": "a.json", "tests": 3, "string-mix": 0.2}))
    args = parse_args(["--config", str(cfg), "--tests", "5"])
    assert args.spec == "a.json" and args.tests == 5 and args.string_mix == 0.2


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"spec": "a.json", "speed": 3}))
    assert cli(["--config", str(cfg)])[0] == 2


def test_failing_run_writes_report(server, tmp_path):
    doc = write_doc(tmp_path, server)
    out = tmp_path / "report.json"
    code, text = cli(["--spec", doc, "--endpoint", "GET /teapot", "--iterations", "1",
                      "--report-json", str(out)])
    assert code == 1
    assert "StatusDocumented" in text
    report = parse_report(out.read_text(encoding="utf-8"))
    assert report.metadata["seed"] == 0 and report.metadata["mode"] == "stateless"
    assert len(report.metadata["documentSha256"]) == 64
    assert [o.operation for o in report.outcomes] == ["GET /teapot"]


def test_repro_command_replays(server, tmp_path):
    doc = write_doc(tmp_path, server)
    argv = ["--spec", doc, "--string-mix", "1", "--iterations", "3", "--seed", "5"]
    code, text = cli(argv)
    assert code == 1
    line = next(l for l in text.splitlines() if "repro:" in l and "GET /objects'" in l)
    import shlex
    repro = shlex.split(line.split("repro:", 1)[1])
    assert repro[0] == "quickrest"
    code2, text2 = cli(repro[1:])
    assert code2 == 1
    assert "GET /objects: FAIL (1 tests)" in text2


def test_repro_base_drops_single_test_flags():
    base = repro_base(["--spec", "d.json", "--endpoint", "GET /x", "--replay=all:0:0:1",
                       "--report-json", "r.json", "--seed", "3"])
    assert base == "quickrest --spec d.json --seed 3"


def test_stateful_mode_with_reset_hook(server, tmp_path):
    doc = write_doc(tmp_path, server)
    code, text = cli(["--spec", doc, "--mode", "stateful", "--endpoint", "*/resources*",
                      "--sequences", "200", "--seed", "1",
                      "--reset-hook", f"POST {server.url}/reset"])
    assert code == 1
    assert "stateful: FAIL" in text
    steps = [l.split(". ", 1)[1].split(" {")[0] for l in text.splitlines()
             if l.strip()[:2] in ("1.", "2.", "3.", "4.")]
    assert steps == ["POST /resources", "DELETE /resources/{id}", "PUT /resources/{id}"]
    assert "may differ" not in text


def test_bad_reset_hook(server, tmp_path):
    doc = write_doc(tmp_path, server)
    assert cli(["--spec", doc, "--mode", "stateful", "--reset-hook", "nonsense"])[0] == 2


def test_auth_header_from_env(monkeypatch):
    monkeypatch.setenv("QUICKREST_AUTH_HEADER", "bad")
    assert cli(["--spec", data_path("objects_api.json")])[0] == 2


def test_spec_over_http(server):
    code, text = cli(["--spec", server.url + "/swagger.json", "--endpoint", "GET /badbody",
                      "--iterations", "1"])
    assert code == 1 and "BodyConforms" in text


def test_module_entry_point(clean_server):
    proc = subprocess.run([sys.executable, "-m", "quickrest", "--spec", data_path("objects_api.json"),
                           "--base-url", clean_server.url, "--iterations", "1", "--quiet"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout == ""
