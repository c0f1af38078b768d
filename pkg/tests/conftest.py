import json
import os

import pytest

from quickrest.client import ClientConfig, HttpClient
from quickrest.fixture import FixtureServer, FixtureService, fixture_document
from quickrest.model import parse_document
from quickrest.specs import compile_api

DATA = os.path.join(os.path.dirname(__file__), "data")


def data_path(name):
    return os.path.join(DATA, name)


@pytest.fixture(scope="session")
def fixture_server():
    server = FixtureServer().start()
    yield server
    server.stop()


@pytest.fixture
def server(fixture_server):
    """The shared fixture, wiped before each test."""
    fixture_server.service.reset()
    return fixture_server


@pytest.fixture(scope="session")
def clean_server():
    server = FixtureServer(service=FixtureService(planted=False)).start()
    yield server
    server.stop()


@pytest.fixture(scope="session")
def fixture_api():
    return parse_document(json.dumps(fixture_document()))


@pytest.fixture(scope="session")
def fixture_compiled(fixture_api):
    return compile_api(fixture_api)


@pytest.fixture(scope="session")
def objects_text():
    with open(data_path("objects_api.json"), encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture(scope="session")
def objects_api(objects_text):
    return parse_document(objects_text)


@pytest.fixture
def client():
    c = HttpClient(ClientConfig(timeout=5.0))
    yield c
    c.close()


def write_doc(tmp_path, server, name="doc.json"):
    """Write the fixture document pointed at ``server`` and return its path."""
    host = server.url.split("//", 1)[1]
    path = tmp_path / name
    path.write_text(json.dumps(fixture_document(host)), encoding="utf-8")
    return str(path)


ACCEPTANCE_LINES = pytest.StashKey()


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict line; all lines are echoed in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def note(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        lines.append(line)
        print(line)
        return ok
    return note


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
