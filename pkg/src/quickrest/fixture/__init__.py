"""A small HTTP service with deliberately planted bugs, used as a test target."""
from .server import FixtureServer, FixtureService, fixture_document, serve

__all__ = ["FixtureServer", "FixtureService", "fixture_document", "serve"]
