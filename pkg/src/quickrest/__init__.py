"""Property-based test generation for OpenAPI 2.0 described REST APIs."""

__version__ = "0.1.0"
