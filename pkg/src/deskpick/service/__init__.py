"""HTTP/WebSocket service wrapping the session engine and harness."""

from .app import create_app  # noqa: F401
