"""Operator-facing surfaces: CLI and HTTP service."""

from .sessions import JobStore, SessionStatus, SessionStore

__all__ = ["JobStore", "SessionStatus", "SessionStore"]
