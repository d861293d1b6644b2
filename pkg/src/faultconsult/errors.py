"""Exception vocabulary shared across the package.

Every error carries a stable machine-readable ``code`` (its class name) so the
CLI and the HTTP service can map failures without string matching.
"""

from __future__ import annotations


class FaultConsultError(Exception):
    """Base class for all package errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# ---------------------------------------------------------------------------
# ingest / dataset errors (exit code 2 territory)
# ---------------------------------------------------------------------------

class DataError(FaultConsultError):
    """Problems with input data or configuration of a run."""


class IoError(DataError):
    """A referenced file could not be read or written."""

    def __init__(self, message: str, machine_id: str | None = None):
        super().__init__(message)
        self.machine_id = machine_id


class ParseError(DataError):
    """Malformed input; carries a 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None, machine_id: str | None = None):
        loc = f" (line {line})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.machine_id = machine_id


class DuplicateMachineId(DataError):
    pass


class UnknownVersion(DataError):
    pass


class NonMonotonicTimestamps(ParseError):
    pass


class NonFiniteValue(ParseError):
    pass


class TooShort(ParseError):
    pass


class EmptyText(ParseError):
    pass


class GoldLabelUnknown(DataError):
    pass


class RecordInvalid(DataError):
    """A loaded machine record failed invariant validation."""

    def __init__(self, machine_id: str, violations):
        codes = ", ".join(v.code for v in violations)
        super().__init__(f"machine {machine_id!r} failed validation: {codes}")
        self.machine_id = machine_id
        self.violations = list(violations)


class ConfigInvalid(DataError):
    """Synthetic generator configuration violates its invariants."""


class MissingRotationFrequency(DataError):
    pass


class FrequencyOutOfRange(DataError):
    pass


class EmptyInput(DataError):
    pass


class ConfigError(DataError):
    pass


class MissingStrategy(DataError):
    pass


class ScoreOutOfRange(DataError):
    pass


# ---------------------------------------------------------------------------
# chat-backend errors (exit code 3 territory)
# ---------------------------------------------------------------------------

class BackendError(FaultConsultError):
    """Base for anything that went wrong talking to a chat backend."""


class TransportError(BackendError):
    """Network-level failure that survived the retry policy."""


class ApiError(BackendError):
    """Non-retryable HTTP error from the chat endpoint."""

    def __init__(self, status: int, body_excerpt: str):
        super().__init__(f"chat endpoint returned HTTP {status}: {body_excerpt}")
        self.status = status
        self.body_excerpt = body_excerpt


class ReplayMiss(BackendError):
    """Replay-mode cassette has no entry for the request fingerprint."""

    def __init__(self, fingerprint: str):
        super().__init__(f"no cassette entry for fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class EmptyCompletion(BackendError):
    pass


class UnknownPhaseMarker(BackendError):
    pass


class InvalidRequest(BackendError):
    """Chat request violates the message-shape invariants."""


class JudgeUnparseable(BackendError):
    """Judge output stayed malformed after the retry budget."""


# ---------------------------------------------------------------------------
# consultation / session errors
# ---------------------------------------------------------------------------

class PhaseProtocolViolation(FaultConsultError):
    """Internal assertion: the phase state machine was driven out of order."""


class NoteNotAllowed(DataError):
    """Operator note supplied before a phase that does not accept one."""


class UnknownMachine(DataError):
    pass


class BackendUnavailable(BackendError):
    pass


class UnknownSession(DataError):
    pass


class UnknownJob(DataError):
    pass


class UnknownReport(DataError):
    pass


class SessionComplete(DataError):
    pass


class SessionBusy(DataError):
    pass


class SessionFailed(BackendError):
    pass
