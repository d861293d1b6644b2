"""In-memory session and job stores behind the HTTP service.

Sessions live for the process lifetime only. Each session carries its own
lock and an in_flight status gate, so concurrent advance calls on one session
serialize: exactly one proceeds, the rest observe in_flight and are rejected.
"""

from __future__ import annotations

import secrets
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

from ..consult import (
    ConsultationSession,
    ConsultConfig,
    Phase,
    Strategy,
    extract_diagnosis,
)
from ..domain import MachineRecord
from ..errors import (
    BackendError,
    BackendUnavailable,
    SessionBusy,
    SessionComplete,
    SessionFailed,
    UnknownJob,
    UnknownMachine,
    UnknownReport,
    UnknownSession,
)
from ..evalreport import EvalConfig, EvalRecord, EvalReport, evaluate_dataset
from ..llm import ChatBackend

SCHEMA_VERSION = 1


class SessionStatus(Enum):
    AWAITING_ADVANCE = "awaiting_advance"
    IN_FLIGHT = "in_flight"
    COMPLETE = "complete"
    FAILED = "failed"


def _new_id() -> str:
    return secrets.token_hex(16)  # 128 random bits


@dataclass
class _ManagedSession:
    session_id: str
    backend_kind: str
    inner: ConsultationSession
    status: SessionStatus = SessionStatus.AWAITING_ADVANCE
    error: Optional[str] = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def _diagnosis_payload(inner: ConsultationSession) -> Optional[dict]:
    """Diagnosis as soon as the analysis (or single) phase has completed;
    actions join once the action phase lands."""
    phases = {p.phase: p for p in inner.transcript().phases}
    source = phases.get(Phase.ANALYSIS) or phases.get(Phase.SINGLE)
    if source is None:
        return None
    if inner.is_complete:
        result = inner.result()
        label, confidence, warnings = result.label, result.confidence, list(result.parse_warnings)
        actions, error = list(result.actions), result.error
    else:
        label, confidence, warnings = extract_diagnosis(source.response)
        actions, error = [], None
    return {
        "label": label.value,
        "confidence": confidence,
        "rationale": source.response,
        "actions": actions,
        "parse_warnings": warnings,
        "error": error,
    }


class SessionStore:
    """Synchronized map of live consultation sessions."""

    def __init__(
        self,
        machines: Sequence[MachineRecord],
        backends: Mapping[str, ChatBackend],
        config: ConsultConfig = ConsultConfig(),
    ):
        self._machines = {m.machine_id: m for m in machines}
        self._backends = dict(backends)
        self._config = config
        self._sessions: dict[str, _ManagedSession] = {}
        self._lock = threading.Lock()

    @property
    def machines(self) -> list[MachineRecord]:
        return sorted(self._machines.values(), key=lambda m: m.machine_id)

    @property
    def backend_kinds(self) -> list[str]:
        return sorted(self._backends)

    def backend(self, kind: str) -> ChatBackend:
        backend = self._backends.get(kind)
        if backend is None:
            raise BackendUnavailable(
                f"backend {kind!r} is not configured (have: {', '.join(self.backend_kinds)})"
            )
        return backend

    def create_session(self, machine_id: str, strategy: Strategy, backend_kind: str) -> dict:
        machine = self._machines.get(machine_id)
        if machine is None:
            raise UnknownMachine(f"no machine {machine_id!r} in the loaded dataset")
        backend = self.backend(backend_kind)
        session_id = _new_id()
        inner = ConsultationSession(machine, strategy, backend, self._config, session_id=session_id)
        managed = _ManagedSession(session_id=session_id, backend_kind=backend_kind, inner=inner)
        with self._lock:
            self._sessions[session_id] = managed
        return self.snapshot(session_id)

    def _get(self, session_id: str) -> _ManagedSession:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        return session

    def advance_session(self, session_id: str, operator_note: Optional[str] = None) -> dict:
        session = self._get(session_id)
        with session.lock:
            if session.status is SessionStatus.COMPLETE:
                raise SessionComplete(f"session {session_id} already completed all phases")
            if session.status is SessionStatus.FAILED:
                raise SessionFailed(f"session {session_id} already failed: {session.error}")
            if session.status is SessionStatus.IN_FLIGHT:
                raise SessionBusy(f"session {session_id} has a phase in flight")
            session.status = SessionStatus.IN_FLIGHT
        try:
            session.inner.advance(operator_note=operator_note)
        except BackendError as exc:
            with session.lock:
                session.status = SessionStatus.FAILED
                session.error = str(exc)
            raise SessionFailed(f"backend failure during advance: {exc}") from exc
        except Exception:
            # NoteNotAllowed and friends: the phase never ran, the gate reopens
            with session.lock:
                session.status = SessionStatus.AWAITING_ADVANCE
            raise
        with session.lock:
            session.status = (
                SessionStatus.COMPLETE if session.inner.is_complete else SessionStatus.AWAITING_ADVANCE
            )
        return self.snapshot(session_id)

    def snapshot(self, session_id: str) -> dict:
        session = self._get(session_id)
        with session.lock:
            inner = session.inner
            transcript = inner.transcript()
            return {
                "schema_version": SCHEMA_VERSION,
                "session_id": session.session_id,
                "machine_id": inner.machine.machine_id,
                "strategy": inner.strategy.value,
                "backend_kind": session.backend_kind,
                "status": session.status.value,
                "phase_index": len(transcript.phases),
                "phase_total": 3 if inner.strategy is Strategy.MULTI_ROUND else 1,
                "phases": [
                    {
                        "phase": p.phase.value,
                        "operator_note": p.operator_note,
                        "prompt": p.prompt,
                        "response": p.response,
                        "retries_used": p.retries_used,
                    }
                    for p in transcript.phases
                ],
                "diagnosis": _diagnosis_payload(inner),
                "error": session.error,
            }

    def list_sessions(self) -> list[dict]:
        with self._lock:
            ids = list(self._sessions)
        return [self.snapshot(sid) for sid in ids]


class JobStatus(Enum):
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


@dataclass
class _Job:
    job_id: str
    status: JobStatus = JobStatus.RUNNING
    report_id: Optional[str] = None
    error: Optional[str] = None


class JobStore:
    """Background evaluation jobs plus the reports they produce."""

    def __init__(self):
        self._jobs: dict[str, _Job] = {}
        self._reports: dict[str, EvalReport] = {}
        self._records: dict[str, list[EvalRecord]] = {}
        self._lock = threading.Lock()

    def start_evaluation(
        self,
        machines: Sequence[MachineRecord],
        strategies: Sequence[Strategy],
        backend: ChatBackend,
        judge_backend: ChatBackend,
        config: EvalConfig,
    ) -> str:
        job_id = _new_id()
        job = _Job(job_id=job_id)
        with self._lock:
            self._jobs[job_id] = job

        def run() -> None:
            try:
                report, records = evaluate_dataset(machines, strategies, backend, judge_backend, config)
            except Exception as exc:
                with self._lock:
                    job.status = JobStatus.FAILED
                    job.error = str(exc)
                return
            with self._lock:
                self._reports[job_id] = report
                self._records[job_id] = records
                job.report_id = job_id
                job.status = JobStatus.DONE

        threading.Thread(target=run, name=f"eval-{job_id[:8]}", daemon=True).start()
        return job_id

    def job_state(self, job_id: str) -> dict:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise UnknownJob(f"no job {job_id!r}")
            return {
                "job_id": job.job_id,
                "status": job.status.value,
                "report_id": job.report_id,
                "error": job.error,
            }

    def report(self, report_id: str) -> EvalReport:
        with self._lock:
            report = self._reports.get(report_id)
        if report is None:
            raise UnknownReport(f"no report {report_id!r}")
        return report

    def list_reports(self) -> list[str]:
        with self._lock:
            return sorted(self._reports)
