"""HTTP service for the operator console.

JSON in, JSON out; every failure is `{"error": {"code", "message"}}` with the
status code derived from the error type. Binds localhost by default and has
no authentication: run it only as a local operator tool.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ..consult import Strategy
from ..domain import MachineRecord
from ..errors import (
    BackendError,
    BackendUnavailable,
    ConfigError,
    DataError,
    FaultConsultError,
    MissingStrategy,
    NoteNotAllowed,
    SessionBusy,
    SessionComplete,
    SessionFailed,
    UnknownJob,
    UnknownMachine,
    UnknownReport,
    UnknownSession,
)
from ..evalreport import EvalConfig, Format, Layout, render_report, report_to_dict
from ..judge import scripted_judge
from .sessions import JobStore, SessionStore

_STATUS_BY_ERROR = (
    ((UnknownMachine, UnknownSession, UnknownJob, UnknownReport), 404),
    ((SessionBusy, SessionComplete), 409),
    ((NoteNotAllowed, ConfigError, MissingStrategy), 400),
    ((SessionFailed, BackendUnavailable, BackendError), 502),
)


def _status_for(exc: FaultConsultError) -> int:
    for types, status in _STATUS_BY_ERROR:
        if isinstance(exc, types):
            return status
    return 400 if isinstance(exc, DataError) else 500


def _error_body(code: str, message: str) -> dict:
    return {"error": {"code": code, "message": message}}


class CreateSessionBody(BaseModel):
    machine_id: str
    strategy: str
    backend: str = "oracle"


class AdvanceBody(BaseModel):
    operator_note: Optional[str] = None


class EvaluateBody(BaseModel):
    strategies: list[str]
    backend: str = "oracle"
    workers: int = 4
    judge_scores: Optional[list[float]] = None


def _parse_strategy(token: str) -> Strategy:
    try:
        return Strategy(token)
    except ValueError:
        raise ConfigError(
            f"unknown strategy {token!r} (expected one of: "
            + ", ".join(s.value for s in Strategy)
            + ")"
        ) from None


def _machine_entry(m: MachineRecord) -> dict:
    return {
        "machine_id": m.machine_id,
        "machine_type": m.machine_type,
        "rotation_freq_hz": m.rotation_freq_hz,
        "gold_label": m.gold_label.value if m.gold_label else None,
        "series_count": len(m.series),
        "maintenance_count": len(m.maintenance),
    }


def create_app(store: SessionStore, jobs: Optional[JobStore] = None) -> FastAPI:
    app = FastAPI(title="faultconsult gateway", docs_url=None, redoc_url=None)
    jobs = jobs or JobStore()
    # the console is a static page opened from disk; the service is a
    # localhost-only operator tool with no credentials to protect
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(FaultConsultError)
    async def handle_domain_error(request: Request, exc: FaultConsultError):
        return JSONResponse(status_code=_status_for(exc), content=_error_body(exc.code, str(exc)))

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content=_error_body("ConfigError", str(exc)))

    @app.get("/api/machines")
    def machines():
        return {
            "machines": [_machine_entry(m) for m in store.machines],
            "backends": store.backend_kinds,
        }

    @app.post("/api/sessions")
    def create_session(body: CreateSessionBody):
        return store.create_session(body.machine_id, _parse_strategy(body.strategy), body.backend)

    @app.get("/api/sessions")
    def list_sessions():
        return {"sessions": store.list_sessions()}

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        return store.snapshot(session_id)

    @app.post("/api/sessions/{session_id}/advance")
    def advance(session_id: str, body: Optional[AdvanceBody] = None):
        note = body.operator_note if body else None
        return store.advance_session(session_id, operator_note=note)

    @app.post("/api/evaluate")
    def evaluate(body: EvaluateBody):
        strategies = [_parse_strategy(t) for t in body.strategies]
        backend = store.backend(body.backend)
        scores = body.judge_scores or [0.8, 0.85, 0.8]
        if len(scores) != 3:
            raise ConfigError("judge_scores must have exactly 3 values")
        judge = scripted_judge(*scores)
        job_id = jobs.start_evaluation(
            store.machines, strategies, backend, judge, EvalConfig(workers=body.workers)
        )
        return {"job_id": job_id}

    @app.get("/api/jobs/{job_id}")
    def job_state(job_id: str):
        return jobs.job_state(job_id)

    @app.get("/api/reports")
    def list_reports():
        return {"reports": jobs.list_reports()}

    @app.get("/api/reports/{report_id}")
    def get_report(report_id: str, layout: str = "full", format: str = "json"):
        report = jobs.report(report_id)
        try:
            layout_v = Layout(layout)
            format_v = Format(format)
        except ValueError as exc:
            raise ConfigError(f"bad layout/format: {exc}") from None
        return {
            "report_id": report_id,
            "layout": layout_v.value,
            "format": format_v.value,
            "content": render_report(report, layout_v, format_v),
            "report": report_to_dict(report),
        }

    return app
