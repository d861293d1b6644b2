"""Multi-round LLM consultation for industrial machine fault diagnosis, with
a verifiable synthetic-data substrate and pluggable chat backends."""

from .consult import (
    ConsultConfig,
    ConsultationSession,
    ConsultationTranscript,
    DiagnosisResult,
    Phase,
    PhaseRecord,
    Strategy,
    extract_diagnosis,
    run_consultation,
)
from .domain import Channel, FaultLabel, MachineRecord, MaintenanceEvent, SensorSeries
from .errors import BackendError, DataError, FaultConsultError
from .evalreport import EvalConfig, EvalRecord, EvalReport, evaluate_dataset, render_report
from .ingest import load_dataset, load_manifest
from .judge import JudgeScores, judge_transcript, scripted_judge
from .llm import CassetteBackend, CassetteMode, ChatMessage, ChatRequest, HttpBackend, OracleBackend
from .summarize import goertzel_magnitude, summarize_series
from .synthgen import SynthConfig, generate_dataset, generate_machine, oracle_diagnose, write_dataset

__version__ = "0.1.0"
