"""The consultation protocol: a three-phase state machine with full context
carryover, two single-prompt baselines, and the structured diagnosis parser.

A session owns its message history; each phase request contains every prior
message, so later answers can build on earlier ones. Prompts live as text
assets under prompts/ and each carries a machine-readable phase marker line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from hashlib import sha256
from importlib import resources
from string import Template
from typing import Mapping, Optional

from .domain import FaultLabel, MachineRecord, parse_fault_label, scan_for_fault_label
from .errors import (
    EmptyCompletion,
    NoteNotAllowed,
    PhaseProtocolViolation,
    SessionComplete,
    TransportError,
)
from .llm import DEFAULT_MODEL, ChatBackend, ChatMessage, ChatRequest, Role
from .summarize import render_summary_text, summarize_machine

MAX_PHASE_RETRIES = 2

# parse-degradation warning codes
WARN_CONFIDENCE_CLAMPED = "ConfidenceClamped"
WARN_UNKNOWN_LABEL_TOKEN = "UnknownLabelToken"
WARN_FALLBACK_SYNONYM_SCAN = "FallbackSynonymScan"
WARN_NO_DIAGNOSIS_FOUND = "NoDiagnosisFound"
WARN_ACTIONS_UNSTRUCTURED = "ActionsUnstructured"

ERROR_DIAGNOSIS_UNPARSEABLE = "DiagnosisUnparseable"

FALLBACK_CONFIDENCE = 0.5

_FAULT_LINE_RE = re.compile(
    r"^\s*FAULT\s*:\s*(?P<token>[^|]+?)\s*\|\s*CONFIDENCE\s*:\s*"
    r"(?P<num>[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)\s*$",
    re.IGNORECASE,
)
_NUMBERED_LINE_RE = re.compile(r"^\s*\d+[.)]\s+(\S.*?)\s*$")
_BULLET_LINE_RE = re.compile(r"^\s*[-*]\s+(\S.*?)\s*$")


class Strategy(Enum):
    MULTI_ROUND = "multi_round"
    SINGLE_SHOT = "single_shot"
    COT = "cot"


class Phase(Enum):
    SUMMARY = "summary"
    ANALYSIS = "analysis"
    ACTION = "action"
    SINGLE = "single"


#: Phases that accept an operator note (between rounds only).
NOTE_PHASES = frozenset({Phase.ANALYSIS, Phase.ACTION})

_PHASE_PLAN = {
    Strategy.MULTI_ROUND: (Phase.SUMMARY, Phase.ANALYSIS, Phase.ACTION),
    Strategy.SINGLE_SHOT: (Phase.SINGLE,),
    Strategy.COT: (Phase.SINGLE,),
}


@dataclass(frozen=True)
class ConsultConfig:
    model: str = DEFAULT_MODEL
    temperature: float = 0.0


@dataclass(frozen=True)
class PhaseRecord:
    phase: Phase
    operator_note: Optional[str]
    prompt: str
    response: str
    retries_used: int


@dataclass(frozen=True)
class ConsultationTranscript:
    session_id: str
    machine_id: str
    strategy: Strategy
    phases: tuple[PhaseRecord, ...]
    messages: tuple[ChatMessage, ...]


@dataclass(frozen=True)
class DiagnosisResult:
    label: FaultLabel
    confidence: float
    rationale: str
    actions: tuple[str, ...]
    parse_warnings: tuple[str, ...]
    error: Optional[str] = None


def extract_diagnosis(response_text: str) -> tuple[FaultLabel, float, list[str]]:
    """Total parser for the structured trailer, scanning lines last-to-first;
    degrades to a synonym scan and then to (unknown, 0.0)."""
    for line in reversed(response_text.splitlines()):
        m = _FAULT_LINE_RE.match(line)
        if m is None:
            continue
        warnings: list[str] = []
        confidence = float(m.group("num"))
        if not 0.0 <= confidence <= 1.0:
            confidence = min(1.0, max(0.0, confidence))
            warnings.append(WARN_CONFIDENCE_CLAMPED)
        label = parse_fault_label(m.group("token"))
        if label is FaultLabel.UNKNOWN:
            warnings.append(WARN_UNKNOWN_LABEL_TOKEN)
        return label, confidence, warnings
    label = scan_for_fault_label(response_text)
    if label is not FaultLabel.UNKNOWN:
        return label, FALLBACK_CONFIDENCE, [WARN_FALLBACK_SYNONYM_SCAN]
    return FaultLabel.UNKNOWN, 0.0, [WARN_NO_DIAGNOSIS_FOUND]


def extract_actions(response_text: str) -> tuple[tuple[str, ...], list[str]]:
    """Numbered lines first, then bullet lines, then the whole text as one
    action with an ActionsUnstructured warning."""
    lines = response_text.splitlines()
    for pattern in (_NUMBERED_LINE_RE, _BULLET_LINE_RE):
        found = [m.group(1) for m in map(pattern.match, lines) if m]
        if found:
            return tuple(found), []
    whole = response_text.strip()
    actions = (whole,) if whole else ()
    return actions, [WARN_ACTIONS_UNSTRUCTURED]


def _load_template(name: str) -> Template:
    text = resources.files("faultconsult").joinpath("prompts").joinpath(f"{name}.txt").read_text("utf-8")
    return Template(text)


_TEMPLATES: dict[str, Template] = {}


def _template(name: str) -> Template:
    if name not in _TEMPLATES:
        _TEMPLATES[name] = _load_template(name)
    return _TEMPLATES[name]


_MACHINE_MARKER_LINE_RE = re.compile(r"^<!--machine:.*-->$", re.MULTILINE)


def build_phase_prompt(
    phase: Phase,
    machine: MachineRecord,
    summary_text: str,
    history_digest: Optional[str] = None,
    operator_note: Optional[str] = None,
    cot: bool = False,
) -> str:
    """Instantiate the phase template; byte-deterministic for equal inputs.

    The optional history digest is embedded as a marker line so recorded
    prompts are traceable to the exact prior context they extended.
    """
    name = "single_cot" if (phase is Phase.SINGLE and cot) else phase.value
    note_paragraph = f"\nOperator context: {operator_note}\n" if operator_note else ""
    prompt = _template(name).substitute(
        machine_id=machine.machine_id,
        machine_type=machine.machine_type,
        summary=summary_text.rstrip("\n"),
        note_paragraph=note_paragraph,
    )
    if history_digest:
        marker = _MACHINE_MARKER_LINE_RE.search(prompt)
        assert marker is not None
        insert_at = marker.end()
        prompt = prompt[:insert_at] + f"\n<!--history:{history_digest}-->" + prompt[insert_at:]
    return prompt


def _history_digest(messages: list[ChatMessage]) -> Optional[str]:
    if not messages:
        return None
    h = sha256()
    for msg in messages:
        for part in (msg.role.value, msg.content):
            raw = part.encode("utf-8")
            h.update(len(raw).to_bytes(8, "big"))
            h.update(raw)
    return h.hexdigest()[:16]


class ConsultationSession:
    """One machine, one strategy, phases advanced one at a time.

    Strictly sequential; not safe for concurrent use. A failed advance leaves
    the session unchanged, so a transient backend failure can be retried by
    calling advance again.
    """

    def __init__(
        self,
        machine: MachineRecord,
        strategy: Strategy,
        backend: ChatBackend,
        config: ConsultConfig = ConsultConfig(),
        session_id: Optional[str] = None,
    ):
        self.machine = machine
        self.strategy = strategy
        self._backend = backend
        self._config = config
        self.summary_text = render_summary_text(machine, summarize_machine(machine))
        self._plan = _PHASE_PLAN[strategy]
        self._phases: list[PhaseRecord] = []
        self._messages: list[ChatMessage] = []
        self._result: Optional[DiagnosisResult] = None
        if session_id is None:
            key = f"{machine.machine_id}|{strategy.value}|{config.model}|{config.temperature!r}"
            session_id = sha256(key.encode("utf-8")).hexdigest()[:32]
        self.session_id = session_id

    @property
    def is_complete(self) -> bool:
        return len(self._phases) == len(self._plan)

    @property
    def next_phase(self) -> Optional[Phase]:
        return None if self.is_complete else self._plan[len(self._phases)]

    def advance(self, operator_note: Optional[str] = None) -> PhaseRecord:
        phase = self.next_phase
        if phase is None:
            raise SessionComplete(f"session {self.session_id} has no phases left")
        if operator_note is not None and phase not in NOTE_PHASES:
            raise NoteNotAllowed(f"phase {phase.value} does not accept an operator note")

        prompt = build_phase_prompt(
            phase,
            self.machine,
            self.summary_text,
            history_digest=_history_digest(self._messages),
            operator_note=operator_note,
            cot=self.strategy is Strategy.COT,
        )
        pending = list(self._messages)
        if operator_note is not None:
            pending.append(ChatMessage(Role.USER, f"Operator context: {operator_note}"))
        pending.append(ChatMessage(Role.USER, prompt))
        request = ChatRequest(
            model=self._config.model, messages=tuple(pending), temperature=self._config.temperature
        )

        retries = 0
        while True:
            try:
                response = self._backend.complete(request)
                break
            except (TransportError, EmptyCompletion):
                if retries >= MAX_PHASE_RETRIES:
                    raise
                retries += 1

        record = PhaseRecord(
            phase=phase,
            operator_note=operator_note,
            prompt=prompt,
            response=response,
            retries_used=retries,
        )
        self._messages = pending + [ChatMessage(Role.ASSISTANT, response)]
        self._phases.append(record)
        return record

    def transcript(self) -> ConsultationTranscript:
        return ConsultationTranscript(
            session_id=self.session_id,
            machine_id=self.machine.machine_id,
            strategy=self.strategy,
            phases=tuple(self._phases),
            messages=tuple(self._messages),
        )

    def result(self) -> DiagnosisResult:
        if not self.is_complete:
            raise PhaseProtocolViolation("result requested before the final phase completed")
        if self._result is None:
            by_phase = {p.phase: p for p in self._phases}
            diagnosis_phase = by_phase.get(Phase.ANALYSIS) or by_phase[Phase.SINGLE]
            actions_phase = by_phase.get(Phase.ACTION) or by_phase[Phase.SINGLE]
            label, confidence, warnings = extract_diagnosis(diagnosis_phase.response)
            actions, action_warnings = extract_actions(actions_phase.response)
            warnings = warnings + action_warnings
            error = None
            if label is FaultLabel.UNKNOWN and WARN_NO_DIAGNOSIS_FOUND in warnings:
                error = ERROR_DIAGNOSIS_UNPARSEABLE
            self._result = DiagnosisResult(
                label=label,
                confidence=confidence,
                rationale=diagnosis_phase.response,
                actions=actions,
                parse_warnings=tuple(warnings),
                error=error,
            )
        return self._result


def run_consultation(
    machine: MachineRecord,
    strategy: Strategy,
    backend: ChatBackend,
    config: ConsultConfig = ConsultConfig(),
    notes: Optional[Mapping[Phase, str]] = None,
) -> tuple[ConsultationTranscript, DiagnosisResult]:
    """Drive a session to completion; notes map a phase to the operator note
    delivered just before it."""
    session = ConsultationSession(machine, strategy, backend, config)
    notes = dict(notes or {})
    while not session.is_complete:
        phase = session.next_phase
        assert phase is not None
        session.advance(operator_note=notes.get(phase))
    return session.transcript(), session.result()
