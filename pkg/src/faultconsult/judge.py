"""Judge scoring of completed transcripts on three [0,1] metrics: synthesis
of the data sources (context), decisiveness of the fault prediction against
the gold label (confidence), and usefulness of the recommended steps
(actionability).

One judge request scores all three. The judge sees the gold label; the
consulted model never does (asserted in tests by scanning consultation
messages for the rubric's gold-assertion line).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from string import Template

from .consult import ConsultationTranscript
from .domain import FaultLabel
from .errors import JudgeUnparseable, ScoreOutOfRange
from .llm import DEFAULT_MODEL, ChatBackend, ChatMessage, ChatRequest, Role

MAX_JUDGE_RETRIES = 2

GOLD_LINE_PREFIX = "GOLD LABEL: "

_SCORE_TOKENS = ("CONTEXT", "CONFIDENCE", "ACTIONABILITY")
# tokens are case-sensitive by contract; the number grammar is flexible
_SCORE_RES = {
    token: re.compile(rf"^\s*{token}\s*:\s*([-+]?(?:\d+(?:\.\d*)?|\.\d+))\s*$", re.MULTILINE)
    for token in _SCORE_TOKENS
}

FORMAT_REMINDER = (
    "Your previous answer did not match the required format. "
    "Answer with exactly three lines and nothing else:\n"
    "CONTEXT: x.xx\nCONFIDENCE: x.xx\nACTIONABILITY: x.xx"
)


@dataclass(frozen=True)
class JudgeScores:
    context: float
    fault_confidence: float
    actionability: float

    def validate(self) -> None:
        for name in ("context", "fault_confidence", "actionability"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ScoreOutOfRange(f"{name} = {v} outside [0, 1]")


def _round4(raw: str) -> float:
    # extra decimals are accepted and rounded half-up to 4 places
    return float(Decimal(raw).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP))


def parse_judge_response(text: str) -> tuple[JudgeScores, list[str]]:
    """Parse the three-line grammar; clamps out-of-range values with a warning,
    raises JudgeUnparseable when any line is missing."""
    values: dict[str, float] = {}
    warnings: list[str] = []
    for token in _SCORE_TOKENS:
        m = _SCORE_RES[token].search(text)
        if m is None:
            raise JudgeUnparseable(f"missing {token} line in judge output")
        v = _round4(m.group(1))
        if not 0.0 <= v <= 1.0:
            v = min(1.0, max(0.0, v))
            warnings.append(f"JudgeScoreClamped:{token}")
        values[token] = v
    return (
        JudgeScores(
            context=values["CONTEXT"],
            fault_confidence=values["CONFIDENCE"],
            actionability=values["ACTIONABILITY"],
        ),
        warnings,
    )


def render_transcript(transcript: ConsultationTranscript) -> str:
    """Role-prefixed plain text of the full message history."""
    parts = [f"[{m.role.value}]\n{m.content}" for m in transcript.messages]
    return "\n\n".join(parts)


_RUBRIC: list[Template] = []


def _rubric() -> Template:
    if not _RUBRIC:
        text = resources.files("faultconsult").joinpath("prompts").joinpath("judge.txt").read_text("utf-8")
        _RUBRIC.append(Template(text))
    return _RUBRIC[0]


def build_judge_prompt(transcript: ConsultationTranscript, gold_label: FaultLabel) -> str:
    return _rubric().substitute(
        gold_label=gold_label.value, transcript=render_transcript(transcript)
    )


def judge_transcript(
    transcript: ConsultationTranscript,
    gold_label: FaultLabel,
    judge_backend: ChatBackend,
    model: str = DEFAULT_MODEL,
    temperature: float = 0.0,
) -> JudgeScores:
    """One judge call, parsed strictly; malformed output earns up to 2 retry
    rounds carrying a format reminder, then JudgeUnparseable."""
    messages = [ChatMessage(Role.USER, build_judge_prompt(transcript, gold_label))]
    last_error: Exception = JudgeUnparseable("judge never responded")
    for _ in range(1 + MAX_JUDGE_RETRIES):
        request = ChatRequest(model=model, messages=tuple(messages), temperature=temperature)
        response = judge_backend.complete(request)
        try:
            scores, _warnings = parse_judge_response(response)
            return scores
        except JudgeUnparseable as exc:
            last_error = exc
            messages = messages + [
                ChatMessage(Role.ASSISTANT, response),
                ChatMessage(Role.USER, FORMAT_REMINDER),
            ]
    raise last_error


class ScriptedJudge(ChatBackend):
    """Backend emitting the three-line grammar with fixed scores; keeps
    aggregate evaluation deterministic in tests."""

    def __init__(self, scores: JudgeScores):
        scores.validate()
        self._text = (
            f"CONTEXT: {scores.context:.2f}\n"
            f"CONFIDENCE: {scores.fault_confidence:.2f}\n"
            f"ACTIONABILITY: {scores.actionability:.2f}"
        )

    def complete(self, request: ChatRequest) -> str:
        request.validate()
        return self._text


def scripted_judge(context: float, fault_confidence: float, actionability: float) -> ScriptedJudge:
    return ScriptedJudge(
        JudgeScores(context=context, fault_confidence=fault_confidence, actionability=actionability)
    )
