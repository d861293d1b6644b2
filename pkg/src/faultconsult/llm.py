"""Chat backends: live HTTP (OpenAI-compatible wire shape), record/replay
cassettes keyed by request fingerprint, and a deterministic oracle backend
driven by phase markers embedded in prompts.

All three expose a single method, complete(request) -> assistant text, and are
safe for concurrent calls.
"""

from __future__ import annotations

import json
import os
import random
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from hashlib import sha256
from pathlib import Path
from typing import Callable, Mapping, Optional

import requests

from .domain import FaultLabel
from .errors import (
    ApiError,
    ConfigError,
    EmptyCompletion,
    InvalidRequest,
    IoError,
    ParseError,
    ReplayMiss,
    TransportError,
    UnknownPhaseMarker,
)

ENV_API_KEY = "FAULTCONSULT_API_KEY"
ENV_BASE_URL = "FAULTCONSULT_BASE_URL"
ENV_MODEL = "FAULTCONSULT_MODEL"
DEFAULT_MODEL = "gpt-4"

RETRY_BACKOFF_S = (0.5, 1.0, 2.0)  # one sleep per retry; 4 attempts total
JITTER_FRACTION = 0.2
RETRYABLE_STATUSES = frozenset({429}) | frozenset(range(500, 600))


class Role(Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0

    def validate(self) -> None:
        if not self.model:
            raise InvalidRequest("model must be non-empty")
        if not self.messages:
            raise InvalidRequest("messages must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise InvalidRequest(f"temperature {self.temperature} outside [0, 2]")
        if self.messages[0].role is Role.ASSISTANT:
            raise InvalidRequest("first message must be system or user")
        for i, msg in enumerate(self.messages):
            if not msg.content:
                raise InvalidRequest(f"message {i} has empty content")
            if i and msg.role is Role.ASSISTANT and self.messages[i - 1].role is Role.ASSISTANT:
                raise InvalidRequest(f"messages {i - 1} and {i} are both assistant turns")


def fingerprint(request: ChatRequest) -> str:
    """Stable digest over model, temperature, and the ordered (role, content)
    pairs; each field is length-prefixed UTF-8 so concatenation is unambiguous."""
    request.validate()
    h = sha256()

    def feed(text: str) -> None:
        raw = text.encode("utf-8")
        h.update(len(raw).to_bytes(8, "big"))
        h.update(raw)

    feed("chat-request:v1")
    feed(request.model)
    feed(repr(request.temperature))
    for msg in request.messages:
        feed(msg.role.value)
        feed(msg.content)
    return h.hexdigest()


class ChatBackend:
    """Interface: complete(request) returns one assistant content string."""

    def complete(self, request: ChatRequest) -> str:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# HTTP
# ---------------------------------------------------------------------------

class HttpBackend(ChatBackend):
    """OpenAI-compatible chat-completions client with bounded retries.

    Retries 429, 5xx, and transport-level failures with backoff 0.5/1/2 s
    (each +/-20% jitter), then raises TransportError. Other 4xx statuses are
    terminal ApiErrors and are never retried. ``sleep`` and ``rng`` exist so
    tests can run the policy without wall-clock delays.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str,
        timeout_s: float = 60.0,
        sleep: Callable[[float], None] = time.sleep,
        rng: Callable[[], float] = random.random,
        session: Optional[requests.Session] = None,
    ):
        if not base_url:
            raise ConfigError("base_url must be non-empty")
        self._url = base_url.rstrip("/") + "/chat/completions"
        self._headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
        self._timeout_s = timeout_s
        self._sleep = sleep
        self._rng = rng
        self._session = session or requests.Session()

    @classmethod
    def from_env(cls, environ: Mapping[str, str] = os.environ, **kwargs) -> "HttpBackend":
        base_url = environ.get(ENV_BASE_URL)
        api_key = environ.get(ENV_API_KEY)
        if not base_url:
            raise ConfigError(f"{ENV_BASE_URL} is not set")
        if not api_key:
            raise ConfigError(f"{ENV_API_KEY} is not set")
        return cls(base_url, api_key, **kwargs)

    def complete(self, request: ChatRequest) -> str:
        request.validate()
        body = {
            "model": request.model,
            "messages": [{"role": m.role.value, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
        }
        last_failure = "no attempt made"
        for attempt in range(1 + len(RETRY_BACKOFF_S)):
            if attempt:
                base = RETRY_BACKOFF_S[attempt - 1]
                self._sleep(base * (1.0 + JITTER_FRACTION * (2.0 * self._rng() - 1.0)))
            try:
                resp = self._session.post(
                    self._url, json=body, headers=self._headers, timeout=self._timeout_s
                )
            except requests.RequestException as exc:
                last_failure = f"transport failure: {exc}"
                continue
            if resp.status_code in RETRYABLE_STATUSES:
                last_failure = f"HTTP {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise ApiError(resp.status_code, resp.text[:200])
            return self._extract_content(resp)
        raise TransportError(f"giving up after {1 + len(RETRY_BACKOFF_S)} attempts: {last_failure}")

    @staticmethod
    def _extract_content(resp: requests.Response) -> str:
        try:
            doc = resp.json()
            content = doc["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise ApiError(resp.status_code, f"malformed completion payload: {resp.text[:160]}") from exc
        if not isinstance(content, str) or not content:
            raise EmptyCompletion("backend returned an empty assistant message")
        return content


# ---------------------------------------------------------------------------
# cassettes
# ---------------------------------------------------------------------------

class CassetteMode(Enum):
    RECORD = "record"
    REPLAY = "replay"


class CassetteBackend(ChatBackend):
    """Record/replay keyed by fingerprint, not call order.

    Record mode is a write-through cache around ``inner``: a fingerprint
    already present is served from the cassette without touching the inner
    backend, which keeps fingerprints unique and makes record-then-replay
    byte-identical even when sessions repeat requests.
    """

    def __init__(self, path, mode: CassetteMode, inner: Optional[ChatBackend] = None):
        self._path = Path(path)
        self._mode = mode
        self._inner = inner
        self._lock = threading.Lock()
        if mode is CassetteMode.RECORD and inner is None:
            raise ConfigError("record mode needs an inner backend to record from")
        self._entries: dict[str, str] = {}
        if self._path.exists():
            self._load()
        elif mode is CassetteMode.REPLAY:
            raise IoError(f"cassette {self._path} does not exist")

    def _load(self) -> None:
        try:
            text = self._path.read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot read cassette {self._path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                fp, response = obj["fingerprint"], obj["response"]
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(f"bad cassette entry: {exc}", line=lineno) from exc
            if fp in self._entries:
                raise ParseError(f"duplicate fingerprint {fp}", line=lineno)
            self._entries[fp] = response

    def __len__(self) -> int:
        return len(self._entries)

    def complete(self, request: ChatRequest) -> str:
        fp = fingerprint(request)
        with self._lock:
            if fp in self._entries:
                return self._entries[fp]
            if self._mode is CassetteMode.REPLAY:
                raise ReplayMiss(fp)
        assert self._inner is not None
        response = self._inner.complete(request)
        with self._lock:
            if fp not in self._entries:
                self._entries[fp] = response
                line = json.dumps({"fingerprint": fp, "response": response}) + "\n"
                try:
                    with self._path.open("a", encoding="utf-8") as f:
                        f.write(line)
                except OSError as exc:
                    raise IoError(f"cannot append to cassette {self._path}: {exc}") from exc
        return response


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

PHASE_MARKER_RE = re.compile(r"<!--phase:(summary|analysis|action|single|single_cot)-->")
MACHINE_MARKER_RE = re.compile(r"<!--machine:([^>]+)-->")
SUMMARY_BLOCK_RE = re.compile(
    r"---BEGIN DATA SUMMARY---\n(.*?)---END DATA SUMMARY---", re.DOTALL
)

ORACLE_CONFIDENCE = "0.95"

_RATIONALE = {
    FaultLabel.NORMAL: (
        "Vibration statistics sit at the noise floor and the temperature trend is flat, "
        "matching a healthy baseline."
    ),
    FaultLabel.MISALIGNMENT: (
        "The tone magnitude at twice the rotation frequency dominates the fundamental, "
        "the classic twice-per-revolution signature."
    ),
    FaultLabel.BEARING_WEAR: (
        "Elevated excess kurtosis from repeated sharp impacts points to localized surface "
        "damage in a rolling element."
    ),
    FaultLabel.OVERHEATING: (
        "The temperature ramp is sustained and the final-quartile mean is well above the "
        "healthy operating band, consistent with progressive heat buildup."
    ),
}

_ACTIONS = {
    FaultLabel.NORMAL: (
        "1. Continue routine monitoring at the current cadence.\n"
        "2. Keep the lubrication schedule unchanged."
    ),
    FaultLabel.MISALIGNMENT: (
        "1. Stop the machine and perform a laser shaft alignment.\n"
        "2. Inspect and re-torque the coupling bolts.\n"
        "3. Recheck the tone at twice rotation frequency after restart."
    ),
    FaultLabel.BEARING_WEAR: (
        "1. Schedule downtime to replace bearing at the drive end.\n"
        "2. Flush and regrease the housing after the swap.\n"
        "3. Trend kurtosis daily until the work is complete."
    ),
    FaultLabel.OVERHEATING: (
        "1. Reduce load and verify coolant flow immediately.\n"
        "2. Clean the heat exchanger fins and check fan operation.\n"
        "3. Alarm if the temperature slope stays above 2 degC/hour."
    ),
}


class OracleBackend(ChatBackend):
    """Deterministic stand-in for a live model.

    Stateless between calls: each prompt carries a phase marker and a machine
    marker, and the label map fixes this backend's diagnosis per machine.
    """

    def __init__(self, labels: Mapping[str, FaultLabel]):
        self._labels = dict(labels)

    @classmethod
    def for_dataset(cls, records) -> "OracleBackend":
        from .synthgen import oracle_diagnose  # runtime import, avoids a module cycle

        return cls({r.machine_id: oracle_diagnose(r) for r in records})

    def _resolve(self, request: ChatRequest) -> tuple[str, str, str]:
        """(phase, machine_id, last user content) from the request."""
        request.validate()
        user_contents = [m.content for m in request.messages if m.role is Role.USER]
        if not user_contents:
            raise UnknownPhaseMarker("request contains no user message")
        last = user_contents[-1]
        phase_match = PHASE_MARKER_RE.search(last)
        if phase_match is None:
            raise UnknownPhaseMarker("no phase marker in the latest user message")
        joined = "\n".join(user_contents)
        machine_match = MACHINE_MARKER_RE.search(joined)
        if machine_match is None:
            raise UnknownPhaseMarker("no machine marker in any user message")
        return phase_match.group(1), machine_match.group(1), joined

    def complete(self, request: ChatRequest) -> str:
        phase, machine_id, user_text = self._resolve(request)
        label = self._labels.get(machine_id)
        if label is None:
            raise UnknownPhaseMarker(f"machine marker names unknown machine {machine_id!r}")

        if phase == "summary":
            block_match = SUMMARY_BLOCK_RE.search(user_text)
            block = block_match.group(1).strip() if block_match else "no data block was provided"
            return "Key patterns restated from the provided data:\n\n" + block
        fault_line = f"FAULT: {label.value} | CONFIDENCE: {ORACLE_CONFIDENCE}"
        if phase == "analysis":
            return f"{_RATIONALE[label]}\n\n{fault_line}"
        if phase == "action":
            return _ACTIONS[label]
        if phase == "single_cot":
            return (
                "Working through the evidence step by step:\n"
                f"{_RATIONALE[label]}\n\n"
                f"Recommended actions:\n{_ACTIONS[label]}\n\n{fault_line}"
            )
        return (
            f"{_RATIONALE[label]}\n\n"
            f"Recommended actions:\n{_ACTIONS[label]}\n\n{fault_line}"
        )
