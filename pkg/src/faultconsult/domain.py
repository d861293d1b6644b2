"""Core vocabulary: fault taxonomy, sensor/machine types, label normalization.

All types here are frozen dataclasses or enums; they are immutable after
construction and safe to share between threads.  Constructors deliberately do
NOT validate, so tests can build invalid records; ``validate_machine_record``
reports violations as data.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Optional, Sequence


class FaultLabel(Enum):
    NORMAL = "normal"
    MISALIGNMENT = "misalignment"
    BEARING_WEAR = "bearing_wear"
    OVERHEATING = "overheating"
    UNKNOWN = "unknown"

    def serialize(self) -> str:
        return self.value


#: The three fault classes the per-fault accuracy table reports on.
FAULT_CLASSES = (FaultLabel.MISALIGNMENT, FaultLabel.BEARING_WEAR, FaultLabel.OVERHEATING)

#: Classes a gold label may take (everything except `unknown`).
GOLD_CLASSES = (FaultLabel.NORMAL,) + FAULT_CLASSES


class Channel(Enum):
    VIBRATION = "vibration"
    TEMPERATURE = "temperature"


#: Required unit per channel ("g" for vibration, "degC" for temperature).
CHANNEL_UNITS = {Channel.VIBRATION: "g", Channel.TEMPERATURE: "degC"}


class MaintenanceCategory(Enum):
    INSPECTION = "inspection"
    REPAIR = "repair"
    REPLACEMENT = "replacement"
    NOTE = "note"


@dataclass(frozen=True)
class SensorSeries:
    channel: Channel
    unit: str
    sample_rate_hz: float
    start_time: datetime
    values: tuple[float, ...]

    @property
    def duration_s(self) -> float:
        return len(self.values) / self.sample_rate_hz


@dataclass(frozen=True)
class MaintenanceEvent:
    timestamp: datetime
    category: MaintenanceCategory
    text: str


@dataclass(frozen=True)
class MachineRecord:
    machine_id: str
    machine_type: str
    rotation_freq_hz: float
    series: tuple[SensorSeries, ...]
    maintenance: tuple[MaintenanceEvent, ...] = ()
    gold_label: Optional[FaultLabel] = None

    def series_for(self, channel: Channel) -> tuple[SensorSeries, ...]:
        return tuple(s for s in self.series if s.channel is channel)


# ---------------------------------------------------------------------------
# label parsing
# ---------------------------------------------------------------------------

# Fixed, versioned in code: determinism of the accuracy metric depends on this
# table never being configurable.  Priority is severity-based so multi-match
# text resolves conservatively.
_SYNONYMS: dict[FaultLabel, tuple[str, ...]] = {
    FaultLabel.OVERHEATING: ("overheating", "overheat", "thermal runaway", "excessive temperature"),
    FaultLabel.BEARING_WEAR: ("bearing wear", "bearing_wear", "bearing degradation", "worn bearing"),
    FaultLabel.MISALIGNMENT: ("misalignment", "misaligned", "shaft misalignment"),
    FaultLabel.NORMAL: ("normal", "healthy", "no fault", "ok"),
}

_PRIORITY = (FaultLabel.OVERHEATING, FaultLabel.BEARING_WEAR, FaultLabel.MISALIGNMENT, FaultLabel.NORMAL)

_WORD_RE = re.compile(r"[a-z]+")


def _normalize(text: str) -> str:
    return " ".join(text.lower().replace("_", " ").split())


def parse_fault_label(text: str) -> FaultLabel:
    """Map free text onto the taxonomy; total, falling back to `unknown`.

    Matching is case-insensitive and whitespace/underscore-insensitive against
    the canonical tokens plus a fixed synonym table, checked in severity order
    (overheating > bearing_wear > misalignment > normal).
    """
    norm = _normalize(text)
    for label in _PRIORITY:
        if norm == label.value.replace("_", " "):
            return label
        if norm in (_normalize(s) for s in _SYNONYMS[label]):
            return label
    return FaultLabel.UNKNOWN


def scan_for_fault_label(text: str) -> FaultLabel:
    """Loose word-bag scan of free text, used as a last-resort fallback.

    A synonym matches when all of its words occur somewhere in the text
    ("the bearing is badly worn" hits "worn bearing").  Classes are tried in
    the same severity order as :func:`parse_fault_label`.
    """
    words = set(_WORD_RE.findall(text.lower()))
    for label in _PRIORITY:
        candidates = (label.value,) + _SYNONYMS[label]
        for phrase in candidates:
            needed = _WORD_RE.findall(phrase.lower())
            if needed and all(w in words for w in needed):
                return label
    return FaultLabel.UNKNOWN


# ---------------------------------------------------------------------------
# record validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    path: str = ""


def _check_series(s: SensorSeries, path: str, out: list[Violation]) -> None:
    if not isinstance(s.sample_rate_hz, (int, float)) or not s.sample_rate_hz > 0:
        out.append(Violation("NonPositiveSampleRate", f"sample_rate_hz must be > 0, got {s.sample_rate_hz}", path))
    if len(s.values) < 2:
        out.append(Violation("TooShort", f"series needs at least 2 samples, got {len(s.values)}", path))
    for i, v in enumerate(s.values):
        if not math.isfinite(v):
            out.append(Violation("NonFiniteValue", f"non-finite sample {v!r}", f"{path}.values[{i}]"))
            break
    expected = CHANNEL_UNITS[s.channel]
    if s.unit != expected:
        out.append(Violation("UnitChannelMismatch", f"channel {s.channel.value} requires unit {expected!r}, got {s.unit!r}", path))


def validate_machine_record(record: MachineRecord) -> list[Violation]:
    """Return every violated invariant; an empty list means the record is valid."""
    out: list[Violation] = []
    if not record.machine_id:
        out.append(Violation("EmptyMachineId", "machine_id must be non-empty", "machine_id"))
    if not record.rotation_freq_hz > 0:
        out.append(Violation("NonPositiveRotationFrequency", f"rotation_freq_hz must be > 0, got {record.rotation_freq_hz}", "rotation_freq_hz"))
    if record.gold_label is FaultLabel.UNKNOWN:
        out.append(Violation("GoldLabelUnknown", "gold_label may never be `unknown`", "gold_label"))
    if not record.series:
        out.append(Violation("NoSeries", "record must contain at least one series", "series"))
    else:
        channels = {s.channel for s in record.series}
        if Channel.VIBRATION not in channels:
            out.append(Violation("MissingVibrationSeries", "record needs at least one vibration series", "series"))
        if Channel.TEMPERATURE not in channels:
            out.append(Violation("MissingTemperatureSeries", "record needs at least one temperature series", "series"))
        for i, s in enumerate(record.series):
            _check_series(s, f"series[{i}]", out)
    for i, ev in enumerate(record.maintenance):
        if not ev.text:
            out.append(Violation("EmptyText", "maintenance event text must be non-empty", f"maintenance[{i}]"))
    return out
