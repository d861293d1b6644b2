"""Dataset loading: one JSON manifest per dataset, CSV sensor streams, and
JSON Lines maintenance logs.

Parsers are total: any malformed input surfaces as a typed DataError with a
1-based line number where one makes sense, never as a raw exception. Per-series
metadata (channel, sample rate, start time) lives in the manifest so each
value has a single source of truth; sensor CSVs carry only timestamped values.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .domain import (
    CHANNEL_UNITS,
    GOLD_CLASSES,
    Channel,
    MachineRecord,
    MaintenanceCategory,
    MaintenanceEvent,
    SensorSeries,
    parse_fault_label,
    validate_machine_record,
)
from .errors import (
    DuplicateMachineId,
    EmptyText,
    GoldLabelUnknown,
    IoError,
    NonFiniteValue,
    NonMonotonicTimestamps,
    ParseError,
    RecordInvalid,
    TooShort,
    UnknownVersion,
)

MANIFEST_VERSION = 1
SENSOR_CSV_HEADER = "timestamp,value"


def parse_rfc3339(text: str) -> datetime:
    """RFC 3339 timestamp to an aware UTC datetime. Raises ValueError."""
    # Python 3.10's fromisoformat does not accept a trailing Z.
    normalized = text.strip()
    if normalized.endswith(("Z", "z")):
        normalized = normalized[:-1] + "+00:00"
    dt = datetime.fromisoformat(normalized)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp {text!r} lacks a UTC offset")
    return dt.astimezone(timezone.utc)


def format_rfc3339(dt: datetime) -> str:
    """Inverse of parse_rfc3339; always renders UTC with a Z suffix."""
    dt = dt.astimezone(timezone.utc)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class SensorFileEntry:
    path: str
    channel: Channel
    sample_rate_hz: float
    start_time: datetime


@dataclass(frozen=True)
class ManifestMachine:
    machine_id: str
    machine_type: str
    rotation_freq_hz: float
    gold_label: Optional[str]
    sensor_files: tuple[SensorFileEntry, ...]
    maintenance_file: Optional[str]


@dataclass(frozen=True)
class DatasetManifest:
    version: int
    machines: tuple[ManifestMachine, ...]
    root: Path  # directory all relative paths resolve against


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise ParseError(f"{context}: missing key {key!r}")
    return obj[key]


def _parse_sensor_entry(raw, context: str) -> SensorFileEntry:
    if not isinstance(raw, dict):
        raise ParseError(f"{context}: sensor file entry must be an object")
    path = _require(raw, "path", context)
    channel_token = _require(raw, "channel", context)
    try:
        channel = Channel(channel_token)
    except ValueError:
        raise ParseError(f"{context}: unknown channel {channel_token!r}") from None
    rate = _require(raw, "sample_rate_hz", context)
    if not isinstance(rate, (int, float)) or not rate > 0:
        raise ParseError(f"{context}: sample_rate_hz must be a positive number")
    start_raw = _require(raw, "start_time", context)
    try:
        start = parse_rfc3339(start_raw)
    except (ValueError, TypeError, AttributeError):
        raise ParseError(f"{context}: bad start_time {start_raw!r}") from None
    return SensorFileEntry(path=str(path), channel=channel, sample_rate_hz=float(rate), start_time=start)


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read manifest {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise ParseError("manifest root must be a JSON object")
    version = _require(doc, "version", "manifest")
    if not isinstance(version, int) or isinstance(version, bool):
        raise ParseError("manifest version must be an integer")
    if version != MANIFEST_VERSION:
        raise UnknownVersion(f"unsupported manifest version {version} (expected {MANIFEST_VERSION})")
    raw_machines = _require(doc, "machines", "manifest")
    if not isinstance(raw_machines, list):
        raise ParseError("manifest machines must be an array")

    machines: list[ManifestMachine] = []
    seen: set[str] = set()
    for i, raw in enumerate(raw_machines):
        ctx = f"machines[{i}]"
        if not isinstance(raw, dict):
            raise ParseError(f"{ctx}: machine entry must be an object")
        machine_id = _require(raw, "machine_id", ctx)
        if not isinstance(machine_id, str) or not machine_id:
            raise ParseError(f"{ctx}: machine_id must be a non-empty string")
        if machine_id in seen:
            raise DuplicateMachineId(f"machine_id {machine_id!r} appears more than once")
        seen.add(machine_id)
        machine_type = _require(raw, "machine_type", ctx)
        freq = _require(raw, "rotation_freq_hz", ctx)
        if not isinstance(freq, (int, float)) or not freq > 0:
            raise ParseError(f"{ctx}: rotation_freq_hz must be a positive number")
        gold = raw.get("gold_label")
        if gold is not None and not isinstance(gold, str):
            raise ParseError(f"{ctx}: gold_label must be a string when present")
        raw_files = _require(raw, "sensor_files", ctx)
        if not isinstance(raw_files, list) or not raw_files:
            raise ParseError(f"{ctx}: sensor_files must be a non-empty array")
        entries = tuple(_parse_sensor_entry(e, ctx) for e in raw_files)
        maintenance = raw.get("maintenance_file")
        if maintenance is not None and not isinstance(maintenance, str):
            raise ParseError(f"{ctx}: maintenance_file must be a string when present")
        machines.append(
            ManifestMachine(
                machine_id=machine_id,
                machine_type=str(machine_type),
                rotation_freq_hz=float(freq),
                gold_label=gold,
                sensor_files=entries,
                maintenance_file=maintenance,
            )
        )
    return DatasetManifest(version=version, machines=tuple(machines), root=path.parent)


def parse_sensor_csv(path, channel: Channel, sample_rate_hz: float, start_time: datetime) -> SensorSeries:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read sensor file {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0] != SENSOR_CSV_HEADER:
        raise ParseError(f"expected header {SENSOR_CSV_HEADER!r}", line=1)

    values: list[float] = []
    prev_ts: Optional[datetime] = None
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 comma-separated fields, got {len(parts)}", line=lineno)
        try:
            ts = parse_rfc3339(parts[0])
        except ValueError:
            raise ParseError(f"bad timestamp {parts[0]!r}", line=lineno) from None
        if prev_ts is not None and ts <= prev_ts:
            raise NonMonotonicTimestamps(
                f"timestamp {parts[0]} does not increase", line=lineno
            )
        prev_ts = ts
        try:
            value = float(parts[1])
        except ValueError:
            raise ParseError(f"bad value {parts[1]!r}", line=lineno) from None
        if not math.isfinite(value):
            raise NonFiniteValue(f"non-finite value {parts[1]!r}", line=lineno)
        values.append(value)

    if len(values) < 2:
        raise TooShort(f"sensor series needs at least 2 samples, got {len(values)}")
    return SensorSeries(
        channel=channel,
        unit=CHANNEL_UNITS[channel],
        sample_rate_hz=sample_rate_hz,
        start_time=start_time,
        values=tuple(values),
    )


def parse_maintenance_jsonl(path) -> tuple[MaintenanceEvent, ...]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read maintenance file {path}: {exc}") from exc

    events: list[MaintenanceEvent] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            raise ParseError("blank line in maintenance log", line=lineno)
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
        if not isinstance(obj, dict):
            raise ParseError("maintenance entry must be an object", line=lineno)
        for key in ("timestamp", "category", "text"):
            if key not in obj:
                raise ParseError(f"missing key {key!r}", line=lineno)
        try:
            ts = parse_rfc3339(obj["timestamp"])
        except (ValueError, TypeError, AttributeError):
            raise ParseError(f"bad timestamp {obj['timestamp']!r}", line=lineno) from None
        body = obj["text"]
        if not isinstance(body, str) or not body.strip():
            raise EmptyText("maintenance text must be non-empty", line=lineno)
        try:
            category = MaintenanceCategory(obj["category"])
        except ValueError:
            category = MaintenanceCategory.NOTE  # unknown categories downgrade
        events.append(MaintenanceEvent(timestamp=ts, category=category, text=body))
    events.sort(key=lambda e: e.timestamp)  # stable, so same-time events keep file order
    return tuple(events)


def _load_machine(manifest: DatasetManifest, entry: ManifestMachine) -> MachineRecord:
    gold = None
    if entry.gold_label is not None:
        gold = parse_fault_label(entry.gold_label)
        if gold not in GOLD_CLASSES:
            raise GoldLabelUnknown(
                f"machine {entry.machine_id!r}: gold label token {entry.gold_label!r} is not a known fault class"
            )
    try:
        series = tuple(
            parse_sensor_csv(
                manifest.root / sf.path, sf.channel, sf.sample_rate_hz, sf.start_time
            )
            for sf in entry.sensor_files
        )
        maintenance: tuple[MaintenanceEvent, ...] = ()
        if entry.maintenance_file is not None:
            maintenance = parse_maintenance_jsonl(manifest.root / entry.maintenance_file)
    except (IoError, ParseError) as exc:
        exc.machine_id = entry.machine_id
        if isinstance(exc, IoError):
            raise IoError(f"machine {entry.machine_id!r}: {exc}", machine_id=entry.machine_id) from exc
        raise
    record = MachineRecord(
        machine_id=entry.machine_id,
        machine_type=entry.machine_type,
        rotation_freq_hz=entry.rotation_freq_hz,
        series=series,
        maintenance=maintenance,
        gold_label=gold,
    )
    violations = validate_machine_record(record)
    if violations:
        raise RecordInvalid(entry.machine_id, violations)
    return record


def load_dataset(manifest: DatasetManifest, max_workers: int = 4) -> list[MachineRecord]:
    """Load every machine in the manifest; order follows the manifest even
    though machines load concurrently."""
    if not manifest.machines:
        return []
    with ThreadPoolExecutor(max_workers=min(max_workers, len(manifest.machines))) as pool:
        return list(pool.map(lambda m: _load_machine(manifest, m), manifest.machines))
