"""Synthetic machine data with class-specific fault signatures, plus the
rule-based oracle diagnoser that is correct on generated data by construction.

Every signature clears its oracle threshold with at least a 2x margin over
the noise floor, so seeded generation followed by oracle_diagnose recovers the
generation class deterministically. Streams come from the counter-based
generator in faultconsult.rng, so output is independent of generation order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from . import rng
from .domain import (
    GOLD_CLASSES,
    Channel,
    FaultLabel,
    MachineRecord,
    MaintenanceCategory,
    MaintenanceEvent,
    SensorSeries,
)
from .errors import ConfigInvalid, IoError
from .ingest import DatasetManifest, format_rfc3339, load_manifest
from .summarize import goertzel_magnitude, linear_slope_per_hour, summarize_series

START_TIME = datetime(2024, 1, 1, tzinfo=timezone.utc)

VIB_TONE_AMP = 0.10
VIB_NOISE_STD = 0.05
MISALIGNMENT_HARMONIC_AMP = 0.30
IMPULSE_FRACTION = 0.01
IMPULSE_AMP = 1.0
TEMP_BASE_C = 40.0
TEMP_NOISE_STD = 0.3
OVERHEAT_RAMP_C_PER_HOUR = 8.0

# oracle thresholds
SLOPE_THRESHOLD_C_PER_HOUR = 2.0
FINAL_QUARTILE_TEMP_C = 45.0
KURTOSIS_THRESHOLD = 3.0
TONE_RATIO_THRESHOLD = 1.5

# sub-stream tags (arbitrary distinct constants)
_TAG_VIB_NOISE = 0x01
_TAG_TEMP_NOISE = 0x02
_TAG_IMPULSES = 0x03


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    n_per_class: int
    duration_s: float = 8.0
    vib_rate_hz: float = 256.0
    temp_rate_hz: float = 1.0
    rotation_freq_hz: float = 10.0
    # Temperature logs span hours, not seconds: the overheating ramp and the
    # slope rule operate on degC-per-hour scales, so the temperature window is
    # independent of the short vibration capture.
    temp_duration_s: float = 7200.0

    def validate(self) -> None:
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigInvalid("seed must fit in 64 unsigned bits")
        if self.n_per_class <= 0:
            raise ConfigInvalid("n_per_class must be positive")
        for name in ("duration_s", "vib_rate_hz", "temp_rate_hz", "rotation_freq_hz", "temp_duration_s"):
            if getattr(self, name) <= 0:
                raise ConfigInvalid(f"{name} must be positive")
        if not 2.0 * self.rotation_freq_hz < self.vib_rate_hz / 2.0:
            raise ConfigInvalid("rotation frequency and its double must lie below Nyquist")
        cycles = self.duration_s * self.rotation_freq_hz
        if abs(cycles - round(cycles)) > 1e-9:
            raise ConfigInvalid("duration_s x rotation_freq_hz must be a whole number of cycles")


_MACHINE_TYPES = ("pump", "fan", "compressor", "conveyor")

# Canned maintenance text avoids every fault-label synonym so a model echoing
# it cannot trip the word-bag fallback in diagnosis extraction.
_MAINTENANCE_TEXT = {
    FaultLabel.NORMAL: (
        "Routine inspection completed; all readings within tolerance.",
        "Scheduled lubrication service performed.",
    ),
    FaultLabel.MISALIGNMENT: (
        "Coupling guard rattles at speed; laser shaft survey requested.",
        "Slight edge drift noted on the belt during the last run-up.",
    ),
    FaultLabel.BEARING_WEAR: (
        "Audible ticking near the drive end under load.",
        "Grease sample shows metal particles; sampling moved to weekly.",
    ),
    FaultLabel.OVERHEATING: (
        "Housing warm to the touch after extended runs.",
        "Cooling fan belt replaced during the last outage.",
    ),
}

_MAINTENANCE_OFFSETS = (timedelta(days=-14), timedelta(days=-3))
_MAINTENANCE_CATEGORIES = (MaintenanceCategory.INSPECTION, MaintenanceCategory.NOTE)


def _vibration(seed: int, fault: FaultLabel, config: SynthConfig) -> SensorSeries:
    n = round(config.duration_s * config.vib_rate_hz)
    t = np.arange(n, dtype=np.float64) / config.vib_rate_hz
    f0 = config.rotation_freq_hz
    x = VIB_TONE_AMP * np.sin(2.0 * math.pi * f0 * t)
    x += VIB_NOISE_STD * rng.gaussians(rng.derive(seed, _TAG_VIB_NOISE), n)
    if fault is FaultLabel.MISALIGNMENT:
        x += MISALIGNMENT_HARMONIC_AMP * np.sin(2.0 * math.pi * 2.0 * f0 * t)
    elif fault is FaultLabel.BEARING_WEAR:
        k = max(1, round(IMPULSE_FRACTION * n))
        # A uniform random k-subset: indices of the k smallest draws.
        u = rng.uniforms(rng.derive(seed, _TAG_IMPULSES), n)
        positions = np.sort(np.argsort(u)[:k])
        signs = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
        x[positions] += IMPULSE_AMP * signs
    return SensorSeries(
        channel=Channel.VIBRATION,
        unit="g",
        sample_rate_hz=config.vib_rate_hz,
        start_time=START_TIME,
        values=tuple(float(v) for v in x),
    )


def _temperature(seed: int, fault: FaultLabel, config: SynthConfig) -> SensorSeries:
    n = round(config.temp_duration_s * config.temp_rate_hz)
    x = TEMP_BASE_C + TEMP_NOISE_STD * rng.gaussians(rng.derive(seed, _TAG_TEMP_NOISE), n)
    if fault is FaultLabel.OVERHEATING:
        hours = np.arange(n, dtype=np.float64) / (config.temp_rate_hz * 3600.0)
        x += OVERHEAT_RAMP_C_PER_HOUR * hours
    return SensorSeries(
        channel=Channel.TEMPERATURE,
        unit="degC",
        sample_rate_hz=config.temp_rate_hz,
        start_time=START_TIME,
        values=tuple(float(v) for v in x),
    )


def generate_machine(seed: int, fault: FaultLabel, config: SynthConfig) -> MachineRecord:
    """Deterministic machine record for (seed, fault, config)."""
    if fault not in GOLD_CLASSES:
        raise ConfigInvalid(f"cannot generate class {fault!r}")
    config.validate()
    maintenance = tuple(
        MaintenanceEvent(timestamp=START_TIME + off, category=cat, text=text)
        for off, cat, text in zip(_MAINTENANCE_OFFSETS, _MAINTENANCE_CATEGORIES, _MAINTENANCE_TEXT[fault])
    )
    return MachineRecord(
        machine_id=f"m-{seed}",
        machine_type=_MACHINE_TYPES[rng.mix64(seed) % 4],
        rotation_freq_hz=config.rotation_freq_hz,
        series=(_vibration(seed, fault, config), _temperature(seed, fault, config)),
        maintenance=maintenance,
        gold_label=fault,
    )


def generate_dataset(config: SynthConfig) -> list[MachineRecord]:
    """4 x n_per_class machines, classes interleaved, ids m-0000, m-0001, ..."""
    config.validate()
    records = []
    for i in range(4 * config.n_per_class):
        fault = GOLD_CLASSES[i % 4]
        sub_seed = rng.derive(config.seed, i)
        record = generate_machine(sub_seed, fault, config)
        records.append(replace(record, machine_id=f"m-{i:04d}"))
    return records


def oracle_diagnose(record: MachineRecord) -> FaultLabel:
    """Rule-based label, evaluated in fixed priority order; never unknown."""
    temps = record.series_for(Channel.TEMPERATURE)
    vibs = record.series_for(Channel.VIBRATION)
    if temps:
        t = temps[0]
        slope = linear_slope_per_hour(t.values, t.sample_rate_hz)
        final_quartile = t.values[3 * len(t.values) // 4 :]
        if slope > SLOPE_THRESHOLD_C_PER_HOUR and float(np.mean(final_quartile)) > FINAL_QUARTILE_TEMP_C:
            return FaultLabel.OVERHEATING
    if vibs:
        s = summarize_series(vibs[0], record.rotation_freq_hz)
        if s.excess_kurtosis > KURTOSIS_THRESHOLD:
            return FaultLabel.BEARING_WEAR
        assert s.tone_mag_f0 is not None and s.tone_mag_2f0 is not None
        if s.tone_mag_2f0 > TONE_RATIO_THRESHOLD * s.tone_mag_f0:
            return FaultLabel.MISALIGNMENT
    return FaultLabel.NORMAL


def write_dataset(records, out_dir) -> DatasetManifest:
    """Persist records in the loader's file formats; floats round-trip
    bit-equal via repr."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        manifest_machines = []
        for record in records:
            machine_dir = out / record.machine_id
            machine_dir.mkdir(exist_ok=True)
            sensor_entries = []
            for pos, series in enumerate(record.series, start=1):
                rel = f"{record.machine_id}/{series.channel.value}-{pos}.csv"
                lines = ["timestamp,value"]
                for i, v in enumerate(series.values):
                    ts = series.start_time + timedelta(seconds=i / series.sample_rate_hz)
                    lines.append(f"{format_rfc3339(ts)},{v!r}")
                (out / rel).write_text("\n".join(lines) + "\n", encoding="utf-8")
                sensor_entries.append(
                    {
                        "path": rel,
                        "channel": series.channel.value,
                        "sample_rate_hz": series.sample_rate_hz,
                        "start_time": format_rfc3339(series.start_time),
                    }
                )
            maint_rel = f"{record.machine_id}/maintenance.jsonl"
            maint_lines = [
                json.dumps(
                    {
                        "timestamp": format_rfc3339(ev.timestamp),
                        "category": ev.category.value,
                        "text": ev.text,
                    }
                )
                for ev in record.maintenance
            ]
            (out / maint_rel).write_text(
                "".join(line + "\n" for line in maint_lines), encoding="utf-8"
            )
            entry = {
                "machine_id": record.machine_id,
                "machine_type": record.machine_type,
                "rotation_freq_hz": record.rotation_freq_hz,
                "sensor_files": sensor_entries,
                "maintenance_file": maint_rel,
            }
            if record.gold_label is not None:
                entry["gold_label"] = record.gold_label.value
            manifest_machines.append(entry)
        manifest_path = out / "manifest.json"
        manifest_path.write_text(
            json.dumps({"version": 1, "machines": manifest_machines}, indent=2) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise IoError(f"cannot write dataset under {out}: {exc}") from exc
    return load_manifest(manifest_path)
