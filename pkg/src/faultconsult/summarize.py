"""Deterministic feature extraction for sensor series and the summary text
block that the consultation prompts embed.

Conventions (fixed, tested): population moments (divide by n), excess
kurtosis m4/m2^2 - 3 with the degenerate std = 0 case defined as 0, slope via
closed-form least squares over hours-since-start, anomalies counted at
|z| > 3 against the series' own mean/std, and single-tone magnitudes via the
Goertzel recurrence (no FFT dependency).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .domain import Channel, MachineRecord, MaintenanceEvent, SensorSeries
from .errors import FrequencyOutOfRange, MissingRotationFrequency

Z_THRESHOLD = 3.0


@dataclass(frozen=True)
class SeriesSummary:
    n: int
    mean: float
    std: float
    rms: float
    excess_kurtosis: float
    min: float
    max: float
    slope_per_hour: float
    anomaly_count: int
    tone_mag_f0: Optional[float] = None
    tone_mag_2f0: Optional[float] = None


def goertzel_magnitude(values: Sequence[float], sample_rate_hz: float, target_freq_hz: float) -> float:
    """|sum x[k] exp(-2 pi i f k / fs)| via the single-bin Goertzel recurrence.

    For a pure sinusoid of amplitude A spanning an integer number of cycles
    over N samples this equals A*N/2.
    """
    if not 0.0 < target_freq_hz < sample_rate_hz / 2.0:
        raise FrequencyOutOfRange(
            f"target frequency {target_freq_hz} Hz must lie in (0, {sample_rate_hz / 2.0}) Hz"
        )
    w = 2.0 * math.pi * target_freq_hz / sample_rate_hz
    coeff = 2.0 * math.cos(w)
    s1 = 0.0
    s2 = 0.0
    for x in values:
        s1, s2 = x + coeff * s1 - s2, s1
    mag_sq = s1 * s1 + s2 * s2 - coeff * s1 * s2
    return math.sqrt(max(mag_sq, 0.0))


def linear_slope_per_hour(values: Sequence[float], sample_rate_hz: float) -> float:
    """Least-squares slope of value against hours-since-start (closed form)."""
    x = np.asarray(values, dtype=np.float64)
    t = np.arange(len(x), dtype=np.float64) / (sample_rate_hz * 3600.0)
    tc = t - t.mean()
    denom = float(np.dot(tc, tc))
    if denom == 0.0:
        return 0.0
    return float(np.dot(tc, x - x.mean()) / denom)


def summarize_series(series: SensorSeries, rotation_freq_hz: Optional[float] = None) -> SeriesSummary:
    """Compute the fixed statistical summary of one sensor series.

    Vibration series additionally get Goertzel magnitudes at the rotation
    frequency and its double, so `rotation_freq_hz` is mandatory for them.
    """
    if series.channel is Channel.VIBRATION and rotation_freq_hz is None:
        raise MissingRotationFrequency("vibration series require rotation_freq_hz for tone magnitudes")

    x = np.asarray(series.values, dtype=np.float64)
    n = len(x)
    mean = float(x.mean())
    d = x - mean
    m2 = float(np.mean(d * d))
    std = math.sqrt(m2)
    rms = math.sqrt(float(np.mean(x * x)))
    if std == 0.0:
        kurtosis = 0.0
        anomalies = 0
    else:
        # normalize before the 4th power: m2*m2 under/overflows for extreme scales
        z = d / std
        kurtosis = float(np.mean(z ** 4)) - 3.0
        anomalies = int(np.count_nonzero(np.abs(z) > Z_THRESHOLD))

    tone_f0 = tone_2f0 = None
    if series.channel is Channel.VIBRATION:
        assert rotation_freq_hz is not None
        tone_f0 = goertzel_magnitude(series.values, series.sample_rate_hz, rotation_freq_hz)
        tone_2f0 = goertzel_magnitude(series.values, series.sample_rate_hz, 2.0 * rotation_freq_hz)

    return SeriesSummary(
        n=n,
        mean=mean,
        std=std,
        rms=rms,
        excess_kurtosis=kurtosis,
        min=float(x.min()),
        max=float(x.max()),
        slope_per_hour=linear_slope_per_hour(series.values, series.sample_rate_hz),
        anomaly_count=anomalies,
        tone_mag_f0=tone_f0,
        tone_mag_2f0=tone_2f0,
    )


def summarize_machine(machine: MachineRecord) -> list[SeriesSummary]:
    """One summary per series, in record order."""
    return [summarize_series(s, machine.rotation_freq_hz) for s in machine.series]


# ---------------------------------------------------------------------------
# text rendering
# ---------------------------------------------------------------------------

def _sig(v: float) -> str:
    return f"{v:.6g}"


def _sig_signed(v: float) -> str:
    return f"{v:+.6g}"


def _ts(dt) -> str:
    from .ingest import format_rfc3339  # local import to avoid a cycle

    return format_rfc3339(dt)


def render_summary_text(machine: MachineRecord, summaries: Sequence[SeriesSummary]) -> str:
    """Byte-deterministic text block: per-series statistics (vibration first,
    then temperature) followed by up to 5 most recent maintenance events."""
    if len(summaries) != len(machine.series):
        raise ValueError("need exactly one summary per series")

    pairs = list(zip(machine.series, summaries))
    ordered = [p for p in pairs if p[0].channel is Channel.VIBRATION] + [
        p for p in pairs if p[0].channel is Channel.TEMPERATURE
    ]

    lines: list[str] = []
    lines.append(f"=== data summary: machine {machine.machine_id} ({machine.machine_type}) ===")
    lines.append(f"rotation frequency: {_sig(machine.rotation_freq_hz)} Hz")
    for idx, (series, s) in enumerate(ordered, start=1):
        ch = series.channel.value
        unit = series.unit
        lines.append("")
        lines.append(
            f"[series {idx}: {ch}, {s.n} samples @ {_sig(series.sample_rate_hz)} Hz, start {_ts(series.start_time)}]"
        )
        lines.append(f"{ch} mean: {_sig_signed(s.mean)} {unit}")
        lines.append(f"{ch} std: {_sig(s.std)} {unit}")
        lines.append(f"{ch} rms: {_sig(s.rms)} {unit}")
        lines.append(f"{ch} min: {_sig_signed(s.min)} {unit}")
        lines.append(f"{ch} max: {_sig_signed(s.max)} {unit}")
        lines.append(f"{ch} excess kurtosis: {_sig_signed(s.excess_kurtosis)}")
        lines.append(f"{ch} slope: {_sig_signed(s.slope_per_hour)} {unit}/hour")
        lines.append(f"{ch} anomaly count (|z|>3): {s.anomaly_count}")
        if s.tone_mag_f0 is not None:
            f0 = machine.rotation_freq_hz
            lines.append(f"{ch} tone magnitude @ {_sig(f0)} Hz: {_sig(s.tone_mag_f0)}")
            lines.append(f"{ch} tone magnitude @ {_sig(2 * f0)} Hz: {_sig(s.tone_mag_2f0)}")
    lines.append("")
    lines.append("[maintenance events: most recent first, up to 5]")
    events: list[MaintenanceEvent] = sorted(machine.maintenance, key=lambda e: e.timestamp, reverse=True)[:5]
    if not events:
        lines.append("none recorded")
    else:
        for ev in events:
            lines.append(f"- {_ts(ev.timestamp)} [{ev.category.value}] {ev.text}")
    return "\n".join(lines) + "\n"
