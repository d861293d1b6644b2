import json
import math

import numpy as np
import pytest

from faultconsult.domain import Channel, FaultLabel, GOLD_CLASSES, SensorSeries, validate_machine_record
from faultconsult.errors import ConfigInvalid
from faultconsult.ingest import load_dataset
from faultconsult.summarize import goertzel_magnitude, summarize_series
from faultconsult.synthgen import (
    KURTOSIS_THRESHOLD,
    TONE_RATIO_THRESHOLD,
    SLOPE_THRESHOLD_C_PER_HOUR,
    SynthConfig,
    generate_dataset,
    generate_machine,
    oracle_diagnose,
    write_dataset,
)
from reference_stats import ref_excess_kurtosis, ref_slope_per_hour


class TestConfigValidation:
    def test_defaults_are_valid(self):
        SynthConfig(seed=0, n_per_class=1).validate()

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(seed=-1),
            dict(seed=1 << 64),
            dict(n_per_class=0),
            dict(duration_s=0.0),
            dict(vib_rate_hz=-5.0),
            dict(rotation_freq_hz=70.0),  # 2*f0 = 140 >= 256/2
            dict(duration_s=8.05),  # 80.5 cycles is not whole
        ],
    )
    def test_rejects_bad_config(self, kwargs):
        base = dict(seed=0, n_per_class=1)
        base.update(kwargs)
        with pytest.raises(ConfigInvalid):
            SynthConfig(**base).validate()


class TestGenerateMachine:
    def test_deterministic(self, small_config):
        a = generate_machine(5, FaultLabel.MISALIGNMENT, small_config)
        b = generate_machine(5, FaultLabel.MISALIGNMENT, small_config)
        assert a == b

    def test_seeds_differ(self, small_config):
        a = generate_machine(5, FaultLabel.NORMAL, small_config)
        b = generate_machine(6, FaultLabel.NORMAL, small_config)
        av = a.series_for(Channel.VIBRATION)[0].values
        bv = b.series_for(Channel.VIBRATION)[0].values
        assert av != bv

    def test_record_shape(self, small_config):
        m = generate_machine(3, FaultLabel.BEARING_WEAR, small_config)
        assert m.gold_label is FaultLabel.BEARING_WEAR
        assert validate_machine_record(m) == []
        assert len(m.maintenance) == 2
        vib = m.series_for(Channel.VIBRATION)[0]
        assert len(vib.values) == int(small_config.duration_s * small_config.vib_rate_hz)

    def test_unknown_class_rejected(self, small_config):
        with pytest.raises(ConfigInvalid):
            generate_machine(3, FaultLabel.UNKNOWN, small_config)

    def test_overheating_slope_exceeds_threshold(self, small_config):
        m = generate_machine(42, FaultLabel.OVERHEATING, small_config)
        temp = m.series_for(Channel.TEMPERATURE)[0]
        slope = float(ref_slope_per_hour(temp.values, temp.sample_rate_hz))
        assert slope >= SLOPE_THRESHOLD_C_PER_HOUR

    def test_normal_kurtosis_batch(self, small_config):
        for seed in range(50):
            m = generate_machine(seed, FaultLabel.NORMAL, small_config)
            vib = m.series_for(Channel.VIBRATION)[0]
            k = float(ref_excess_kurtosis(vib.values))
            assert -1.0 < k < 1.0, f"seed {seed}: kurtosis {k}"

    def test_misalignment_harmonic_ratio(self, small_config):
        for seed in (0, 1, 2, 17, 99):
            m = generate_machine(seed, FaultLabel.MISALIGNMENT, small_config)
            vib = m.series_for(Channel.VIBRATION)[0]
            f0 = m.rotation_freq_hz
            ratio = goertzel_magnitude(vib.values, vib.sample_rate_hz, 2 * f0) / goertzel_magnitude(
                vib.values, vib.sample_rate_hz, f0
            )
            assert ratio >= TONE_RATIO_THRESHOLD

    def test_bearing_wear_kurtosis_exceeds_threshold(self, small_config):
        for seed in (0, 1, 2):
            m = generate_machine(seed, FaultLabel.BEARING_WEAR, small_config)
            vib = m.series_for(Channel.VIBRATION)[0]
            s = summarize_series(vib, m.rotation_freq_hz)
            assert s.excess_kurtosis > KURTOSIS_THRESHOLD


class TestOracle:
    def base_series(self, config, fault=None):
        n = int(config.duration_s * config.vib_rate_hz)
        t = np.arange(n) / config.vib_rate_hz
        vib = 0.10 * np.sin(2 * np.pi * config.rotation_freq_hz * t)
        if fault is FaultLabel.MISALIGNMENT:
            vib = vib + 0.30 * np.sin(2 * np.pi * 2 * config.rotation_freq_hz * t)
        return vib

    def synthetic_record(self, config, vib_values, temp_values):
        from datetime import datetime, timezone

        from faultconsult.domain import MachineRecord

        t0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
        return MachineRecord(
            machine_id="m-x",
            machine_type="pump",
            rotation_freq_hz=config.rotation_freq_hz,
            series=(
                SensorSeries(Channel.VIBRATION, "g", config.vib_rate_hz, t0, tuple(vib_values)),
                SensorSeries(Channel.TEMPERATURE, "degC", config.temp_rate_hz, t0, tuple(temp_values)),
            ),
            gold_label=FaultLabel.NORMAL,
        )

    def test_quiet_machine_is_normal(self, small_config):
        record = self.synthetic_record(small_config, self.base_series(small_config), [40.0] * 64)
        assert oracle_diagnose(record) is FaultLabel.NORMAL

    def test_pure_harmonic_is_misalignment(self, small_config):
        vib = self.base_series(small_config, FaultLabel.MISALIGNMENT)
        record = self.synthetic_record(small_config, vib, [40.0] * 64)
        assert oracle_diagnose(record) is FaultLabel.MISALIGNMENT

    def test_is_pure(self, overheating_machine):
        assert oracle_diagnose(overheating_machine) is FaultLabel.OVERHEATING
        assert oracle_diagnose(overheating_machine) is FaultLabel.OVERHEATING

    def test_separability_sample(self, small_config):
        # the full 200-seed sweep is an acceptance criterion; spot-check here
        for seed in range(24):
            label = GOLD_CLASSES[seed % 4]
            m = generate_machine(seed, label, small_config)
            assert oracle_diagnose(m) is label, f"seed {seed}"


class TestGenerateDataset:
    def test_counts_and_ids(self):
        records = generate_dataset(SynthConfig(seed=5, n_per_class=2))
        assert len(records) == 8
        assert [r.machine_id for r in records] == [f"m-{i:04d}" for i in range(8)]
        by_class = {c: sum(1 for r in records if r.gold_label is c) for c in GOLD_CLASSES}
        assert all(v == 2 for v in by_class.values())

    def test_deterministic(self):
        a = generate_dataset(SynthConfig(seed=5, n_per_class=1))
        b = generate_dataset(SynthConfig(seed=5, n_per_class=1))
        assert a == b


class TestWriteDataset:
    def test_file_counts(self, tmp_path, one_per_class):
        write_dataset(one_per_class, tmp_path)
        assert (tmp_path / "manifest.json").exists()
        assert len(list(tmp_path.rglob("*.csv"))) == 8
        assert len(list(tmp_path.rglob("maintenance.jsonl"))) == 4

    def test_round_trip_is_exact(self, tmp_path, one_per_class):
        manifest = write_dataset(one_per_class, tmp_path)
        loaded = load_dataset(manifest)
        assert loaded == list(one_per_class)

    def test_empty_list(self, tmp_path):
        manifest = write_dataset([], tmp_path)
        assert manifest.machines == ()
        doc = json.loads((tmp_path / "manifest.json").read_text())
        assert doc["machines"] == []


def test_margins_are_at_least_double():
    # generation strengths sit >= 2x past the oracle thresholds
    from faultconsult.synthgen import (
        IMPULSE_FRACTION,
        MISALIGNMENT_HARMONIC_AMP,
        OVERHEAT_RAMP_C_PER_HOUR,
        VIB_TONE_AMP,
    )

    assert OVERHEAT_RAMP_C_PER_HOUR >= 2 * SLOPE_THRESHOLD_C_PER_HOUR
    assert MISALIGNMENT_HARMONIC_AMP / VIB_TONE_AMP >= 2 * TONE_RATIO_THRESHOLD - 1e-12
    assert math.isclose(IMPULSE_FRACTION, 0.01)
