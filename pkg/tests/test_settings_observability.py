import json
import logging
import math

import pytest
from prometheus_client import CollectorRegistry

from src import metrics
from src.logging_config import JsonFormatter
from src.observability import init_otel, otel_enabled, span
from src.settings import (
    GrapeSettings,
    ProtocolSettings,
    SettingsError,
    compute_config_hash,
    pps_gate,
    sweep_workers,
)


def test_protocol_settings_load_shipped_yaml():
    settings = ProtocolSettings.from_env()
    assert settings.t2_s == (0.08, 0.09, 0.08)
    assert settings.fredkin_s == pytest.approx(3e-3)
    assert settings.config_hash is not None and len(settings.config_hash) == 64


def test_protocol_settings_override_path(monkeypatch, tmp_path):
    path = tmp_path / "protocol.yaml"
    path.write_text("epsilon: 0.001\nnoise:\n  durations_s:\n    fredkin: 0.01\n")
    monkeypatch.setenv("YBXSIM_PROTOCOL_CONFIG", str(path))
    settings = ProtocolSettings.from_env()
    assert settings.epsilon == 0.001
    assert settings.fredkin_s == 0.01
    assert settings.rotation_s == ProtocolSettings().rotation_s
    assert settings.config_hash == compute_config_hash(path.read_bytes())


def test_missing_settings_file_falls_back_to_defaults(monkeypatch, tmp_path, caplog):
    monkeypatch.setenv("YBXSIM_GRAPE_CONFIG", str(tmp_path / "absent.yaml"))
    with caplog.at_level(logging.WARNING, logger="ybxsim.settings"):
        settings = GrapeSettings.from_env()
    assert settings == GrapeSettings()
    assert "Settings file missing" in caplog.text


def test_grape_settings_read_ensemble(monkeypatch, tmp_path):
    path = tmp_path / "grape.yaml"
    path.write_text("optimizer:\n  segments: 7\nensemble:\n  rf_scales: [1.0]\n  shift_offsets_hz: [0.0, 2.0]\n  weights: [0.25, 0.75]\n")
    monkeypatch.setenv("YBXSIM_GRAPE_CONFIG", str(path))
    settings = GrapeSettings.from_env()
    assert settings.segments == 7
    assert settings.weights == (0.25, 0.75)


def test_shipped_grape_yaml_matches_dataclass_defaults():
    settings = GrapeSettings.from_env()
    assert settings.amplitude_cap == pytest.approx(2 * math.pi * 20e3, rel=1e-15)
    assert settings.lbfgs_memory == GrapeSettings().lbfgs_memory == 10
    assert settings.rf_scales == (0.95, 1.0, 1.05)


@pytest.mark.parametrize("body", ["- just\n- a list\n", "optimizer: [unclosed\n", "ensemble:\n  rf_scales: fast\n"])
def test_bad_settings_files_raise(monkeypatch, tmp_path, body):
    path = tmp_path / "grape.yaml"
    path.write_text(body)
    monkeypatch.setenv("YBXSIM_GRAPE_CONFIG", str(path))
    with pytest.raises(SettingsError):
        GrapeSettings.from_env()


def test_env_flags(monkeypatch):
    monkeypatch.setenv("YBXSIM_PPS_GATE", "0.5")
    monkeypatch.setenv("YBXSIM_SWEEP_WORKERS", "0")
    assert pps_gate() == 0.5
    assert sweep_workers() == 1


def test_json_formatter_merges_extra_fields():
    record = logging.LogRecord("ybxsim.test", logging.INFO, __file__, 1, "hello", None, None)
    record.extra = {"points": 64}
    payload = json.loads(JsonFormatter().format(record))
    assert payload["message"] == "hello"
    assert payload["points"] == 64
    assert payload["logger"] == "ybxsim.test"


def test_metrics_record_and_write(tmp_path):
    metrics.configure_metrics(CollectorRegistry())
    metrics.record_circuit_run("ideal")
    metrics.record_sweep_points("fig2", 64)
    metrics.record_verify_residual("braid relation", 1e-16)
    text = metrics.render_metrics().decode()
    assert 'ybxsim_sweep_points_total{mode="fig2"} 64.0' in text
    assert 'ybxsim_circuit_runs_total{noise="ideal"} 1.0' in text
    target = tmp_path / "ybxsim.prom"
    assert metrics.write_metrics(str(target)) == str(target)
    assert "ybxsim_verify_max_residual" in target.read_text()


def test_span_is_a_no_op_when_tracing_disabled(monkeypatch):
    monkeypatch.setenv("YBXSIM_OTEL_ENABLED", "0")
    assert not otel_enabled()
    init_otel()
    with span("test.noop", attempt=1):
        pass
