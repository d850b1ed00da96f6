from __future__ import annotations

import hashlib
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

logger = logging.getLogger("ybxsim.settings")

_CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"
DEFAULT_PROTOCOL_CONFIG = str(_CONFIG_DIR / "protocol.yaml")
DEFAULT_GRAPE_CONFIG = str(_CONFIG_DIR / "grape.yaml")


class SettingsError(ValueError):
    pass


def compute_config_hash(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def _load_yaml(path: str) -> Tuple[Dict[str, Any], Optional[str]]:
    if not os.path.exists(path):
        logger.warning("Settings file missing, using defaults", extra={"extra": {"path": path}})
        return {}, None
    with open(path, "rb") as handle:
        raw = handle.read()
    try:
        payload = yaml.safe_load(raw) or {}
    except yaml.YAMLError as exc:
        raise SettingsError(f"invalid yaml in {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise SettingsError(f"{path} must contain a mapping")
    return payload, compute_config_hash(raw)


def _floats(value: Any, name: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise SettingsError(f"{name} must be a list of numbers") from exc


@dataclass(frozen=True)
class ProtocolSettings:
    epsilon: float = 1e-5
    points: int = 64
    t2_s: Tuple[float, ...] = (0.08, 0.09, 0.08)
    rotation_s: float = 1e-5
    fredkin_s: float = 3e-3
    config_hash: Optional[str] = None

    @classmethod
    def from_env(cls) -> "ProtocolSettings":
        path = os.getenv("YBXSIM_PROTOCOL_CONFIG", DEFAULT_PROTOCOL_CONFIG)
        payload, config_hash = _load_yaml(path)
        defaults = cls()
        noise = payload.get("noise", {}) or {}
        durations = noise.get("durations_s", {}) or {}
        return cls(
            epsilon=float(payload.get("epsilon", defaults.epsilon)),
            points=int(payload.get("points", defaults.points)),
            t2_s=_floats(noise.get("t2_s", defaults.t2_s), "noise.t2_s"),
            rotation_s=float(durations.get("rotation", defaults.rotation_s)),
            fredkin_s=float(durations.get("fredkin", defaults.fredkin_s)),
            config_hash=config_hash,
        )


@dataclass(frozen=True)
class GrapeSettings:
    segments: int = 50
    dt_s: float = 1e-5
    max_iterations: int = 2000
    threshold: float = 0.9999
    amplitude_cap: float = 2 * math.pi * 20e3
    initial_scale: float = 0.01
    lbfgs_memory: int = 10
    log_every: int = 100
    rf_scales: Tuple[float, ...] = (0.95, 1.0, 1.05)
    shift_offsets_hz: Tuple[float, ...] = (-5.0, 0.0, 5.0)
    weights: Optional[Tuple[float, ...]] = None
    config_hash: Optional[str] = None

    @classmethod
    def from_env(cls) -> "GrapeSettings":
        path = os.getenv("YBXSIM_GRAPE_CONFIG", DEFAULT_GRAPE_CONFIG)
        payload, config_hash = _load_yaml(path)
        defaults = cls()
        opt = payload.get("optimizer", {}) or {}
        ens = payload.get("ensemble", {}) or {}
        weights = ens.get("weights")
        return cls(
            segments=int(opt.get("segments", defaults.segments)),
            dt_s=float(opt.get("dt_s", defaults.dt_s)),
            max_iterations=int(opt.get("max_iterations", defaults.max_iterations)),
            threshold=float(opt.get("threshold", defaults.threshold)),
            amplitude_cap=float(opt.get("amplitude_cap_rad_s", defaults.amplitude_cap)),
            initial_scale=float(opt.get("initial_scale", defaults.initial_scale)),
            lbfgs_memory=int(opt.get("lbfgs_memory", defaults.lbfgs_memory)),
            log_every=int(opt.get("log_every", defaults.log_every)),
            rf_scales=_floats(ens.get("rf_scales", defaults.rf_scales), "ensemble.rf_scales"),
            shift_offsets_hz=_floats(
                ens.get("shift_offsets_hz", defaults.shift_offsets_hz), "ensemble.shift_offsets_hz"
            ),
            weights=_floats(weights, "ensemble.weights") if weights is not None else None,
            config_hash=config_hash,
        )


def pps_gate() -> float:
    return float(os.getenv("YBXSIM_PPS_GATE", "0.99"))


def sweep_workers() -> int:
    return max(1, int(os.getenv("YBXSIM_SWEEP_WORKERS", "1")))
