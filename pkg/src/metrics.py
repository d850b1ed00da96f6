from __future__ import annotations

import os
from typing import Optional

from prometheus_client import CollectorRegistry, Counter, Gauge, generate_latest, write_to_textfile

_metrics_registry: Optional[CollectorRegistry] = None
_circuit_runs_total = None
_sweep_points_total = None
_grape_iterations_total = None
_grape_best_fidelity = None
_verify_max_residual = None


def configure_metrics(registry: Optional[CollectorRegistry] = None) -> CollectorRegistry:
    """Create the run metrics in ``registry`` (a fresh one by default)."""
    global _metrics_registry, _circuit_runs_total, _sweep_points_total
    global _grape_iterations_total, _grape_best_fidelity, _verify_max_residual
    _metrics_registry = registry or CollectorRegistry()
    _circuit_runs_total = Counter(
        "ybxsim_circuit_runs_total",
        "Interferometric circuit evaluations",
        ["noise"],
        registry=_metrics_registry,
    )
    _sweep_points_total = Counter(
        "ybxsim_sweep_points_total",
        "Sweep grid points evaluated",
        ["mode"],
        registry=_metrics_registry,
    )
    _grape_iterations_total = Counter(
        "ybxsim_grape_iterations_total",
        "Accepted GRAPE ascent steps",
        registry=_metrics_registry,
    )
    _grape_best_fidelity = Gauge(
        "ybxsim_grape_best_fidelity",
        "Ensemble-average fidelity of the last optimizer run",
        registry=_metrics_registry,
    )
    _verify_max_residual = Gauge(
        "ybxsim_verify_max_residual",
        "Largest residual per verified relation",
        ["relation"],
        registry=_metrics_registry,
    )
    return _metrics_registry


def record_circuit_run(noise: str) -> None:
    if _circuit_runs_total is None:
        return
    _circuit_runs_total.labels(noise=noise).inc()


def record_sweep_points(mode: str, count: int) -> None:
    if _sweep_points_total is None:
        return
    _sweep_points_total.labels(mode=mode).inc(count)


def record_grape_iteration() -> None:
    if _grape_iterations_total is None:
        return
    _grape_iterations_total.inc()


def record_grape_fidelity(value: float) -> None:
    if _grape_best_fidelity is None:
        return
    _grape_best_fidelity.set(value)


def record_verify_residual(relation: str, value: float) -> None:
    if _verify_max_residual is None:
        return
    _verify_max_residual.labels(relation=relation).set(value)


def render_metrics() -> bytes:
    if _metrics_registry is None:
        return b""
    return generate_latest(_metrics_registry)


def write_metrics(path: Optional[str] = None) -> Optional[str]:
    target = path or os.getenv("YBXSIM_METRICS_PATH")
    if not target or _metrics_registry is None:
        return None
    write_to_textfile(target, _metrics_registry)
    return target
