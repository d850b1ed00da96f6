from __future__ import annotations

import contextlib
import logging
import os
from typing import Any, Iterator

from opentelemetry import trace
from opentelemetry.exporter.otlp.proto.http.trace_exporter import OTLPSpanExporter
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor

logger = logging.getLogger("ybxsim.observability")

_initialized = False


def otel_enabled() -> bool:
    return os.getenv("YBXSIM_OTEL_ENABLED", "0") == "1"


def init_otel() -> None:
    global _initialized
    if not otel_enabled() or _initialized:
        return

    service_name = os.getenv("YBXSIM_SERVICE_NAME", "ybxsim")
    resource = Resource.create({"service.name": service_name})
    provider = TracerProvider(resource=resource)

    endpoint = os.getenv("YBXSIM_OTEL_EXPORTER_OTLP_ENDPOINT", "http://127.0.0.1:4318/v1/traces")
    exporter = OTLPSpanExporter(endpoint=endpoint)
    provider.add_span_processor(BatchSpanProcessor(exporter))
    trace.set_tracer_provider(provider)
    _initialized = True
    logger.info("OpenTelemetry enabled", extra={"extra": {"endpoint": endpoint}})


@contextlib.contextmanager
def span(name: str, **attributes: Any) -> Iterator[None]:
    if not otel_enabled():
        yield
        return
    tracer = trace.get_tracer("ybxsim")
    with tracer.start_as_current_span(name) as current:
        for key, value in attributes.items():
            if isinstance(value, (str, bool, int, float)):
                current.set_attribute(key, value)
        yield

