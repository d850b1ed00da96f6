import os

import pytest
from hypothesis import HealthCheck, settings

os.environ.setdefault("YBXSIM_LOG_LEVEL", "WARNING")
os.environ.setdefault("YBXSIM_OTEL_ENABLED", "0")
os.environ.setdefault("YBXSIM_SWEEP_WORKERS", "1")
os.environ.pop("YBXSIM_METRICS_PATH", None)

settings.register_profile(
    "ybxsim",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "ybxsim"))


@pytest.fixture(autouse=True)
def _block_network_when_requested(monkeypatch):
    if os.getenv("NO_NETWORK", "0") != "1":
        yield
        return

    import socket

    def _blocked(*_args, **_kwargs):
        raise RuntimeError("Network access blocked by NO_NETWORK=1")

    monkeypatch.setattr(socket, "socket", _blocked)
    monkeypatch.setattr(socket, "create_connection", _blocked)
    yield


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(1234)
