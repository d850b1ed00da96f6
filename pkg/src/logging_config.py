from __future__ import annotations

import json
import logging
import os


class JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:  # pragma: no cover - logging
        base = {
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "timestamp": int(record.created * 1000),
        }
        if hasattr(record, "extra") and isinstance(record.extra, dict):
            base.update(record.extra)
        return json.dumps(base, separators=(",", ":"), default=str)


def configure_logging() -> logging.Logger:
    """Attach one stderr handler to the ``ybxsim`` logger (idempotent)."""
    level = os.getenv("YBXSIM_LOG_LEVEL", "INFO").upper()
    as_json = os.getenv("YBXSIM_LOG_JSON", "1") == "1"
    logger = logging.getLogger("ybxsim")
    logger.setLevel(level)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(
            JsonFormatter() if as_json else logging.Formatter("%(asctime)s %(levelname)s %(message)s")
        )
        logger.addHandler(handler)
    return logger
