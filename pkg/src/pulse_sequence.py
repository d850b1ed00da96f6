"""Line-oriented pulse program format.

One event per line::

    rot q=1,3 angle=90 phase=90 dur=1e-05
    delay t=0.0125 pair=1,2
    grad
    shaped file=pulses/ry90.json

Angles are degrees in the file and on the event objects; ``angle``/``phase``
properties give radians. ``#`` starts a comment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union


class SequenceError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RotationEvent:
    qubits: Tuple[int, ...]
    angle_deg: float
    phase_deg: float = 0.0
    duration_s: float = 0.0

    @property
    def angle(self) -> float:
        return math.radians(self.angle_deg)

    @property
    def phase(self) -> float:
        return math.radians(self.phase_deg)


@dataclass(frozen=True)
class DelayEvent:
    duration_s: float
    pair: Optional[Tuple[int, int]] = None


@dataclass(frozen=True)
class GradientEvent:
    """Crusher; removes every coherence instantly."""


@dataclass(frozen=True)
class ShapedEvent:
    path: str


Event = Union[RotationEvent, DelayEvent, GradientEvent, ShapedEvent]


@dataclass(frozen=True)
class PulseSequence:
    events: Tuple[Event, ...] = ()
    base_dir: Optional[str] = None

    def __len__(self) -> int:
        return len(self.events)

    def resolve(self, event: ShapedEvent) -> Path:
        path = Path(event.path)
        if path.is_absolute() or self.base_dir is None:
            return path
        return Path(self.base_dir) / path


_ALLOWED_KEYS = {
    "rot": {"q", "angle", "phase", "dur"},
    "delay": {"t", "pair"},
    "grad": set(),
    "shaped": {"file"},
}


def _number(raw: str, key: str, line: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise SequenceError(f"{key} is not a number", line) from None
    if not math.isfinite(value):
        raise SequenceError(f"{key} must be finite", line)
    return value


def _qubits(raw: str, n: Optional[int], line: int) -> Tuple[int, ...]:
    try:
        qubits = tuple(int(part) for part in raw.split(","))
    except ValueError:
        raise SequenceError("qubit list must be integers", line) from None
    if len(set(qubits)) != len(qubits):
        raise SequenceError("duplicate qubit", line)
    if any(q < 1 or (n is not None and q > n) for q in qubits):
        raise SequenceError("qubit out of range", line)
    return qubits


def _fields(tokens: list[str], kind: str, line: int) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or not value:
            raise SequenceError(f"expected key=value, got {token!r}", line)
        if key not in _ALLOWED_KEYS[kind]:
            raise SequenceError(f"unknown key {key!r} for {kind}", line)
        if key in out:
            raise SequenceError(f"repeated key {key!r}", line)
        out[key] = value
    return out


def _duration(raw: str, key: str, line: int) -> float:
    value = _number(raw, key, line)
    if value < 0:
        raise SequenceError(f"{key} must be non-negative", line)
    return value


def parse_line(text: str, line: int, n: Optional[int] = None) -> Optional[Event]:
    body = text.split("#", 1)[0].strip()
    if not body:
        return None
    kind, *tokens = body.split()
    if kind not in _ALLOWED_KEYS:
        raise SequenceError(f"unknown event {kind!r}", line)
    fields = _fields(tokens, kind, line)

    if kind == "rot":
        if "q" not in fields:
            raise SequenceError("rot needs q=", line)
        qubits = _qubits(fields["q"], n, line)
        if "angle" not in fields:
            raise SequenceError("rot needs angle=", line)
        return RotationEvent(
            qubits=qubits,
            angle_deg=_number(fields["angle"], "angle", line),
            phase_deg=_number(fields.get("phase", "0"), "phase", line),
            duration_s=_duration(fields.get("dur", "0"), "dur", line),
        )
    if kind == "delay":
        if "t" not in fields:
            raise SequenceError("delay needs t=", line)
        pair = None
        if "pair" in fields:
            qubits = _qubits(fields["pair"], n, line)
            if len(qubits) != 2:
                raise SequenceError("pair needs exactly two qubits", line)
            pair = (qubits[0], qubits[1])
        return DelayEvent(duration_s=_duration(fields["t"], "t", line), pair=pair)
    if kind == "grad":
        return GradientEvent()
    if "file" not in fields:
        raise SequenceError("shaped needs file=", line)
    return ShapedEvent(path=fields["file"])


def parse_sequence(text: str, n: Optional[int] = None, base_dir: Optional[str] = None) -> PulseSequence:
    events = []
    for number, raw in enumerate(text.splitlines(), start=1):
        event = parse_line(raw, number, n)
        if event is not None:
            events.append(event)
    return PulseSequence(events=tuple(events), base_dir=base_dir)


def load_sequence(path: str | Path, n: Optional[int] = None) -> PulseSequence:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SequenceError(f"cannot read sequence file {path}: {exc}") from exc
    return parse_sequence(text, n=n, base_dir=str(path.parent))


def serialize_event(event: Event) -> str:
    if isinstance(event, RotationEvent):
        qubits = ",".join(str(q) for q in event.qubits)
        return (
            f"rot q={qubits} angle={event.angle_deg!r} "
            f"phase={event.phase_deg!r} dur={event.duration_s!r}"
        )
    if isinstance(event, DelayEvent):
        text = f"delay t={event.duration_s!r}"
        if event.pair is not None:
            text += f" pair={event.pair[0]},{event.pair[1]}"
        return text
    if isinstance(event, GradientEvent):
        return "grad"
    return f"shaped file={event.path}"


def serialize_sequence(seq: PulseSequence) -> str:
    return "".join(serialize_event(e) + "\n" for e in seq.events)


def validate_for(seq: PulseSequence, n: int) -> None:
    """Re-check qubit indices against a spin count (events parsed without one)."""
    for position, event in enumerate(seq.events, start=1):
        qubits: Tuple[int, ...] = ()
        if isinstance(event, RotationEvent):
            qubits = event.qubits
        elif isinstance(event, DelayEvent) and event.pair is not None:
            qubits = event.pair
        if any(q < 1 or q > n for q in qubits):
            raise SequenceError(f"event {position}: qubit out of range")


def gradient_count(seq: PulseSequence) -> int:
    return sum(1 for e in seq.events if isinstance(e, GradientEvent))


def total_duration(seq: PulseSequence) -> float:
    """Sum of rotation, delay and gradient durations (shaped events excluded)."""
    return sum(getattr(e, "duration_s", 0.0) for e in seq.events)
