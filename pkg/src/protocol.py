"""Interferometric verification circuit and its parameter sweeps.

Qubit 1 carries the left-hand side of the two-dimensional YBE, qubit 3 the
right-hand side and qubit 2 is the swap-test control whose complex transverse
magnetization equals |<φ1|φ3>|² (times ε).

A unit readout follows from a zero residual but not conversely: the swap test
only sees the overlap of the two output states, so triples such as
(0, π/4, −π/4) read 1 while the operator identity fails.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src import metrics
from src.braid import A_theta, B_theta, SpectralAngles
from src.linalg import ComplexMatrix, embed, rx, ry, rz
from src.molecule import MoleculeConfig
from src.nmr import coupling_delay
from src.observability import span
from src.pulse_sequence import DelayEvent, Event, PulseSequence, RotationEvent, ShapedEvent
from src.qstate import (
    DensityMatrix,
    Polarization,
    PureState,
    apply_unitary,
    basis_state,
    dephase,
    overlap,
    plus_state,
    pps,
    tensor,
    xy_magnetization,
)
from src.settings import ProtocolSettings, sweep_workers

logger = logging.getLogger("ybxsim.protocol")

N_QUBITS = 3
CONTROL = 2
TARGETS = (1, 3)
IMAG_TOL = 1e-9


class ProtocolError(ValueError):
    pass


class SweepMode(str, Enum):
    FIG2 = "fig2"
    FIG3A = "fig3a"
    FIG3B = "fig3b"
    CUSTOM = "custom"


class NoiseMode(str, Enum):
    IDEAL = "ideal"
    T2 = "t2"

    @classmethod
    def parse(cls, value: "NoiseMode | str") -> "NoiseMode":
        if isinstance(value, NoiseMode):
            return value
        key = value.lower()
        if key == "t2-model":
            key = "t2"
        try:
            return cls(key)
        except ValueError:
            raise ProtocolError(f"unknown noise mode {value!r}") from None


@dataclass(frozen=True)
class NoiseModel:
    t2_s: Tuple[float, ...] = (0.08, 0.09, 0.08)
    rotation_s: float = 1e-5
    fredkin_s: float = 3e-3
    scale: float = 1.0

    def __post_init__(self) -> None:
        if len(self.t2_s) != N_QUBITS or any(t <= 0 for t in self.t2_s):
            raise ProtocolError("t2 needs three positive values")
        if self.rotation_s < 0 or self.fredkin_s < 0 or self.scale < 0:
            raise ProtocolError("durations must be non-negative")

    @classmethod
    def from_settings(cls, settings: ProtocolSettings) -> "NoiseModel":
        return cls(t2_s=tuple(settings.t2_s), rotation_s=settings.rotation_s, fredkin_s=settings.fredkin_s)

    def scaled(self, k: float) -> "NoiseModel":
        return replace(self, scale=self.scale * k)


@dataclass(frozen=True)
class SweepSpec:
    mode: SweepMode
    points: int = 64
    noise: NoiseMode = NoiseMode.IDEAL
    epsilon: Polarization = field(default_factory=lambda: Polarization(1e-5))
    custom: Tuple[SpectralAngles, ...] = ()
    noise_model: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", SweepMode(self.mode))
        object.__setattr__(self, "noise", NoiseMode.parse(self.noise))
        object.__setattr__(self, "epsilon", Polarization.of(self.epsilon))
        object.__setattr__(self, "custom", tuple(SpectralAngles.of(a) for a in self.custom))
        if self.mode is SweepMode.CUSTOM:
            if not self.custom:
                raise ProtocolError("custom mode needs at least one angle triple")
        elif self.points < 2:
            raise ProtocolError("points must be at least 2")
        if self.epsilon.epsilon == 0.0:
            raise ProtocolError("zero polarization gives no observable signal")


@dataclass(frozen=True)
class ProtocolResult:
    angles: SpectralAngles
    overlap_direct: float
    magnetization: complex
    normalized_magnetization: float
    theory: float


def phi_states(angles: SpectralAngles | Sequence[float]) -> Tuple[PureState, PureState]:
    t1, t2, t3 = SpectralAngles.of(angles).as_tuple()
    plus = plus_state().amplitudes
    phi1 = A_theta(t1) @ B_theta(t2) @ A_theta(t3) @ plus
    phi3 = B_theta(t3) @ A_theta(t2) @ B_theta(t1) @ plus
    return PureState(n=1, amplitudes=phi1), PureState(n=1, amplitudes=phi3)


def _bit(index: int, q: int, n: int) -> int:
    return (index >> (n - q)) & 1


def fredkin(control: int, targets: Tuple[int, int], n: int) -> ComplexMatrix:
    a, b = targets
    indices = (control, a, b)
    if len(set(indices)) != 3:
        raise ProtocolError("control and targets must be distinct")
    if any(q < 1 or q > n for q in indices):
        raise ProtocolError("qubit index out of range")
    dim = 2**n
    out = np.zeros((dim, dim), dtype=np.complex128)
    for idx in range(dim):
        dest = idx
        if _bit(idx, control, n) and _bit(idx, a, n) != _bit(idx, b, n):
            dest = idx ^ (1 << (n - a)) ^ (1 << (n - b))
        out[dest, idx] = 1.0
    return out


_AXES = {"x": rx, "z": rz}


def rotation_plan(angles: SpectralAngles | Sequence[float]) -> List[List[Tuple[int, str, float]]]:
    """(qubit, axis, angle) per step for LHS on qubit 1 and RHS on qubit 3.

    A(θ) = Rz(2θ) and B(θ) = Rx(−2θ); products act right to left, so the
    first step carries A(θ3) on qubit 1 and B(θ1) on qubit 3.
    """
    t1, t2, t3 = SpectralAngles.of(angles).as_tuple()
    return [
        [(1, "z", 2 * t3), (3, "x", -2 * t1)],
        [(1, "x", -2 * t2), (3, "z", 2 * t2)],
        [(1, "z", 2 * t1), (3, "x", -2 * t3)],
    ]


def rotation_schedule(angles: SpectralAngles | Sequence[float]) -> List[List[Tuple[int, ComplexMatrix]]]:
    return [[(q, _AXES[axis](angle)) for q, axis, angle in step] for step in rotation_plan(angles)]


class _Runner:
    """Applies circuit steps with optional per-step dephasing."""

    def __init__(self, rho: DensityMatrix, noise: NoiseMode, model: NoiseModel) -> None:
        self.rho = rho
        self.noise = noise
        self.model = model

    def step(self, unitary: ComplexMatrix, duration: float) -> None:
        self.rho = apply_unitary(self.rho, unitary)
        if self.noise is NoiseMode.T2:
            t = duration * self.model.scale
            for q in range(1, N_QUBITS + 1):
                self.rho = dephase(self.rho, q, t, self.model.t2_s[q - 1])

    def local(self, ops: Sequence[Tuple[int, ComplexMatrix]]) -> None:
        u = np.eye(2**N_QUBITS, dtype=np.complex128)
        for q, op in ops:
            u = embed(op, [q], N_QUBITS) @ u
        self.step(u, self.model.rotation_s)

    def readout(self) -> complex:
        self.step(fredkin(CONTROL, TARGETS, N_QUBITS), self.model.fredkin_s)
        return xy_magnetization(self.rho, CONTROL)


def _circuit_magnetization(angles: SpectralAngles, eps: Polarization, noise: NoiseMode, model: NoiseModel) -> complex:
    runner = _Runner(pps(basis_state("000"), eps), noise, model)
    half_pi = ry(math.pi / 2)
    runner.local([(1, half_pi), (3, half_pi)])
    for ops in rotation_schedule(angles):
        runner.local(ops)
    runner.local([(CONTROL, half_pi)])
    metrics.record_circuit_run(noise.value)
    return runner.readout()


def reference_magnetization(eps: Polarization | float) -> complex:
    """Ideal readout at θ = (0, 0, 0); normalizes both ideal and noisy runs."""
    ref = _circuit_magnetization(SpectralAngles(0.0, 0.0, 0.0), Polarization.of(eps), NoiseMode.IDEAL, NoiseModel())
    if abs(ref) == 0.0:
        raise ProtocolError("reference run produced no signal")
    return ref


def theory_value(mode: SweepMode | str, angles: SpectralAngles | Sequence[float]) -> float:
    mode = SweepMode(mode)
    angles = SpectralAngles.of(angles)
    if mode is SweepMode.FIG2:
        return 1.0
    if mode is SweepMode.FIG3A:
        return math.cos(angles.theta1) ** 2
    return overlap(*phi_states(angles))


def run_circuit(
    angles: SpectralAngles | Sequence[float],
    spec: SweepSpec,
    reference: Optional[complex] = None,
) -> ProtocolResult:
    angles = SpectralAngles.of(angles)
    ref = reference if reference is not None else reference_magnetization(spec.epsilon)
    mag = _circuit_magnetization(angles, spec.epsilon, spec.noise, spec.noise_model)
    if spec.noise is NoiseMode.IDEAL and abs((mag / spec.epsilon.epsilon).imag) > IMAG_TOL:
        raise ProtocolError("ideal readout has an imaginary component")
    return ProtocolResult(
        angles=angles,
        overlap_direct=overlap(*phi_states(angles)),
        magnetization=mag,
        normalized_magnetization=float((mag / ref).real),
        theory=theory_value(spec.mode, angles),
    )


def run_swap_test(
    phi1: PureState,
    phi3: PureState,
    eps: Polarization | float = 1e-5,
    noise: NoiseMode | str = NoiseMode.IDEAL,
    model: Optional[NoiseModel] = None,
) -> complex:
    """Normalized readout for arbitrary single-qubit states on qubits 1 and 3."""
    if phi1.n != 1 or phi3.n != 1:
        raise ProtocolError("swap test takes single-qubit states")
    eps = Polarization.of(eps)
    runner = _Runner(pps(tensor(phi1, basis_state("0"), phi3), eps), NoiseMode.parse(noise), model or NoiseModel())
    runner.local([(CONTROL, ry(math.pi / 2))])
    return runner.readout() / reference_magnetization(eps)


def sweep_angles(spec: SweepSpec) -> List[SpectralAngles]:
    if spec.mode is SweepMode.CUSTOM:
        return list(spec.custom)
    grid = np.linspace(0.0, 2 * math.pi, spec.points)
    if spec.mode is SweepMode.FIG2:
        return [SpectralAngles(-t, 0.0, t) for t in grid]
    if spec.mode is SweepMode.FIG3A:
        return [SpectralAngles(t, 0.0, 0.0) for t in grid]
    return [SpectralAngles(t, t / 2, math.pi / 2) for t in grid]


def run_sweep(spec: SweepSpec) -> List[ProtocolResult]:
    grid = sweep_angles(spec)
    logger.info(
        "Sweep started",
        extra={"extra": {"mode": spec.mode.value, "points": len(grid), "noise": spec.noise.value}},
    )
    with span("protocol.run_sweep", mode=spec.mode.value, points=len(grid), noise=spec.noise.value):
        ref = reference_magnetization(spec.epsilon)
        workers = sweep_workers()
        if workers == 1:
            results = [run_circuit(a, spec, ref) for a in grid]
        else:
            # map keeps grid order regardless of completion order
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda a: run_circuit(a, spec, ref), grid))
    metrics.record_sweep_points(spec.mode.value, len(results))
    logger.info(
        "Sweep finished",
        extra={
            "extra": {
                "mode": spec.mode.value,
                "mean_normalized": float(np.mean([r.normalized_magnetization for r in results])),
            }
        },
    )
    return results


# pulse program ---------------------------------------------------------------
#
# The circuit compiled to hard pulses and refocused J delays. z rotations are
# x/y composites, every two-spin gate is a controlled phase, and the
# controlled swap is CNOT(3→1)·Toffoli(2,1→3)·CNOT(3→1).


def _pulse(q: int, angle: float, phase_deg: float, duration_s: float) -> List[Event]:
    if angle == 0.0:
        return []
    if angle < 0:
        angle, phase_deg = -angle, phase_deg + 180.0
    return [RotationEvent(qubits=(q,), angle_deg=math.degrees(angle), phase_deg=phase_deg % 360.0, duration_s=duration_s)]


def _rz(q: int, phi: float, duration_s: float) -> List[Event]:
    # Rz(φ) = Rx(π/2)·Ry(φ)·Rx(−π/2)
    if phi == 0.0:
        return []
    return [
        *_pulse(q, -math.pi / 2, 0.0, duration_s),
        *_pulse(q, phi, 90.0, duration_s),
        *_pulse(q, math.pi / 2, 0.0, duration_s),
    ]


def _controlled_phase(m: MoleculeConfig, j: int, k: int, alpha: float, duration_s: float) -> List[Event]:
    """diag(1, 1, 1, e^{iα}) on spins j, k up to a global phase."""
    t = coupling_delay(m, j, k, -alpha)
    return [*_rz(j, alpha / 2, duration_s), *_rz(k, alpha / 2, duration_s), DelayEvent(duration_s=t, pair=(j, k))]


def _cnot(m: MoleculeConfig, control: int, target: int, duration_s: float) -> List[Event]:
    return [
        *_pulse(target, -math.pi / 2, 90.0, duration_s),
        *_controlled_phase(m, control, target, math.pi, duration_s),
        *_pulse(target, math.pi / 2, 90.0, duration_s),
    ]


def _toffoli(m: MoleculeConfig, c: int, a: int, b: int, duration_s: float) -> List[Event]:
    # the phase π·x_c·x_a·x_b split into π/2 terms on (a,b), (c⊕a,b) and (c,b)
    return [
        *_pulse(b, -math.pi / 2, 90.0, duration_s),
        *_controlled_phase(m, a, b, math.pi / 2, duration_s),
        *_cnot(m, c, a, duration_s),
        *_controlled_phase(m, a, b, -math.pi / 2, duration_s),
        *_cnot(m, c, a, duration_s),
        *_controlled_phase(m, c, b, math.pi / 2, duration_s),
        *_pulse(b, math.pi / 2, 90.0, duration_s),
    ]


def fredkin_events(m: MoleculeConfig, duration_s: float = 0.0) -> List[Event]:
    """Controlled swap of qubits 1 and 3 on control 2 as pulses and J delays."""
    a, b = TARGETS
    return [
        *_cnot(m, b, a, duration_s),
        *_toffoli(m, CONTROL, a, b, duration_s),
        *_cnot(m, b, a, duration_s),
    ]


def protocol_sequence(
    angles: SpectralAngles | Sequence[float],
    m: MoleculeConfig,
    fredkin_file: Optional[str] = None,
    rotation_s: float = 0.0,
    base_dir: Optional[str] = None,
) -> PulseSequence:
    """The verification circuit as a pulse program for ``m``.

    With ``fredkin_file`` the controlled swap is a shaped pulse read from that
    control grid; otherwise it is compiled onto the couplings of ``m``, which
    then needs J12, J13 and J23 all non-zero. Run it from pps(|000>) and read
    the transverse magnetization of qubit 2.
    """
    if m.n != N_QUBITS:
        raise ProtocolError(f"the circuit runs on {N_QUBITS} spins, molecule has {m.n}")
    events: List[Event] = []
    for q in TARGETS:
        events += _pulse(q, math.pi / 2, 90.0, rotation_s)
    for step in rotation_plan(angles):
        for q, axis, angle in step:
            events += _rz(q, angle, rotation_s) if axis == "z" else _pulse(q, angle, 0.0, rotation_s)
    events += _pulse(CONTROL, math.pi / 2, 90.0, rotation_s)
    if fredkin_file is not None:
        events.append(ShapedEvent(path=fredkin_file))
    else:
        events += fredkin_events(m, rotation_s)
    logger.debug("Circuit compiled", extra={"extra": {"events": len(events), "shaped": fredkin_file is not None}})
    return PulseSequence(events=tuple(events), base_dir=base_dir)
