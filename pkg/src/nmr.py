"""Density-matrix execution of pulse programs on a molecule.

Rotations are instantaneous unitaries followed by their nominal duration of
relaxation; delays evolve under the diagonal drift Hamiltonian; a gradient
crushes every coherence.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from string import Template
from typing import Optional, Sequence

import numpy as np

from src import grape
from src.linalg import spin_operator, unitary_from_hermitian
from src.molecule import MoleculeConfig, hamiltonian_diagonal
from src.observability import span
from src.pulse_sequence import (
    DelayEvent,
    GradientEvent,
    PulseSequence,
    RotationEvent,
    SequenceError,
    ShapedEvent,
    parse_sequence,
    validate_for,
)
from src.qstate import (
    DensityMatrix,
    Polarization,
    StateError,
    apply_unitary,
    basis_state,
    dephase,
    pps,
    thermal_deviation_state,
)
from src.settings import pps_gate

logger = logging.getLogger("ybxsim.nmr")

PPS_TEMPLATE = Path(__file__).resolve().parent.parent / "config" / "sequences" / "pps_controlled_transfer.seq"
DEFAULT_PHI1 = math.radians(98.2)
DEFAULT_PHI2 = math.radians(135.59)
PPS_ROTATION_S = 1e-5


def rotation_unitary(qubits: Sequence[int], angle: float, phase: float, n: int) -> np.ndarray:
    """exp(-i·angle·Σ_q (cos φ·I_x^q + sin φ·I_y^q))."""
    h = sum(
        math.cos(phase) * spin_operator("x", q, n) + math.sin(phase) * spin_operator("y", q, n)
        for q in qubits
    )
    return unitary_from_hermitian(h, angle)


def relax(rho: DensityMatrix, t: float, m: MoleculeConfig) -> DensityMatrix:
    for q in range(1, m.n + 1):
        rho = dephase(rho, q, t, m.t2_s[q - 1])
    return rho


def evolve_free(
    rho: DensityMatrix,
    t: float,
    m: MoleculeConfig,
    noise: bool = False,
    pair: Optional[Sequence[int]] = None,
) -> DensityMatrix:
    if t < 0:
        raise StateError("negative evolution time")
    phases = np.exp(-1j * hamiltonian_diagonal(m, pair=pair) * t)
    # diagonal propagator: ρ_ab -> ρ_ab·e^{-i(E_a - E_b)t}
    out = DensityMatrix(n=rho.n, matrix=rho.matrix * np.outer(phases, phases.conj()))
    return relax(out, t, m) if noise else out


def apply_gradient(rho: DensityMatrix) -> DensityMatrix:
    return DensityMatrix(n=rho.n, matrix=np.diag(np.diag(rho.matrix)))


def run_sequence(rho0: DensityMatrix, seq: PulseSequence, m: MoleculeConfig, noise: bool = False) -> DensityMatrix:
    if rho0.n != m.n:
        raise StateError(f"state has {rho0.n} spins, molecule has {m.n}")
    validate_for(seq, m.n)
    rho = rho0
    with span("nmr.run_sequence", spins=m.n, events=len(seq), noise=noise):
        for event in seq.events:
            if isinstance(event, RotationEvent):
                rho = apply_unitary(rho, rotation_unitary(event.qubits, event.angle, event.phase, m.n))
                if noise and event.duration_s:
                    rho = relax(rho, event.duration_s, m)
            elif isinstance(event, DelayEvent):
                rho = evolve_free(rho, event.duration_s, m, noise=noise, pair=event.pair)
            elif isinstance(event, GradientEvent):
                rho = apply_gradient(rho)
            elif isinstance(event, ShapedEvent):
                grid = grape.ControlGrid.load(seq.resolve(event))
                if grid.n != m.n:
                    raise SequenceError(f"shaped pulse {event.path} drives {grid.n} spins, molecule has {m.n}")
                rho = apply_unitary(rho, grape.propagator(grid, m))
                if noise:
                    rho = relax(rho, grid.duration_s, m)
    return rho


def coupling_delay(m: MoleculeConfig, j: int, k: int, theta: float) -> float:
    """Delay after which the J_jk evolution equals exp(-iθ·I_z^j I_z^k) up to a global phase.

    exp(-iθ·I_z I_z) repeats up to sign every 4π, so θ (negated for J < 0)
    is wrapped into [0, 4π).
    """
    coupling = m.coupling(j, k)
    if coupling == 0.0:
        raise SequenceError(f"spins {j} and {k} are uncoupled; controlled transfer needs J != 0")
    turns = (theta if coupling > 0 else -theta) % (4 * math.pi)
    return turns / (2 * math.pi * abs(coupling))


def prepare_pps_sequence(
    m: MoleculeConfig,
    phi1: float = DEFAULT_PHI1,
    phi2: float = DEFAULT_PHI2,
    template: Path = PPS_TEMPLATE,
) -> PulseSequence:
    """Fill the controlled-transfer template; angles in radians.

    φ1 is split evenly over the spin-2 transfer pulses. The spin-3 pulses are
    (π + φ2)/2 and (π − φ2)/2, so they sum to an inversion in one control
    state and leave a net φ2 in the other. cos φ1 = −1/7 and cos φ2 = −5/7
    give the exact pseudo-pure state.
    """
    if m.n != 3:
        raise SequenceError("pseudo-pure preparation is defined for three spins")
    text = Template(template.read_text()).substitute(
        half1=repr(math.degrees(phi1 / 2)),
        open2=repr(math.degrees((math.pi + phi2) / 2)),
        close2=repr(math.degrees((math.pi - phi2) / 2)),
        tau12=repr(coupling_delay(m, 1, 2, math.pi)),
        tau13=repr(coupling_delay(m, 1, 3, math.pi)),
        tau23=repr(coupling_delay(m, 2, 3, math.pi)),
        rot_dur=repr(PPS_ROTATION_S),
    )
    return parse_sequence(text, n=m.n, base_dir=str(template.parent))


def pps_fidelity(rho: DensityMatrix, eps: Polarization | float) -> float:
    """Normalized overlap of traceless parts with the |0…0> pseudo-pure state."""
    target = pps(basis_state("0" * rho.n), eps)
    eye = np.eye(rho.dim) / rho.dim
    a = rho.matrix - eye
    b = target.matrix - eye
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-15 or nb < 1e-15:
        raise StateError("state has no deviation from the identity")
    return float(np.real(np.vdot(b, a)) / (na * nb))


@dataclass(frozen=True)
class PpsPreparation:
    state: DensityMatrix
    fidelity: float
    passed: bool
    gate: float
    sequence: Optional[PulseSequence] = None


def prepare_pps(
    m: MoleculeConfig,
    eps: Polarization | float = 1e-5,
    phi1: float = DEFAULT_PHI1,
    phi2: float = DEFAULT_PHI2,
    ideal: bool = False,
    noise: bool = False,
) -> PpsPreparation:
    gate = pps_gate()
    if ideal:
        state = pps(basis_state("0" * m.n), eps)
        return PpsPreparation(state=state, fidelity=1.0, passed=True, gate=gate)
    seq = prepare_pps_sequence(m, phi1, phi2)
    state = run_sequence(thermal_deviation_state(m.n, eps), seq, m, noise=noise)
    fid = pps_fidelity(state, eps)
    passed = fid >= gate
    if not passed:
        logger.warning(
            "pseudo-pure state below gate",
            extra={"extra": {"fidelity": fid, "gate": gate, "phi1_deg": math.degrees(phi1), "phi2_deg": math.degrees(phi2)}},
        )
    return PpsPreparation(state=state, fidelity=fid, passed=passed, gate=gate, sequence=seq)
