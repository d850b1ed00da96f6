from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from src.linalg import ComplexMatrix, max_qubits

logger = logging.getLogger("ybxsim.molecule")

FRAMES = ("lab", "rotating")


class MoleculeError(ValueError):
    pass


@dataclass(frozen=True)
class MoleculeConfig:
    """Spin system in Hz; ``frame="rotating"`` puts every spin on resonance."""

    n: int
    shifts_hz: Tuple[float, ...]
    j_hz: Tuple[Tuple[float, ...], ...]
    t2_s: Tuple[float, ...]
    frame: str = "lab"
    label: str = ""

    def __post_init__(self) -> None:
        if self.n < 1 or self.n > max_qubits():
            raise MoleculeError(f"spin count {self.n} outside 1..{max_qubits()}")
        if len(self.shifts_hz) != self.n or len(self.t2_s) != self.n:
            raise MoleculeError("shifts_hz and t2_s need one value per spin")
        if len(self.j_hz) != self.n or any(len(row) != self.n for row in self.j_hz):
            raise MoleculeError("j_hz must be an n x n matrix")
        j = np.asarray(self.j_hz, dtype=float)
        if not np.allclose(j, j.T, rtol=0.0, atol=1e-12):
            raise MoleculeError("j_hz must be symmetric")
        if np.any(np.diag(j) != 0.0):
            raise MoleculeError("j_hz diagonal must be zero")
        if any(not t > 0 for t in self.t2_s):
            raise MoleculeError("t2_s values must be positive")
        if not all(math.isfinite(v) for v in (*self.shifts_hz, *j.reshape(-1), *self.t2_s)):
            raise MoleculeError("molecule parameters must be finite")
        if self.frame not in FRAMES:
            raise MoleculeError(f"frame must be one of {FRAMES}")

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "MoleculeConfig":
        try:
            n = int(payload["n"])
            return cls(
                n=n,
                shifts_hz=tuple(float(v) for v in payload.get("shifts_hz", [0.0] * n)),
                j_hz=tuple(tuple(float(v) for v in row) for row in payload.get("j_hz", [[0.0] * n] * n)),
                t2_s=tuple(float(v) for v in payload["t2_s"]),
                frame=str(payload.get("frame", "lab")),
                label=str(payload.get("label", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MoleculeError):
                raise
            raise MoleculeError(f"invalid molecule description: {exc}") from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "MoleculeConfig":
        try:
            payload = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise MoleculeError(f"cannot read molecule file {path}: {exc}") from exc
        if not isinstance(payload, dict):
            raise MoleculeError("molecule file must hold a JSON object")
        return cls.from_dict(payload)

    @classmethod
    def bare(cls, n: int = 1, t2_s: float = 1.0) -> "MoleculeConfig":
        """Uncoupled on-resonance spins: zero drift."""
        return cls(
            n=n,
            shifts_hz=(0.0,) * n,
            j_hz=tuple((0.0,) * n for _ in range(n)),
            t2_s=(t2_s,) * n,
            frame="rotating",
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "shifts_hz": list(self.shifts_hz),
            "j_hz": [list(row) for row in self.j_hz],
            "t2_s": list(self.t2_s),
            "frame": self.frame,
            "label": self.label,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def effective_shifts(self) -> Tuple[float, ...]:
        if self.frame == "rotating":
            return (0.0,) * self.n
        return self.shifts_hz

    def coupling(self, j: int, k: int) -> float:
        return self.j_hz[j - 1][k - 1]


def z_eigenvalues(q: int, n: int) -> np.ndarray:
    """Diagonal of I_z on qubit q: +1/2 for bit 0, −1/2 for bit 1."""
    bits = (np.arange(2**n) >> (n - q)) & 1
    return 0.5 - bits.astype(float)


def hamiltonian_diagonal(
    m: MoleculeConfig,
    shift_offset_hz: float = 0.0,
    pair: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Diagonal of H in rad/s. With ``pair`` only that J term is kept."""
    diag = np.zeros(2**m.n)
    z = [z_eigenvalues(q, m.n) for q in range(1, m.n + 1)]
    if pair is not None:
        j, k = pair
        return 2 * math.pi * m.coupling(j, k) * z[j - 1] * z[k - 1]
    for j, nu in enumerate(m.effective_shifts()):
        diag += 2 * math.pi * (nu + shift_offset_hz) * z[j]
    for j in range(m.n):
        for k in range(j + 1, m.n):
            diag += 2 * math.pi * m.j_hz[j][k] * z[j] * z[k]
    return diag


def hamiltonian(m: MoleculeConfig, shift_offset_hz: float = 0.0) -> ComplexMatrix:
    return np.diag(hamiltonian_diagonal(m, shift_offset_hz)).astype(np.complex128)
