from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numpy.typing as npt

from src.linalg import (
    DEFAULT_TOL,
    ComplexMatrix,
    SIGMA_X,
    SIGMA_Y,
    as_matrix,
    embed,
    is_unitary,
    kron,
    max_qubits,
    spin_operator,
)

NORM_TOL = 1e-10
PSD_FLOOR = -1e-9


class StateError(ValueError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128, copy=True)
    arr.flags.writeable = False
    return arr


def _check_qubit(q: int, n: int) -> None:
    if q < 1 or q > n:
        raise StateError(f"qubit {q} out of range 1..{n}")


@dataclass(frozen=True, eq=False)
class PureState:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if self.n < 1 or self.n > max_qubits():
            raise StateError(f"qubit count {self.n} outside 1..{max_qubits()}")
        if amps.shape[0] != 2**self.n:
            raise StateError("amplitude count does not match 2^n")
        if not np.all(np.isfinite(amps)):
            raise StateError("amplitudes must be finite")
        if abs(float(np.vdot(amps, amps).real) - 1.0) > NORM_TOL:
            raise StateError("state is not normalized")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def from_amplitudes(cls, amplitudes: npt.ArrayLike, normalize: bool = False) -> "PureState":
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        if normalize:
            norm = float(np.linalg.norm(amps))
            if norm == 0.0:
                raise StateError("cannot normalize the zero vector")
            amps = amps / norm
        n = int(round(math.log2(amps.shape[0]))) if amps.shape[0] > 0 else 0
        return cls(n=n, amplitudes=amps)

    def projector(self) -> ComplexMatrix:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    n: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = as_matrix(self.matrix)
        dim = 2**self.n
        if m.shape != (dim, dim):
            raise StateError("density matrix shape does not match 2^n")
        if float(np.abs(m - m.conj().T).max()) > NORM_TOL:
            raise StateError("density matrix is not hermitian")
        if abs(complex(np.trace(m)) - 1.0) > NORM_TOL:
            raise StateError("density matrix trace is not 1")
        if float(np.linalg.eigvalsh((m + m.conj().T) / 2).min()) < PSD_FLOOR:
            raise StateError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def from_pure(cls, psi: PureState) -> "DensityMatrix":
        return cls(n=psi.n, matrix=psi.projector())

    @property
    def dim(self) -> int:
        return 2**self.n


@dataclass(frozen=True)
class Polarization:
    epsilon: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.epsilon) or not 0.0 <= self.epsilon <= 1.0:
            raise StateError("polarization must lie in [0, 1]")

    @classmethod
    def of(cls, value: "Polarization | float") -> "Polarization":
        return value if isinstance(value, Polarization) else cls(float(value))


def basis_state(bits: str | Sequence[int]) -> PureState:
    """Computational basis state; ``basis_state("010")`` has qubit 2 in |1>."""
    digits = [int(b) for b in bits]
    if not digits or any(d not in (0, 1) for d in digits):
        raise StateError("basis label must be a non-empty string of 0/1")
    amps = np.zeros(2 ** len(digits), dtype=np.complex128)
    amps[int("".join(str(d) for d in digits), 2)] = 1.0
    return PureState(n=len(digits), amplitudes=amps)


def plus_state() -> PureState:
    return PureState(n=1, amplitudes=np.array([1, 1]) / math.sqrt(2.0))


def tensor(*states: PureState) -> PureState:
    if not states:
        raise StateError("tensor needs at least one state")
    amps = kron(*[s.amplitudes.reshape(-1, 1) for s in states]).reshape(-1)
    return PureState(n=sum(s.n for s in states), amplitudes=amps)


def random_pure_state(n: int, rng: np.random.Generator) -> PureState:
    raw = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return PureState.from_amplitudes(raw, normalize=True)


def maximally_mixed(n: int) -> DensityMatrix:
    return DensityMatrix(n=n, matrix=np.eye(2**n) / 2**n)


def pps(psi: PureState, eps: Polarization | float) -> DensityMatrix:
    e = Polarization.of(eps).epsilon
    dim = 2**psi.n
    return DensityMatrix(n=psi.n, matrix=(1.0 - e) / dim * np.eye(dim) + e * psi.projector())


def thermal_deviation_state(n: int, eps: Polarization | float) -> DensityMatrix:
    """High-temperature homonuclear thermal state I/N + (eps/N)·Σ 2I_z^j."""
    e = Polarization.of(eps).epsilon
    if e * n > 1.0:
        raise StateError("polarization too large for a positive thermal state")
    dim = 2**n
    zsum = sum(2 * spin_operator("z", q, n) for q in range(1, n + 1))
    return DensityMatrix(n=n, matrix=(np.eye(dim) + e * zsum) / dim)


def apply_unitary(rho: DensityMatrix, u: npt.ArrayLike) -> DensityMatrix:
    u = as_matrix(u)
    if u.shape != (rho.dim, rho.dim):
        raise StateError("unitary dimension does not match state")
    if not is_unitary(u, DEFAULT_TOL):
        raise StateError("operator is not unitary")
    out = u @ rho.matrix @ u.conj().T
    return DensityMatrix(n=rho.n, matrix=(out + out.conj().T) / 2)


def expectation(rho: DensityMatrix, op: npt.ArrayLike) -> complex:
    return complex(np.trace(rho.matrix @ as_matrix(op)))


def xy_magnetization(rho: DensityMatrix, q: int) -> complex:
    _check_qubit(q, rho.n)
    return expectation(rho, embed(SIGMA_X + 1j * SIGMA_Y, [q], rho.n))


def bloch_vector(rho: DensityMatrix) -> tuple[float, float, float]:
    if rho.n != 1:
        raise StateError("bloch vector needs a single-qubit state")
    m = rho.matrix
    return (2 * float(m[0, 1].real), -2 * float(m[0, 1].imag), float((m[0, 0] - m[1, 1]).real))


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    keep = sorted(set(keep))
    for q in keep:
        _check_qubit(q, rho.n)
    if not keep:
        raise StateError("keep at least one qubit")
    n = rho.n
    tensor_ = rho.matrix.reshape([2] * (2 * n))
    traced = [q for q in range(n) if q + 1 not in keep]
    # trace highest axes first so lower indices stay valid
    for ax in sorted(traced, reverse=True):
        cur = tensor_.ndim // 2
        tensor_ = np.trace(tensor_, axis1=ax, axis2=ax + cur)
    k = len(keep)
    return DensityMatrix(n=k, matrix=tensor_.reshape(2**k, 2**k))


def dephase(rho: DensityMatrix, q: int, t: float, t2: float) -> DensityMatrix:
    _check_qubit(q, rho.n)
    if t < 0:
        raise StateError("negative dephasing time")
    if t2 <= 0:
        raise StateError("T2 must be positive")
    factor = math.exp(-t / t2)
    bits = (np.arange(rho.dim) >> (rho.n - q)) & 1
    differs = bits[:, None] != bits[None, :]
    out = np.where(differs, rho.matrix * factor, rho.matrix)
    return DensityMatrix(n=rho.n, matrix=out)


def purity(rho: DensityMatrix) -> float:
    return float(np.trace(rho.matrix @ rho.matrix).real)


def overlap(a: PureState, b: PureState) -> float:
    if a.n != b.n:
        raise StateError("dimension mismatch")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
