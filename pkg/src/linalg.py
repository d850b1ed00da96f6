"""Dense complex linear algebra used by every other module.

Qubit 1 is the most significant tensor factor: ``|q1 q2 ... qn>`` maps to the
row index with q1 as the high bit.
"""
from __future__ import annotations

import math
import os
from typing import NamedTuple, Sequence

import numpy as np
import numpy.typing as npt

ComplexMatrix = npt.NDArray[np.complex128]

DEFAULT_TOL = float(os.getenv("YBXSIM_TOL", "1e-10"))

I2 = np.eye(2, dtype=np.complex128)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2.0)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]],
    dtype=np.complex128,
)
CZ = np.diag([1, 1, 1, -1]).astype(np.complex128)

_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


class LinalgError(ValueError):
    pass


class PhaseMatch(NamedTuple):
    equal: bool
    phase: complex


def max_qubits() -> int:
    return int(os.getenv("YBXSIM_MAX_QUBITS", "12"))


def as_matrix(data: npt.ArrayLike) -> ComplexMatrix:
    m = np.asarray(data, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise LinalgError("expected a non-empty 2-d matrix")
    if not np.all(np.isfinite(m)):
        raise LinalgError("matrix has non-finite entries")
    return m


def _square(m: npt.ArrayLike) -> ComplexMatrix:
    out = as_matrix(m)
    if out.shape[0] != out.shape[1]:
        raise LinalgError("matrix is not square")
    return out


def kron(*factors: npt.ArrayLike) -> ComplexMatrix:
    if not factors:
        raise LinalgError("kron needs at least one factor")
    dim = 1
    for f in factors:
        dim *= as_matrix(f).shape[0]
    if dim > 2 ** max_qubits():
        raise LinalgError(f"dimension {dim} exceeds 2^{max_qubits()}")
    out = np.ones((1, 1), dtype=np.complex128)
    for f in factors:
        out = np.kron(out, as_matrix(f))
    return out


def embed(op: npt.ArrayLike, sites: Sequence[int], n: int) -> ComplexMatrix:
    """Place a k-qubit operator on the given 1-based sites of an n-qubit register.

    The operator's own tensor order follows the order of ``sites``, so
    ``embed(CNOT, [3, 1], 3)`` uses qubit 3 as control.
    """
    mat = _square(op)
    sites = list(sites)
    k = len(sites)
    if n < 1 or n > max_qubits():
        raise LinalgError(f"qubit count {n} outside 1..{max_qubits()}")
    if k == 0 or mat.shape[0] != 2**k:
        raise LinalgError("operator dimension does not match number of sites")
    if len(set(sites)) != k:
        raise LinalgError("duplicate site")
    if any(s < 1 or s > n for s in sites):
        raise LinalgError("site out of range")

    sites0 = [s - 1 for s in sites]
    rest0 = [q for q in range(n) if q not in sites0]
    full = np.kron(mat, np.eye(2 ** (n - k), dtype=np.complex128))
    # axes of `full` are ordered sites0 + rest0; move them back to 0..n-1
    inv = np.argsort(sites0 + rest0)
    tensor = full.reshape([2] * (2 * n))
    tensor = tensor.transpose(list(inv) + [n + i for i in inv])
    return tensor.reshape(2**n, 2**n)


def dagger(m: npt.ArrayLike) -> ComplexMatrix:
    return as_matrix(m).conj().T


def commutator(a: npt.ArrayLike, b: npt.ArrayLike) -> ComplexMatrix:
    a, b = _square(a), _square(b)
    if a.shape != b.shape:
        raise LinalgError("shape mismatch")
    return a @ b - b @ a


def frobenius_distance(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise LinalgError("shape mismatch")
    return float(np.linalg.norm(a - b, ord="fro"))


def is_unitary(u: npt.ArrayLike, tol: float = DEFAULT_TOL) -> bool:
    u = _square(u)
    return frobenius_distance(u.conj().T @ u, np.eye(u.shape[0])) <= tol


def is_hermitian(h: npt.ArrayLike, tol: float = DEFAULT_TOL) -> bool:
    h = _square(h)
    return frobenius_distance(h, h.conj().T) <= tol


def equal_up_to_global_phase(a: npt.ArrayLike, b: npt.ArrayLike, tol: float = DEFAULT_TOL) -> PhaseMatch:
    """Find unit-modulus λ with a ≈ λ·b in Frobenius norm."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise LinalgError("shape mismatch")
    idx = np.unravel_index(int(np.argmax(np.abs(a))), a.shape)
    if abs(a[idx]) <= tol:
        raise LinalgError("phase undefined for a zero matrix")
    if abs(b[idx]) <= tol:
        return PhaseMatch(False, 1.0 + 0j)
    ratio = complex(a[idx] / b[idx])
    phase = ratio / abs(ratio)
    return PhaseMatch(frobenius_distance(a, phase * b) <= tol, phase)


def unitary_from_hermitian(h: npt.ArrayLike, t: float) -> ComplexMatrix:
    """exp(-i h t) through the eigendecomposition of h."""
    h = _square(h)
    asymmetry = float(np.abs(h - h.conj().T).max())
    if asymmetry > 1e-12 * max(1.0, float(np.abs(h).max())):
        raise LinalgError(f"generator is not hermitian (max asymmetry {asymmetry:.3e})")
    evals, vecs = np.linalg.eigh((h + h.conj().T) / 2)
    return (vecs * np.exp(-1j * evals * t)) @ vecs.conj().T


def expm_taylor(m: npt.ArrayLike, terms: int = 20) -> ComplexMatrix:
    """Scaling-and-squaring Taylor exponential, independent of eigh/expm."""
    m = _square(m)
    norm = float(np.linalg.norm(m, ord=1))
    squarings = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0.5 else 0
    scaled = m / (2.0**squarings)
    result = np.eye(m.shape[0], dtype=np.complex128)
    term = np.eye(m.shape[0], dtype=np.complex128)
    for k in range(1, terms + 1):
        term = term @ scaled / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result


def pauli(axis: str) -> ComplexMatrix:
    try:
        return _PAULI[axis.lower()].copy()
    except KeyError:
        raise LinalgError(f"unknown axis {axis!r}") from None


def spin_operator(axis: str, q: int, n: int) -> ComplexMatrix:
    """I_axis on qubit q (spin-1/2: half the Pauli matrix)."""
    return embed(pauli(axis) / 2, [q], n)


def rx(phi: float) -> ComplexMatrix:
    return math.cos(phi / 2) * I2 - 1j * math.sin(phi / 2) * SIGMA_X


def ry(phi: float) -> ComplexMatrix:
    return math.cos(phi / 2) * I2 - 1j * math.sin(phi / 2) * SIGMA_Y


def rz(phi: float) -> ComplexMatrix:
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)]).astype(np.complex128)
