"""Braid-group, Temperley-Lieb and Yang-Baxter algebra.

The two-dimensional operators live on a single qubit:
``A(θ) = exp(-i 2θ I_z)`` and ``B(θ) = exp(+i 2θ I_x)``. The four-dimensional
helpers at the bottom of the module are the standard U_q(sl2) representation,
used as caller-supplied inputs for the generic residual checkers.
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
import numpy.typing as npt

from src.linalg import (
    DEFAULT_TOL,
    HADAMARD,
    I2,
    SIGMA_X,
    ComplexMatrix,
    as_matrix,
    embed,
    equal_up_to_global_phase,
)

logger = logging.getLogger("ybxsim.braid")

TWO_PI = 2.0 * math.pi
SQRT2 = math.sqrt(2.0)
CONSISTENCY_CHECK_TOL = 1e-8
_DEGENERATE_TOL = 1e-12

RMatrix2 = Callable[[float, float], npt.ArrayLike]
RMatrix1 = Callable[[float], npt.ArrayLike]


class BraidError(ValueError):
    pass


def canonical_angle(theta: float) -> float:
    out = math.fmod(theta, TWO_PI)
    if out < 0:
        out += TWO_PI
    # fmod of a value just below 0 can round up to exactly 2π
    return 0.0 if out >= TWO_PI else out


@dataclass(frozen=True)
class SpectralAngles:
    theta1: float
    theta2: float
    theta3: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(t) for t in (self.theta1, self.theta2, self.theta3)):
            raise BraidError("spectral angles must be finite")

    @classmethod
    def of(cls, value: "SpectralAngles | Sequence[float]") -> "SpectralAngles":
        if isinstance(value, SpectralAngles):
            return value
        t1, t2, t3 = (float(v) for v in value)
        return cls(t1, t2, t3)

    def canonical(self) -> "SpectralAngles":
        return SpectralAngles(
            canonical_angle(self.theta1),
            canonical_angle(self.theta2),
            canonical_angle(self.theta3),
        )

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.theta1, self.theta2, self.theta3)


@dataclass(frozen=True)
class Rapidity:
    w: float
    zeta: int = 1

    def __post_init__(self) -> None:
        if not math.isfinite(self.w):
            raise BraidError("rapidity must be finite")
        if self.zeta not in (-1, 1):
            raise BraidError("zeta must be +1 or -1")


class TemperleyLieb(NamedTuple):
    t1: ComplexMatrix
    t2: ComplexMatrix
    d: float


class RapidityAngle(NamedTuple):
    theta: float
    gamma_phase: complex


def braid_A() -> ComplexMatrix:
    return cmath.exp(-1j * math.pi / 8) * np.diag([1.0, 1j]).astype(np.complex128)


def braid_B() -> ComplexMatrix:
    return (cmath.exp(-1j * math.pi / 8) / 2) * np.array(
        [[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=np.complex128
    )


def A_theta(theta: float) -> ComplexMatrix:
    return np.diag([cmath.exp(-1j * theta), cmath.exp(1j * theta)]).astype(np.complex128)


def B_theta(theta: float) -> ComplexMatrix:
    return math.cos(theta) * I2 + 1j * math.sin(theta) * SIGMA_X


def braid_limit_phases() -> dict[str, complex]:
    """Global phases with braid_A() = λ_A·A(π/4) and braid_B() = λ_B·B(−π/4)."""
    a = equal_up_to_global_phase(braid_A(), A_theta(math.pi / 4))
    b = equal_up_to_global_phase(braid_B(), B_theta(-math.pi / 4))
    if not (a.equal and b.equal):
        raise BraidError("braid matrices do not match the parametric family")
    return {"A": a.phase, "B": b.phase}


def tl_generators() -> TemperleyLieb:
    t1 = SQRT2 * np.diag([1.0, 0.0]).astype(np.complex128)
    t2 = (1 / SQRT2) * np.array([[1, -1], [-1, 1]], dtype=np.complex128)
    return TemperleyLieb(t1, t2, SQRT2)


def tl_residuals(t1: npt.ArrayLike, t2: npt.ArrayLike, d: float) -> dict[str, float]:
    t1, t2 = as_matrix(t1), as_matrix(t2)
    return {
        "t1_squared": float(np.linalg.norm(t1 @ t1 - d * t1)),
        "t2_squared": float(np.linalg.norm(t2 @ t2 - d * t2)),
        "t1_t2_t1": float(np.linalg.norm(t1 @ t2 @ t1 - t1)),
        "t2_t1_t2": float(np.linalg.norm(t2 @ t1 @ t2 - t2)),
    }


def yang_baxterize(theta: float, which: int) -> ComplexMatrix:
    """a·I + b·T with a = e^{iθ} and b = e^{iθ}(e^{-2iθ} - 1)/√2."""
    gens = tl_generators()
    if which == 12:
        t, expected = gens.t1, A_theta(theta)
    elif which == 23:
        t, expected = gens.t2, B_theta(theta)
    else:
        raise BraidError("which must be 12 or 23")
    a = cmath.exp(1j * theta)
    b = a * (cmath.exp(-2j * theta) - 1) / SQRT2
    out = a * I2 + b * t
    if np.linalg.norm(out - expected) > 1e-12 * max(1.0, abs(theta)):
        raise BraidError("yang-baxterized operator does not match the parametric form")
    return out


def _rapidity_parts(r: Rapidity) -> tuple[complex, complex]:
    numerator = complex(1 + r.w * r.w, 2 * r.zeta * r.w)
    return numerator, numerator.conjugate()


def theta_from_rapidity(r: Rapidity) -> RapidityAngle:
    numerator, denominator = _rapidity_parts(r)
    ratio = numerator / denominator
    theta = -cmath.phase(ratio) / 2
    return RapidityAngle(theta, cmath.exp(1j * theta))


def yang_baxter_coefficients(r: Rapidity) -> tuple[complex, complex]:
    """a(u) = Γ(u) and b(u) = Γ(u)·2√2·iζw / ((1 + w²) − 2iζw)."""
    _, denominator = _rapidity_parts(r)
    gamma = theta_from_rapidity(r).gamma_phase
    return gamma, gamma * (2 * SQRT2 * 1j * r.zeta * r.w) / denominator


def ybe2d_residual(
    angles: SpectralAngles | Sequence[float],
    first: Callable[[float], ComplexMatrix] = A_theta,
    second: Callable[[float], ComplexMatrix] = B_theta,
) -> float:
    t1, t2, t3 = SpectralAngles.of(angles).as_tuple()
    lhs = first(t1) @ second(t2) @ first(t3)
    rhs = second(t3) @ first(t2) @ second(t1)
    return float(np.linalg.norm(lhs - rhs))


def theta2_consistent(theta1: float, theta3: float) -> float:
    s = math.sin(theta1 + theta3)
    c = math.cos(theta1 - theta3)
    if abs(s) <= _DEGENERATE_TOL and abs(c) <= _DEGENERATE_TOL:
        raise BraidError("consistency relation indeterminate")
    theta2 = math.atan2(s, c)
    residual = ybe2d_residual((theta1, theta2, theta3))
    if residual > CONSISTENCY_CHECK_TOL:
        logger.error(
            "consistency branch failed",
            extra={"extra": {"theta1": theta1, "theta3": theta3, "residual": residual}},
        )
        raise BraidError(f"consistency relation residual {residual:.3e} exceeds tolerance")
    return theta2


def braid_relations_residual(sigmas: Sequence[npt.ArrayLike]) -> float:
    """Max residual of far commutation, invertibility and the adjacent braid relation.

    Generators are full matrices on a common space (use ``embed`` or
    ``braid_generators`` to place two-strand operators).
    """
    mats = [as_matrix(s) for s in sigmas]
    if not mats:
        raise BraidError("no generators")
    shape = mats[0].shape
    if shape[0] != shape[1] or any(m.shape != shape for m in mats):
        raise BraidError("generators must be square and share one dimension")
    eye = np.eye(shape[0])
    worst = 0.0
    for j, sj in enumerate(mats):
        if np.linalg.cond(sj) > 1e12:
            raise BraidError(f"generator {j + 1} is singular")
        worst = max(worst, float(np.linalg.norm(sj @ np.linalg.inv(sj) - eye)))
        for k in range(j + 2, len(mats)):
            sk = mats[k]
            worst = max(worst, float(np.linalg.norm(sj @ sk - sk @ sj)))
        if j + 1 < len(mats):
            sn = mats[j + 1]
            worst = max(worst, float(np.linalg.norm(sj @ sn @ sj - sn @ sj @ sn)))
    return worst


def _four(m: npt.ArrayLike) -> ComplexMatrix:
    out = as_matrix(m)
    if out.shape != (4, 4):
        raise BraidError("R-matrix must be 4x4")
    return out


def ybe_additive_residual(R: RMatrix2, v1: float, v2: float, v3: float) -> float:
    r12 = embed(_four(R(v1, v2)), [1, 2], 3)
    r13 = embed(_four(R(v1, v3)), [1, 3], 3)
    r23 = embed(_four(R(v2, v3)), [2, 3], 3)
    return float(np.linalg.norm(r12 @ r13 @ r23 - r23 @ r13 @ r12))


def ybe_multiplicative_residual(Rc: RMatrix1, x: float, y: float) -> float:
    def r12(arg: float) -> ComplexMatrix:
        return embed(_four(Rc(arg)), [1, 2], 3)

    def r23(arg: float) -> ComplexMatrix:
        return embed(_four(Rc(arg)), [2, 3], 3)

    lhs = r12(x) @ r23(x * y) @ r12(y)
    rhs = r23(y) @ r12(x * y) @ r23(x)
    return float(np.linalg.norm(lhs - rhs))


def braid_generators(r_check: npt.ArrayLike, n: int) -> list[ComplexMatrix]:
    """σ_j = Ř on strands (j, j+1) for j = 1..n-1."""
    r = _four(r_check)
    if n < 2:
        raise BraidError("need at least two strands")
    return [embed(r, [j, j + 1], n) for j in range(1, n)]


def temperley_lieb_4d(q: float) -> ComplexMatrix:
    """E = |v><v| with v = √q|01> − |10>/√q, so that E² = (q + 1/q)E."""
    if q <= 0:
        raise BraidError("q must be positive")
    v = np.array([0.0, math.sqrt(q), -1.0 / math.sqrt(q), 0.0], dtype=np.complex128)
    return np.outer(v, v.conj())


def kauffman_braid(q: float) -> ComplexMatrix:
    a = 1j * math.sqrt(q)
    return a * np.eye(4) + (1 / a) * temperley_lieb_4d(q)


def tl_r_matrix(q: float) -> Callable[[float], ComplexMatrix]:
    """Multiplicative solution x -> I + (x − 1)/(q − x/q)·E."""
    e = temperley_lieb_4d(q)

    def r_check(x: float) -> ComplexMatrix:
        denom = q - x / q
        if abs(denom) < DEFAULT_TOL:
            raise BraidError("spectral parameter hits the pole x = q^2")
        return np.eye(4, dtype=np.complex128) + ((x - 1) / denom) * e

    return r_check


def hadamard_conjugate(theta: float) -> ComplexMatrix:
    """H·A(−θ)·H, which equals B(θ)."""
    return HADAMARD @ A_theta(-theta) @ HADAMARD
