"""Gradient-ascent pulse engineering on piecewise-constant RF controls.

Amplitudes are indexed ``[segment, spin, quadrature]`` with quadrature 0 = x
and 1 = y, in rad/s. Segment k evolves under

    H_k = H_drift(offset) + s · Σ_j (u[k,j,0]·I_x^j + u[k,j,1]·I_y^j)

for ``dt`` seconds, s being the RF scale of the ensemble member.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import numpy.typing as npt
from scipy.optimize import OptimizeResult, minimize

from src import metrics
from src.linalg import ComplexMatrix, as_matrix, embed, is_unitary, spin_operator
from src.molecule import MoleculeConfig, hamiltonian_diagonal
from src.observability import span
from src.pulse_sequence import ShapedEvent
from src.settings import GrapeSettings

logger = logging.getLogger("ybxsim.grape")

_DEGENERATE = 1e-10


class GrapeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ControlGrid:
    n: int
    dt_s: float
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=float, copy=True)
        if amps.ndim != 3 or amps.shape[0] < 1 or amps.shape[1:] != (self.n, 2):
            raise GrapeError("amplitudes must have shape (segments, n, 2) with segments >= 1")
        if not self.dt_s > 0:
            raise GrapeError("dt must be positive")
        if not np.all(np.isfinite(amps)):
            raise GrapeError("amplitudes must be finite")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def segments(self) -> int:
        return int(self.amplitudes.shape[0])

    @property
    def duration_s(self) -> float:
        return self.segments * self.dt_s

    @classmethod
    def zeros(cls, segments: int, n: int, dt_s: float) -> "ControlGrid":
        return cls(n=n, dt_s=dt_s, amplitudes=np.zeros((segments, n, 2)))

    def with_amplitudes(self, amplitudes: npt.ArrayLike) -> "ControlGrid":
        return ControlGrid(n=self.n, dt_s=self.dt_s, amplitudes=np.asarray(amplitudes, dtype=float))

    def max_amplitude(self) -> float:
        return float(np.sqrt((self.amplitudes**2).sum(axis=2)).max())

    def check_cap(self, cap: float) -> None:
        if self.max_amplitude() > cap * (1 + 1e-12):
            raise GrapeError(f"amplitude exceeds cap {cap:.6g} rad/s")

    def to_shaped_event(self, path: str | Path) -> ShapedEvent:
        """Save the grid and return the sequence event that plays it."""
        self.save(path)
        return ShapedEvent(path=str(path))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "N": self.segments,
            "dt_s": self.dt_s,
            "amplitudes": self.amplitudes.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ControlGrid":
        try:
            grid = cls(
                n=int(payload["n"]),
                dt_s=float(payload["dt_s"]),
                amplitudes=np.asarray(payload["amplitudes"], dtype=float),
            )
        except (KeyError, TypeError) as exc:
            raise GrapeError(f"invalid control grid: {exc}") from exc
        if "N" in payload and int(payload["N"]) != grid.segments:
            raise GrapeError("segment count N does not match amplitudes")
        return grid

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ControlGrid":
        try:
            payload = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise GrapeError(f"cannot read control grid {path}: {exc}") from exc
        return cls.from_dict(payload)


@dataclass(frozen=True)
class EnsembleMember:
    rf_scale: float = 1.0
    shift_offset_hz: float = 0.0
    weight: float = 1.0


@dataclass(frozen=True)
class RobustnessEnsemble:
    """RF scales × shift offsets; ``weights`` follow that product order."""

    rf_scales: Tuple[float, ...] = (1.0,)
    shift_offsets_hz: Tuple[float, ...] = (0.0,)
    weights: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if not self.rf_scales or not self.shift_offsets_hz:
            raise GrapeError("ensemble needs at least one rf scale and one offset")
        size = len(self.rf_scales) * len(self.shift_offsets_hz)
        if self.weights is not None:
            if len(self.weights) != size:
                raise GrapeError(f"ensemble needs {size} weights")
            if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-12:
                raise GrapeError("weights must be non-negative and sum to 1")

    @classmethod
    def trivial(cls) -> "RobustnessEnsemble":
        return cls()

    @classmethod
    def from_settings(cls, settings: GrapeSettings) -> "RobustnessEnsemble":
        return cls(
            rf_scales=tuple(settings.rf_scales),
            shift_offsets_hz=tuple(settings.shift_offsets_hz),
            weights=settings.weights,
        )

    def members(self) -> List[EnsembleMember]:
        pairs = list(itertools.product(self.rf_scales, self.shift_offsets_hz))
        weights = self.weights or tuple(1.0 / len(pairs) for _ in pairs)
        return [EnsembleMember(s, o, w) for (s, o), w in zip(pairs, weights)]


def _control_operators(n: int) -> np.ndarray:
    """Stack of I_x^j, I_y^j with shape (n, 2, d, d)."""
    return np.array([[spin_operator("x", j, n), spin_operator("y", j, n)] for j in range(1, n + 1)])


def _check_dimensions(c: ControlGrid, m: MoleculeConfig) -> None:
    if c.n != m.n:
        raise GrapeError(f"control grid has {c.n} spins, molecule has {m.n}")


def _segment_eigensystems(
    c: ControlGrid, m: MoleculeConfig, member: EnsembleMember, ctrl: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    drift = np.diag(hamiltonian_diagonal(m, member.shift_offset_hz)).astype(np.complex128)
    h = drift[None, :, :] + member.rf_scale * np.einsum("kjq,jqab->kab", c.amplitudes, ctrl)
    return np.linalg.eigh(h)


def _segment_unitaries(evals: np.ndarray, vecs: np.ndarray, dt: float) -> np.ndarray:
    phases = np.exp(-1j * evals * dt)
    return (vecs * phases[:, None, :]) @ vecs.conj().transpose(0, 2, 1)


def propagator(c: ControlGrid, m: MoleculeConfig, member: Optional[EnsembleMember] = None) -> ComplexMatrix:
    _check_dimensions(c, m)
    member = member or EnsembleMember()
    evals, vecs = _segment_eigensystems(c, m, member, _control_operators(m.n))
    u = np.eye(2**m.n, dtype=np.complex128)
    for uk in _segment_unitaries(evals, vecs, c.dt_s):
        u = uk @ u
    return u


def fidelity(u: npt.ArrayLike, target: npt.ArrayLike) -> float:
    u, target = as_matrix(u), as_matrix(target)
    if u.shape != target.shape or u.shape[0] != u.shape[1]:
        raise GrapeError("dimension mismatch")
    dim = u.shape[0]
    return float(abs(np.trace(target.conj().T @ u)) ** 2 / dim**2)


def _member_value_and_gradient(
    c: ControlGrid, target: ComplexMatrix, m: MoleculeConfig, member: EnsembleMember, ctrl: np.ndarray
) -> Tuple[float, np.ndarray]:
    dt = c.dt_s
    dim = 2**m.n
    evals, vecs = _segment_eigensystems(c, m, member, ctrl)
    units = _segment_unitaries(evals, vecs, dt)
    segments = len(units)

    forward = np.empty_like(units)  # forward[k] = U_{k-1}...U_0 (before segment k)
    acc = np.eye(dim, dtype=np.complex128)
    for k in range(segments):
        forward[k] = acc
        acc = units[k] @ acc
    total = acc

    backward = np.empty_like(units)  # backward[k] = W† U_{N-1}...U_{k+1}
    acc = target.conj().T.copy()
    for k in range(segments - 1, -1, -1):
        backward[k] = acc
        acc = acc @ units[k]

    g = np.trace(target.conj().T @ total)

    # exact derivative of exp(-i H dt) in the eigenbasis
    ph = np.exp(-1j * evals * dt)
    diff = evals[:, :, None] - evals[:, None, :]
    near = np.abs(diff) * dt < _DEGENERATE
    safe = np.where(near, 1.0, diff)
    kernel = np.where(near, -1j * dt * ph[:, :, None], (ph[:, :, None] - ph[:, None, :]) / safe)

    vh = vecs.conj().transpose(0, 2, 1)
    mixed = vh @ forward @ backward @ vecs
    ctrl_eig = np.einsum("kia,jqab,kbc->kjqic", vh, ctrl, vecs)
    dg = member.rf_scale * np.einsum("kba,kab,kjqab->kjq", mixed, kernel, ctrl_eig)

    value = float(abs(g) ** 2 / dim**2)
    grad = 2.0 * np.real(np.conj(g) * dg) / dim**2
    return value, grad


def ensemble_value_and_gradient(
    c: ControlGrid, target: npt.ArrayLike, m: MoleculeConfig, ens: RobustnessEnsemble
) -> Tuple[float, np.ndarray, List[float]]:
    _check_dimensions(c, m)
    target = _check_target(target, m)
    ctrl = _control_operators(m.n)
    value = 0.0
    grad = np.zeros_like(c.amplitudes)
    per_member: List[float] = []
    for member in ens.members():
        v, gr = _member_value_and_gradient(c, target, m, member, ctrl)
        per_member.append(v)
        value += member.weight * v
        grad += member.weight * gr
    return value, grad, per_member


def gradient(c: ControlGrid, target: npt.ArrayLike, m: MoleculeConfig, ens: RobustnessEnsemble) -> np.ndarray:
    return ensemble_value_and_gradient(c, target, m, ens)[1]


def ensemble_fidelity(c: ControlGrid, target: npt.ArrayLike, m: MoleculeConfig, ens: RobustnessEnsemble) -> Tuple[float, List[float]]:
    target = _check_target(target, m)
    per_member = [fidelity(propagator(c, m, mem), target) for mem in ens.members()]
    avg = sum(mem.weight * f for mem, f in zip(ens.members(), per_member))
    return avg, per_member


def finite_difference_gradient(
    c: ControlGrid,
    target: npt.ArrayLike,
    m: MoleculeConfig,
    ens: RobustnessEnsemble,
    rel_step: float = 1e-6,
) -> np.ndarray:
    """Central differences with step rel_step·max(1, |u|) per amplitude."""
    base = np.array(c.amplitudes)
    out = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        h = rel_step * max(1.0, abs(base[idx]))
        plus, minus = base.copy(), base.copy()
        plus[idx] += h
        minus[idx] -= h
        f_plus = ensemble_fidelity(c.with_amplitudes(plus), target, m, ens)[0]
        f_minus = ensemble_fidelity(c.with_amplitudes(minus), target, m, ens)[0]
        out[idx] = (f_plus - f_minus) / (2 * h)
    return out


def project_to_cap(amplitudes: np.ndarray, cap: float) -> np.ndarray:
    mag = np.sqrt((amplitudes**2).sum(axis=2, keepdims=True))
    factor = np.where(mag > cap, cap / np.where(mag > 0, mag, 1.0), 1.0)
    return amplitudes * factor


def _check_target(target: npt.ArrayLike, m: MoleculeConfig) -> ComplexMatrix:
    target = as_matrix(target)
    if target.shape != (2**m.n, 2**m.n):
        raise GrapeError(f"target dimension {target.shape[0]} does not match 2^{m.n}")
    if not is_unitary(target, 1e-8):
        raise GrapeError("target is not unitary")
    return target


@dataclass
class GrapeReport:
    converged: bool
    iterations: int
    fidelity: float
    member_fidelities: List[float]
    threshold: float
    seed: int
    trace: List[float] = field(default_factory=list)
    stalled: bool = False
    config_hash: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "fidelity": self.fidelity,
            "min_member_fidelity": min(self.member_fidelities) if self.member_fidelities else None,
            "member_fidelities": self.member_fidelities,
            "threshold": self.threshold,
            "seed": self.seed,
            "stalled": self.stalled,
            "config_hash": self.config_hash,
            "trace": self.trace,
        }


@dataclass(frozen=True)
class GrapeResult:
    grid: ControlGrid
    report: GrapeReport


def initial_grid(m: MoleculeConfig, cfg: GrapeSettings, seed: int) -> ControlGrid:
    rng = np.random.default_rng(seed)
    amps = rng.uniform(-1.0, 1.0, size=(cfg.segments, m.n, 2)) * cfg.initial_scale * cfg.amplitude_cap
    return ControlGrid(n=m.n, dt_s=cfg.dt_s, amplitudes=project_to_cap(amps, cfg.amplitude_cap))


def optimize(
    target: npt.ArrayLike,
    m: MoleculeConfig,
    ens: RobustnessEnsemble,
    cfg: GrapeSettings,
    seed: int = 0,
    initial: Optional[ControlGrid] = None,
) -> GrapeResult:
    """L-BFGS-B on per-segment rotation angles u·dt, driven by the exact gradient.

    Each quadrature is boxed to ±cap/√2 so every iterate respects the
    per-spin amplitude cap. Accepted iterates never decrease the
    ensemble-average fidelity.
    """
    target = _check_target(target, m)
    grid = initial if initial is not None else initial_grid(m, cfg, seed)
    _check_dimensions(grid, m)
    dt = grid.dt_s
    shape = grid.amplitudes.shape
    bound = cfg.amplitude_cap * dt / math.sqrt(2.0)
    x0 = np.clip(np.array(grid.amplitudes) * dt, -bound, bound).ravel()

    cache: Dict[bytes, Tuple[float, np.ndarray, List[float]]] = {}

    def evaluate(x: np.ndarray) -> Tuple[float, np.ndarray, List[float]]:
        key = x.tobytes()
        if key not in cache:
            cache.clear()
            trial = grid.with_amplitudes(x.reshape(shape) / dt)
            cache[key] = ensemble_value_and_gradient(trial, target, m, ens)
        return cache[key]

    def objective(x: np.ndarray) -> Tuple[float, np.ndarray]:
        value, grad_u, _ = evaluate(x)
        # gradient w.r.t. the angle u·dt is grad_u / dt
        return 1.0 - value, -(grad_u / dt).ravel()

    value, _, per_member = evaluate(x0)
    trace = [value]
    x_best = x0

    def callback(intermediate_result: OptimizeResult) -> None:
        nonlocal x_best
        x_best = np.array(intermediate_result.x)
        current = 1.0 - float(intermediate_result.fun)
        trace.append(current)
        metrics.record_grape_iteration()
        done = len(trace) - 1
        if cfg.log_every and done % cfg.log_every == 0:
            logger.info("GRAPE progress", extra={"extra": {"iteration": done, "fidelity": current}})
        if current >= cfg.threshold:
            raise StopIteration

    status = None
    with span("grape.optimize", spins=m.n, segments=grid.segments, seed=seed):
        if value < cfg.threshold and cfg.max_iterations > 0:
            res = minimize(
                objective,
                x0,
                jac=True,
                method="L-BFGS-B",
                bounds=[(-bound, bound)] * x0.size,
                callback=callback,
                options={
                    "maxiter": cfg.max_iterations,
                    "maxfun": 20 * cfg.max_iterations,
                    "maxcor": cfg.lbfgs_memory,
                    "ftol": 1e-15,
                    "gtol": 1e-12,
                },
            )
            status = res.message
        value, _, per_member = evaluate(x_best)
        grid = grid.with_amplitudes(x_best.reshape(shape) / dt)

    iterations = len(trace) - 1
    converged = value >= cfg.threshold
    stalled = not converged and status is not None and iterations < cfg.max_iterations
    metrics.record_grape_fidelity(value)
    log = logger.info if converged else logger.warning
    log(
        "GRAPE finished",
        extra={
            "extra": {
                "converged": converged,
                "iterations": iterations,
                "fidelity": value,
                "min_member": min(per_member),
                "stalled": stalled,
                "status": str(status) if status is not None else None,
            }
        },
    )
    report = GrapeReport(
        converged=converged,
        iterations=iterations,
        fidelity=value,
        member_fidelities=per_member,
        threshold=cfg.threshold,
        seed=seed,
        trace=trace,
        stalled=stalled,
        config_hash=cfg.config_hash,
    )
    return GrapeResult(grid=grid, report=report)


BUILTIN_TARGETS = ("identity", "rx90", "ry90", "rx180", "ry180", "hadamard", "fredkin")


def builtin_target(name: str, n: int, spin: int = 1) -> ComplexMatrix:
    from src.linalg import HADAMARD, rx, ry
    from src.protocol import fredkin

    single = {
        "rx90": rx(math.pi / 2),
        "ry90": ry(math.pi / 2),
        "rx180": rx(math.pi),
        "ry180": ry(math.pi),
        "hadamard": HADAMARD,
    }
    if name == "identity":
        return np.eye(2**n, dtype=np.complex128)
    if name == "fredkin":
        if n != 3:
            raise GrapeError("fredkin target needs a 3-spin molecule")
        return fredkin(2, (1, 3), 3)
    if name not in single:
        raise GrapeError(f"unknown target {name!r}; choose from {', '.join(BUILTIN_TARGETS)}")
    if spin < 1 or spin > n:
        raise GrapeError("spin out of range")
    return embed(single[name], [spin], n)


def load_target(path: str | Path) -> ComplexMatrix:
    """Target unitary from ``.npy`` or JSON ``{"real": [[...]], "imag": [[...]]}``."""
    path = Path(path)
    try:
        if path.suffix == ".npy":
            return as_matrix(np.load(path))
        payload = json.loads(path.read_text())
        return as_matrix(np.asarray(payload["real"]) + 1j * np.asarray(payload.get("imag", 0.0)))
    except (OSError, KeyError, ValueError) as exc:
        raise GrapeError(f"cannot read target {path}: {exc}") from exc
