"""ybxsim command-line entry point.

Exit codes: 0 success, 1 validation or relation failure, 2 optimizer
non-convergence.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv

from src import braid, grape, metrics, nmr, protocol, reports
from src.linalg import DEFAULT_TOL, SWAP
from src.logging_config import configure_logging
from src.molecule import MoleculeConfig
from src.observability import init_otel, span
from src.pulse_sequence import gradient_count, load_sequence, total_duration
from src.qstate import basis_state, pps, thermal_deviation_state
from src.settings import GrapeSettings, ProtocolSettings

logger = logging.getLogger("ybxsim.cli")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2

DEFAULT_MOLECULE = Path(__file__).resolve().parent.parent / "config" / "molecules" / "c2f3i_placeholder.json"
GRID_POINTS = 100


def _error(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _emit(text: str, out: Optional[str]) -> None:
    text = text if text.endswith("\n") else text + "\n"
    if not out:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise reports.ReportError(f"cannot write {out}: {exc}") from exc


# verify ---------------------------------------------------------------------


def _braid_residual(perturb_a: float) -> float:
    a = braid.braid_A()
    a[0, 0] += perturb_a
    return braid.braid_relations_residual([a, braid.braid_B()])


def _tl_residual() -> float:
    return max(braid.tl_residuals(*braid.tl_generators()).values())


def _baxterization_residual() -> float:
    worst = 0.0
    for theta in np.linspace(0.0, 2 * math.pi, 17):
        worst = max(worst, float(np.linalg.norm(braid.yang_baxterize(theta, 12) - braid.A_theta(theta))))
        worst = max(worst, float(np.linalg.norm(braid.yang_baxterize(theta, 23) - braid.B_theta(theta))))
    return worst


def _consistency_residual() -> float:
    grid = np.linspace(0.0, 2 * math.pi, GRID_POINTS, endpoint=False)
    worst = 0.0
    for t1 in grid:
        for t3 in grid:
            t2 = braid.theta2_consistent(t1, t3)
            worst = max(worst, braid.ybe2d_residual((t1, t2, t3)))
    return worst


def _kauffman_residual() -> float:
    return braid.braid_relations_residual(braid.braid_generators(braid.kauffman_braid(1.5), 4))


def _additive_residual() -> float:
    def yang(u: float, v: float) -> np.ndarray:
        return (u - v) * np.eye(4) + SWAP

    return braid.ybe_additive_residual(yang, 0.3, 1.1, -0.4)


def _multiplicative_residual() -> float:
    return braid.ybe_multiplicative_residual(braid.tl_r_matrix(2.0), 1.5, 0.7)


def verify_suite(perturb_a: float = 0.0) -> List[Tuple[str, Callable[[], float]]]:
    return [
        ("braid relation", lambda: _braid_residual(perturb_a)),
        ("temperley-lieb", _tl_residual),
        ("yang-baxterization", _baxterization_residual),
        ("consistency grid", _consistency_residual),
        ("kauffman braid", _kauffman_residual),
        ("additive ybe", _additive_residual),
        ("multiplicative ybe", _multiplicative_residual),
    ]


def cmd_verify(args: argparse.Namespace) -> int:
    tol = args.tol if args.tol is not None else DEFAULT_TOL
    residuals: Dict[str, float] = {}
    failed: Optional[str] = None
    for name, check in verify_suite(args.perturb_a):
        value = check()
        residuals[name] = value
        metrics.record_verify_residual(name, value)
        if failed is None and value > tol:
            failed = name
            logger.error("relation failed", extra={"extra": {"relation": name, "residual": value, "tol": tol}})
    print(reports.dump_json({"tolerance": tol, "residuals": residuals, "passed": failed is None, "failed": failed}))
    if failed is not None:
        _error(f"{failed} residual {residuals[failed]:.3e} exceeds tolerance {tol:.1e}")
        return EXIT_INVALID
    return EXIT_OK


# sweep ----------------------------------------------------------------------


def parse_angle_triples(text: str) -> Tuple[braid.SpectralAngles, ...]:
    """``"a,b,c;d,e,f"`` in degrees, reduced to [0, 2π)."""
    triples = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 3:
            raise protocol.ProtocolError(f"angle triple needs three values, got {chunk!r}")
        try:
            triples.append(braid.SpectralAngles(*(math.radians(float(p)) for p in parts)).canonical())
        except ValueError as exc:
            raise protocol.ProtocolError(f"bad angle triple {chunk!r}: {exc}") from None
    return tuple(triples)


def cmd_sweep(args: argparse.Namespace) -> int:
    settings = ProtocolSettings.from_env()
    model = protocol.NoiseModel.from_settings(settings).scaled(args.duration_scale)
    epsilon = args.epsilon if args.epsilon is not None else settings.epsilon
    spec = protocol.SweepSpec(
        mode=args.mode,
        points=args.points if args.points is not None else settings.points,
        noise=args.noise,
        epsilon=epsilon,
        custom=parse_angle_triples(args.angles) if args.angles else (),
        noise_model=model,
    )
    logger.info("sweep requested", extra={"extra": {"seed": args.seed, "config_hash": settings.config_hash}})
    results = protocol.run_sweep(spec)
    text = reports.format_rows(reports.sweep_rows(results, epsilon))
    _emit(text, args.out)
    return EXIT_OK


# simulate -------------------------------------------------------------------


def _molecule(path: Optional[str]) -> MoleculeConfig:
    return MoleculeConfig.from_json(path or DEFAULT_MOLECULE)


def cmd_simulate(args: argparse.Namespace) -> int:
    m = _molecule(args.molecule)
    seq = load_sequence(args.seq, n=m.n)
    epsilon = args.epsilon if args.epsilon is not None else ProtocolSettings.from_env().epsilon
    if args.initial == "pps":
        rho0 = pps(basis_state("0" * m.n), epsilon)
    else:
        rho0 = thermal_deviation_state(m.n, epsilon)
    rho = nmr.run_sequence(rho0, seq, m, noise=args.noise == "t2")
    payload = {
        "molecule": m.label or str(args.molecule or DEFAULT_MOLECULE),
        "events": len(seq),
        "gradient_count": gradient_count(seq),
        "total_duration_s": total_duration(seq),
        "state": reports.state_report(rho),
    }
    if args.pps_fidelity:
        payload["pps_fidelity"] = nmr.pps_fidelity(rho, epsilon)
    _emit(reports.dump_json(payload), args.out)
    return EXIT_OK


# grape ----------------------------------------------------------------------


def cmd_grape(args: argparse.Namespace) -> int:
    cfg = GrapeSettings.from_env()
    overrides = {
        "segments": args.segments,
        "dt_s": args.dt,
        "max_iterations": args.max_iter,
        "threshold": args.threshold,
    }
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    m = MoleculeConfig.from_json(args.molecule) if args.molecule else MoleculeConfig.bare(1)
    if args.target_file:
        target = grape.load_target(args.target_file)
    else:
        target = grape.builtin_target(args.target, m.n, args.spin)
    ens = grape.RobustnessEnsemble.trivial() if args.ensemble == "trivial" else grape.RobustnessEnsemble.from_settings(cfg)
    initial = grape.ControlGrid.zeros(cfg.segments, m.n, cfg.dt_s) if args.init == "zero" else None
    result = grape.optimize(target, m, ens, cfg, seed=args.seed, initial=initial)
    if args.out:
        try:
            result.grid.save(args.out)
        except OSError as exc:
            raise reports.ReportError(f"cannot write {args.out}: {exc}") from exc
    text = reports.dump_json(result.report.to_dict())
    if args.report:
        _emit(text, args.report)
    print(text)
    if not result.report.converged:
        _error(f"optimizer stopped at fidelity {result.report.fidelity:.6f} below threshold {cfg.threshold}")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# pps ------------------------------------------------------------------------


def cmd_pps(args: argparse.Namespace) -> int:
    m = _molecule(args.molecule)
    epsilon = args.epsilon if args.epsilon is not None else ProtocolSettings.from_env().epsilon
    prep = nmr.prepare_pps(
        m,
        epsilon,
        phi1=math.radians(args.phi1),
        phi2=math.radians(args.phi2),
        ideal=args.ideal,
        noise=args.noise == "t2",
    )
    payload = {
        "fidelity": prep.fidelity,
        "gate": prep.gate,
        "passed": prep.passed,
        "ideal": args.ideal,
        "gradient_count": gradient_count(prep.sequence) if prep.sequence else 0,
        "state": reports.state_report(prep.state),
    }
    _emit(reports.dump_json(payload), args.out)
    if not prep.passed:
        _error(f"pseudo-pure fidelity {prep.fidelity:.6f} below gate {prep.gate}")
        return EXIT_INVALID
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ybxsim", description="Yang-Baxter interferometry simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check braid, Temperley-Lieb and Yang-Baxter relations")
    p.add_argument("--tol", type=float, default=None, help="residual tolerance (default YBXSIM_TOL)")
    p.add_argument("--perturb-a", type=float, default=0.0, help="add this to A[0,0] (negative control)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run an interferometric angle sweep and write CSV")
    p.add_argument("--mode", choices=[m.value for m in protocol.SweepMode], required=True)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--noise", choices=["ideal", "t2"], default="ideal")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--angles", default=None, help='custom triples in degrees: "a,b,c;d,e,f"')
    p.add_argument("--duration-scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="run a pulse sequence on a molecule")
    p.add_argument("--seq", required=True)
    p.add_argument("--molecule", default=None)
    p.add_argument("--noise", choices=["ideal", "t2"], default="ideal")
    p.add_argument("--initial", choices=["thermal", "pps"], default="thermal")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--pps-fidelity", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("grape", help="optimize piecewise-constant controls for a target gate")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--target", choices=grape.BUILTIN_TARGETS)
    target.add_argument("--target-file")
    p.add_argument("--molecule", default=None, help="molecule JSON (default: one bare spin)")
    p.add_argument("--spin", type=int, default=1)
    p.add_argument("--ensemble", choices=["trivial", "default"], default="trivial")
    p.add_argument("--init", choices=["random", "zero"], default="random")
    p.add_argument("--segments", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="control grid JSON")
    p.add_argument("--report", default=None, help="report JSON")
    p.set_defaults(func=cmd_grape)

    p = sub.add_parser("pps", help="prepare the pseudo-pure state and apply the quality gate")
    p.add_argument("--molecule", default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--phi1", type=float, default=98.2, help="degrees")
    p.add_argument("--phi2", type=float, default=135.59, help="degrees")
    p.add_argument("--ideal", action="store_true")
    p.add_argument("--noise", choices=["ideal", "t2"], default="ideal")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pps)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    configure_logging()
    metrics.configure_metrics()
    init_otel()
    args = build_parser().parse_args(argv)
    try:
        with span(f"cli.{args.command}"):
            return args.func(args)
    except ValueError as exc:
        _error(str(exc))
        return EXIT_INVALID
    finally:
        metrics.write_metrics()


if __name__ == "__main__":
    raise SystemExit(main())
