"""CSV and JSON output for sweeps and state reports."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from src.protocol import ProtocolResult
from src.qstate import DensityMatrix

CSV_COLUMNS = ("theta1", "theta2", "theta3", "overlap", "re_mag", "im_mag", "norm_mag", "theory")
DECIMALS = 9


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class SweepRow:
    theta1: float
    theta2: float
    theta3: float
    overlap: float
    re_mag: float
    im_mag: float
    norm_mag: float
    theory: float

    @classmethod
    def from_result(cls, result: ProtocolResult, epsilon: float) -> "SweepRow":
        """Raw magnetization is reported per unit polarization."""
        t1, t2, t3 = result.angles.as_tuple()
        mag = result.magnetization / epsilon
        return cls(t1, t2, t3, result.overlap_direct, mag.real, mag.imag, result.normalized_magnetization, result.theory)

    def rounded(self) -> "SweepRow":
        return SweepRow(*(float(_fmt(v)) for v in asdict(self).values()))


def _fmt(value: float) -> str:
    text = f"{value:.{DECIMALS}f}"
    return "0." + "0" * DECIMALS if text == "-0." + "0" * DECIMALS else text


def format_rows(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(v) for v in asdict(row).values()])
    return buf.getvalue()


def parse_csv(text: str) -> List[SweepRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ReportError("unexpected sweep csv header")
    rows = []
    for number, record in enumerate(reader, start=2):
        if len(record) != len(CSV_COLUMNS):
            raise ReportError(f"line {number}: expected {len(CSV_COLUMNS)} fields")
        try:
            rows.append(SweepRow(*(float(v) for v in record)))
        except ValueError:
            raise ReportError(f"line {number}: non-numeric field") from None
    return rows


def state_report(rho: DensityMatrix, coherences: int = 5) -> Dict[str, Any]:
    """Diagonal populations plus the largest off-diagonal elements."""
    m = rho.matrix
    upper = [(abs(m[a, b]), a, b) for a in range(rho.dim) for b in range(a + 1, rho.dim)]
    upper.sort(key=lambda item: (-item[0], item[1], item[2]))
    width = rho.n
    return {
        "n": rho.n,
        "trace": float(np.trace(m).real),
        "diagonal": [float(v) for v in np.diag(m).real],
        "largest_coherences": [
            {
                "row": format(a, f"0{width}b"),
                "col": format(b, f"0{width}b"),
                "re": float(m[a, b].real),
                "im": float(m[a, b].imag),
            }
            for mag, a, b in upper[:coherences]
            if mag > 0.0
        ],
    }


def dump_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True)


def sweep_rows(results: Sequence[ProtocolResult], epsilon: float) -> List[SweepRow]:
    return [SweepRow.from_result(r, epsilon) for r in results]
