import json
import math
from pathlib import Path

import numpy as np
import pytest

from src import cli
from src.reports import CSV_COLUMNS, format_rows, parse_csv

ROOT = Path(__file__).resolve().parents[1]


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_default_passes(capsys):
    code, out, _ = _run(capsys, "verify")
    report = json.loads(out)
    assert code == 0
    assert report["passed"] is True
    assert report["residuals"]["consistency grid"] <= 1e-10


def test_verify_perturbed_a_names_braid_relation(capsys):
    code, out, err = _run(capsys, "verify", "--perturb-a", "1e-3")
    assert code == 1
    assert json.loads(out)["failed"] == "braid relation"
    assert "error: braid relation" in err


def test_verify_unreachable_tolerance_fails(capsys):
    code, out, _ = _run(capsys, "verify", "--tol", "1e-20")
    assert code == 1
    assert json.loads(out)["passed"] is False


def test_sweep_fig2_writes_unit_rows(capsys, tmp_path):
    out_path = tmp_path / "fig2.csv"
    code, _, _ = _run(capsys, "sweep", "--mode", "fig2", "--points", "64", "--out", str(out_path))
    assert code == 0
    text = out_path.read_text()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = parse_csv(text)
    assert len(rows) == 64
    assert all(line.split(",")[6] == "1.000000000" for line in text.splitlines()[1:])
    assert format_rows(rows) == text


def test_sweep_fig3a_theory_column(capsys):
    code, out, _ = _run(capsys, "sweep", "--mode", "fig3a", "--points", "9")
    rows = parse_csv(out)
    assert code == 0
    for row in rows:
        assert row.theory == pytest.approx(math.cos(row.theta1) ** 2, abs=1e-9)
        assert row.norm_mag == pytest.approx(row.theory, abs=1e-9)


def test_sweep_fig3b_hits_unity_near_roots(capsys):
    _, out, _ = _run(capsys, "sweep", "--mode", "fig3b", "--points", "361")
    rows = parse_csv(out)
    thetas = np.array([r.theta1 for r in rows])
    for root in (math.pi / 3, math.pi, 5 * math.pi / 3):
        nearest = rows[int(np.argmin(np.abs(thetas - root)))]
        assert nearest.norm_mag == pytest.approx(1.0, abs=1e-3)


def test_sweep_is_byte_deterministic(capsys, tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (first, second):
        _run(capsys, "sweep", "--mode", "fig3b", "--points", "361", "--seed", "7", "--out", str(path))
    assert first.read_bytes() == second.read_bytes()


def test_sweep_custom_angles_in_degrees(capsys):
    code, out, _ = _run(capsys, "sweep", "--mode", "custom", "--angles", "0,45,-45;60,30,90")
    rows = parse_csv(out)
    assert code == 0
    assert rows[0].theta2 == pytest.approx(math.pi / 4, abs=1e-9)
    assert rows[0].theta3 == pytest.approx(7 * math.pi / 4, abs=1e-9)
    assert rows[0].norm_mag == pytest.approx(1.0, abs=1e-9)


def test_sweep_unwritable_output(capsys, tmp_path):
    code, _, err = _run(capsys, "sweep", "--mode", "fig2", "--points", "2", "--out", str(tmp_path / "missing" / "x.csv"))
    assert code == 1
    assert err.startswith("error: cannot write")


def test_simulate_empty_sequence_reports_input(capsys, tmp_path):
    seq = tmp_path / "empty.seq"
    seq.write_text("# nothing\n")
    code, out, _ = _run(capsys, "simulate", "--seq", str(seq), "--initial", "pps", "--pps-fidelity")
    report = json.loads(out)
    assert code == 0
    assert report["events"] == 0
    assert report["pps_fidelity"] == pytest.approx(1.0)
    assert report["state"]["diagonal"][0] > report["state"]["diagonal"][1]


def test_simulate_filled_template_reports_gradients(capsys, tmp_path):
    from src.molecule import MoleculeConfig
    from src.nmr import prepare_pps_sequence
    from src.pulse_sequence import serialize_sequence

    m = MoleculeConfig.from_json(cli.DEFAULT_MOLECULE)
    seq = tmp_path / "pps.seq"
    seq.write_text(serialize_sequence(prepare_pps_sequence(m)))
    code, out, _ = _run(capsys, "simulate", "--seq", str(seq), "--pps-fidelity")
    report = json.loads(out)
    assert code == 0
    assert report["gradient_count"] == 2
    assert report["pps_fidelity"] >= 0.99


def test_simulate_malformed_line(capsys, tmp_path):
    seq = tmp_path / "bad.seq"
    seq.write_text("rot q=9\n")
    code, _, err = _run(capsys, "simulate", "--seq", str(seq))
    assert code == 1
    assert "line 1: qubit out of range" in err


def test_grape_ry90_succeeds(capsys, tmp_path):
    grid_path, report_path = tmp_path / "grid.json", tmp_path / "report.json"
    code, out, _ = _run(
        capsys, "grape", "--target", "ry90", "--segments", "20", "--seed", "1",
        "--out", str(grid_path), "--report", str(report_path),
    )
    assert code == 0
    assert json.loads(out)["fidelity"] >= 0.9999
    assert json.loads(grid_path.read_text())["N"] == 20
    assert json.loads(report_path.read_text())["converged"] is True


def test_grape_identity_zero_init(capsys):
    code, out, _ = _run(capsys, "grape", "--target", "identity", "--init", "zero")
    report = json.loads(out)
    assert code == 0
    assert report["iterations"] == 0
    assert report["fidelity"] == pytest.approx(1.0)


def test_grape_impossible_threshold_exits_two(capsys):
    code, out, err = _run(capsys, "grape", "--target", "ry90", "--threshold", "1.1", "--max-iter", "10")
    assert code == 2
    assert json.loads(out)["trace"]
    assert "below threshold" in err


def test_pps_ideal_passes_and_zero_angles_fail(capsys):
    code, out, _ = _run(capsys, "pps", "--ideal")
    assert code == 0
    assert json.loads(out)["fidelity"] == 1.0
    code, out, err = _run(capsys, "pps", "--phi1", "0", "--phi2", "0")
    assert code == 1
    assert json.loads(out)["passed"] is False
    assert "below gate" in err


def test_pps_default_angles_pass_the_gate(capsys):
    code, out, _ = _run(capsys, "pps")
    report = json.loads(out)
    assert code == 0
    assert report["passed"] is True
    assert report["fidelity"] >= report["gate"]
    assert report["gradient_count"] == 2


def test_metrics_file_written_after_command(capsys, monkeypatch, tmp_path):
    target = tmp_path / "metrics.prom"
    monkeypatch.setenv("YBXSIM_METRICS_PATH", str(target))
    _run(capsys, "sweep", "--mode", "fig2", "--points", "4")
    assert 'ybxsim_sweep_points_total{mode="fig2"} 4.0' in target.read_text()
