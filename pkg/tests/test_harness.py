import copy
import json
import subprocess
import sys

import numpy as np
import pytest

from folnerlab.cli import main
from folnerlab.config import load_config, matrix_to_json, parse_config
from folnerlab.dynamics import ValidationError, validate_system
from folnerlab.harness import (
    CSV_HEADER,
    Row,
    check_inequalities,
    csv_text,
    emit_csv,
    fmt,
    read_csv,
    run_experiment,
    theorem_verdict,
)
from folnerlab.systems import BUNDLED, bundled_path, bundled_raw, generate_example


@pytest.fixture(scope="module")
def alternating_report():
    cfg = load_config(bundled_path("alternating")).with_schedule(list(range(1, 201)))
    return run_experiment(cfg)


def test_identity_rows_have_zero_gap():
    rep = run_experiment(load_config(bundled_path("identity")))
    assert all(r.abs_gap <= 1e-10 for r in rep.rows)
    assert rep.passed


def test_alternating_gaps(alternating_report):
    for r in alternating_report.rows:
        expected = 1 / r.k if r.k % 2 else 0.0
        assert abs(r.abs_gap - expected) <= 1e-9
    assert alternating_report.m_fixed_point == pytest.approx(1.0, abs=1e-12)


def test_alternating_k3_csv_row(alternating_report, tmp_path):
    path = emit_csv(alternating_report, tmp_path / "alt.csv")
    rows = read_csv(path)
    row3 = next(r for r in rows if r["k"] == "3")
    assert row3["norm_avg"] == "1.33333333333333"
    assert row3["m_target"] == "1"


def test_kernel_m_from_surviving_block():
    rep = run_experiment(load_config(bundled_path("kernel")))
    assert rep.m_fixed_point == pytest.approx(1.0, abs=1e-12)
    assert rep.m_full == pytest.approx(3.0, abs=1e-12)


def test_csv_format(alternating_report, tmp_path):
    path = emit_csv(alternating_report, tmp_path / "alt.csv")
    data = path.read_bytes()
    assert b"\r" not in data
    lines = data.decode("utf-8").split("\n")
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[-1] == ""
    ks = [int(line.split(",")[0]) for line in lines[1:-1]]
    assert ks == sorted(ks)


def test_csv_round_trip_gap_is_exact(tmp_path):
    for name in ("alternating", "z2_m4", "heisenberg_m4", "kernel"):
        rep = run_experiment(load_config(bundled_path(name)))
        for r in read_csv(emit_csv(rep, tmp_path / f"{name}.csv")):
            # exact at the file's precision: same 15-significant-digit decimal
            assert fmt(abs(float(r["norm_avg"]) - float(r["m_target"]))) == r["abs_gap"]


def test_verdict_reproducible_from_rows(alternating_report):
    ok, worst = theorem_verdict(alternating_report.rows, 1e-3)
    assert ok == alternating_report.verdicts["theorem"]
    tail = sorted(alternating_report.rows, key=lambda r: r.k)[-5:]
    assert worst == max(r.abs_gap for r in tail)


def test_verdict_tail_window():
    rows = [Row.make(k, k, 1 + (0.5 if k < 6 else 0.0), 1.0, 0.0) for k in range(1, 11)]
    assert theorem_verdict(rows, 1e-3) == (True, 0.0)
    rows[-1] = Row.make(10, 10, 1.01, 1.0, 0.0)
    assert not theorem_verdict(rows, 1e-3)[0]


def test_determinism(tmp_path):
    cfg = load_config(bundled_path("heisenberg_m4"))
    a = csv_text(run_experiment(cfg))
    b = csv_text(run_experiment(load_config(bundled_path("heisenberg_m4"))))
    assert a == b


def _non_invariant_config():
    raw = copy.deepcopy(bundled_raw("z2_m4"))
    # swap basis vectors 1 and 2, which sit in different eigenspaces of rho
    p = np.eye(4)[[0, 2, 1, 3]]
    raw["theta_unitaries"][0] = [matrix_to_json(p)]
    return raw


def test_validation_gate():
    cfg = parse_config(_non_invariant_config())
    with pytest.raises(ValidationError):
        run_experiment(cfg)
    rep = check_inequalities(cfg)
    assert rep.suites[0].name == "validation" and rep.suites[0].passed is False
    assert all(s.passed is None for s in rep.suites[1:])
    assert not rep.passed


def test_generated_zd_example_validates():
    cfg = parse_config(generate_example("zd", 1, 4))
    rep = validate_system(cfg.system)
    assert rep.ok
    assert max(c.residual for c in rep.checks) <= 1e-10


def test_generated_finite_has_zero_defects():
    cfg = parse_config(generate_example("finite", 5, 3))
    assert all(r.max_defect == 0 for r in run_experiment(cfg).rows)


def test_check_passes_on_faithful_generated():
    rep = check_inequalities(parse_config(generate_example("heisenberg", 2, 3)), lipschitz_kmax=30)
    assert rep.passed, [s.line() for s in rep.suites]


# -- CLI


def test_cli_run_and_validate(tmp_path, capsys):
    out = tmp_path / "z.csv"
    assert main(["run", str(bundled_path("z2_m4")), "--out", str(out), "--kmax", "40"]) == 0
    rows = read_csv(out)
    assert rows[-1]["k"] == "40"
    assert main(["validate", str(bundled_path("kernel"))]) == 0


def test_cli_schedule_override(tmp_path):
    out = tmp_path / "i.csv"
    assert main(["run", str(bundled_path("identity")), "--out", str(out), "--schedule", "list", "--kmax", "7"]) == 0
    assert [r["k"] for r in read_csv(out)] == [str(k) for k in range(1, 8)]
    assert main(["run", str(bundled_path("identity")), "--out", str(out), "--schedule", "geometric", "--kmax", "10"]) == 0
    assert [r["k"] for r in read_csv(out)] == ["1", "2", "3", "4", "6", "8", "10"]


def test_cli_verdict_failure_exit_code(tmp_path):
    # alternating stopped at small k: the tail gap 1/k is far above 1e-3
    out = tmp_path / "a.csv"
    assert main(["run", str(bundled_path("alternating")), "--out", str(out), "--kmax", "9"]) == 1


def test_cli_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"group": {"kind": "free"}}', encoding="utf-8")
    assert main(["validate", str(bad)]) == 2
    assert main(["run", str(bad), "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["validate", str(tmp_path / "missing.json")]) == 2
    inv = tmp_path / "inv.json"
    inv.write_text(json.dumps(_non_invariant_config()), encoding="utf-8")
    assert main(["validate", str(inv)]) == 2
    assert main(["check", str(inv)]) == 2
    assert main(["run", str(inv), "--out", str(tmp_path / "y.csv")]) == 2


def test_cli_gen(tmp_path):
    out = tmp_path / "g.json"
    assert main(["gen", "--kind", "kernel", "--seed", "1", "--dim", "4", "--out", str(out)]) == 0
    cfg = load_config(out)
    assert cfg.model.kernel_blocks
    assert main(["gen", "--kind", "zd", "--seed", "1", "--dim", "100", "--out", str(out)]) == 2


def test_cli_check_subprocess(tmp_path):
    out = tmp_path / "g.json"
    assert main(["gen", "--kind", "finite", "--seed", "2", "--dim", "3", "--out", str(out)]) == 0
    proc = subprocess.run(
        [sys.executable, "-m", "folnerlab.cli", "check", str(out)], capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "PASS theorem" in proc.stdout


@pytest.mark.parametrize("name", BUNDLED)
def test_all_suites_pass_on_bundled(name):
    rep = check_inequalities(load_config(bundled_path(name)))
    assert [s.name for s in rep.suites][0] == "validation"
    assert rep.passed, [s.line() for s in rep.suites if not s.passed]
    d = rep.to_dict()
    assert d["verdicts"]["theorem"] == theorem_verdict(rep.rows, 1e-3)[0]
