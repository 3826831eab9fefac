import csv
import json
from pathlib import Path

import numpy as np

from monosplit.cli import main
from monosplit.prox import soft_threshold
from monosplit.solver import TRACE_COLUMNS

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def read_summary(out_dir):
    with open(Path(out_dir) / "summary.json") as fh:
        return json.load(fh)


def test_solve_lasso_file(tmp_path):
    out = tmp_path / "run"
    code = main(["solve", str(PROBLEMS / "lasso.json"), "--out", str(out)])
    assert code == 0

    summary = read_summary(out)
    assert summary["status"] == "converged"
    for key in ("beta", "epsilon", "gamma", "final_displacement",
                "transversality_defect", "wall_time_s"):
        assert key in summary

    with open(out / "solution.json") as fh:
        solution = json.load(fh)
    with open(PROBLEMS / "lasso.json") as fh:
        doc = json.load(fh)
    term = doc["functions"]["smooth"]["params"]["terms"][0]
    oracle = soft_threshold(np.asarray(term["matrix"]).T
                            @ np.asarray(term["offset"]), 0.5)
    assert np.max(np.abs(np.asarray(solution["xbar"][0]) - oracle)) <= 1e-6

    with open(out / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TRACE_COLUMNS
    assert len(rows) > 2
    disp = [float(r[2]) for r in rows[1:]]
    assert disp[-1] <= 1e-8


def test_solve_rejects_overlarge_gamma(tmp_path, capsys):
    doc = json.loads((PROBLEMS / "lasso.json").read_text())
    doc["solver"]["gamma"] = 5.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code = main(["solve", str(path), "--out", str(tmp_path / "o")])
    assert code == 1
    err = capsys.readouterr().err
    assert "gamma" in err


def test_solve_budget_exhausted_exits_2(tmp_path):
    doc = json.loads((PROBLEMS / "lasso.json").read_text())
    doc["solver"]["max_iter"] = 1
    path = tmp_path / "short.json"
    path.write_text(json.dumps(doc))
    code = main(["solve", str(path), "--out", str(tmp_path / "o")])
    assert code == 2
    assert read_summary(tmp_path / "o")["status"] == "max_iter"


def test_solve_schema_error_exits_1(tmp_path, capsys):
    doc = json.loads((PROBLEMS / "lasso.json").read_text())
    doc["kind"] = "mystery"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code = main(["solve", str(path), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "/kind" in capsys.readouterr().err


def test_trace_every_env_override(tmp_path, monkeypatch):
    out = tmp_path / "dense_trace"
    monkeypatch.setenv("SOLVER_TRACE_EVERY", "1")
    code = main(["solve", str(PROBLEMS / "lasso.json"), "--out", str(out)])
    assert code == 0
    with open(out / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    iters = read_summary(out)["iterations"]
    assert len(rows) - 1 == iters


def test_demo_lasso(tmp_path):
    out = tmp_path / "demo"
    code = main(["demo", "lasso", "--out", str(out)])
    assert code == 0
    summary = read_summary(out)
    assert summary["demo"] == "lasso"
    assert summary["oracle_max_error"] <= 1e-6


def test_demo_separation_reports_identical(tmp_path):
    out = tmp_path / "sep"
    code = main(["demo", "separation", "--out", str(out)])
    assert code == 0
    assert read_summary(out)["separation_report"] == "identical"


def test_demo_qp(tmp_path):
    out = tmp_path / "qp"
    code = main(["demo", "qp", "--out", str(out)])
    assert code == 0
    assert read_summary(out)["oracle_max_error"] <= 1e-6


def test_demo_deblur_writes_images(tmp_path):
    from monosplit.imaging import read_pgm

    out = tmp_path / "deblur"
    code = main(["demo", "deblur", "--out", str(out)])
    assert code == 0
    summary = read_summary(out)
    assert summary["status"] == "converged"
    assert summary["iterations"] <= 20000
    for name in ("truth.pgm", "observed.pgm", "recovered.pgm"):
        img = read_pgm(out / name)
        assert img.height == img.width == 16
    recovered = read_pgm(out / "recovered.pgm")
    truth = read_pgm(out / "truth.pgm")
    # recovery beats the raw observation against the truth
    observed = read_pgm(out / "observed.pgm")
    err_rec = np.linalg.norm(recovered.pixels - truth.pixels)
    err_obs = np.linalg.norm(observed.pixels - truth.pixels)
    assert err_rec < err_obs


def test_check_command(capsys):
    assert main(["check"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_check_reports_are_deterministic(capsys):
    main(["check"])
    first = capsys.readouterr().out
    main(["check"])
    second = capsys.readouterr().out
    assert first == second
