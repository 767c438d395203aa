import csv
import io
import json

import numpy as np
import pytest

from erlang_diffusion import cli
from erlang_diffusion.metrics import CSV_COLUMNS, pmf_sup_error
from erlang_diffusion.quadrature import QuadratureError

from .conftest import cached


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_table_benefit(capsys):
    code, out, _ = run(capsys, "table-benefit")
    assert code == 0
    r = rows(out)
    assert tuple(r[0]) == CSV_COLUMNS
    assert len(r) == 11
    by = {(int(x[0]), float(x[1])): dict(zip(CSV_COLUMNS, x)) for x in r[1:]}
    assert round(float(by[(5, 4.9)]["EX_scaled"]), 2) == 21.04
    assert float(by[(100, 98.0)]["mean_err_y"]) == pytest.approx(7.00e-4, rel=5e-3)
    assert all(float(v["rel_err_y"]) < float(v["rel_err_y0"]) for v in by.values())


def test_table_benefit_json(capsys):
    code, out, _ = run(capsys, "table-benefit", "--format", "json")
    data = json.loads(out)
    assert code == 0 and len(data) == 10 and set(data[0]) == set(CSV_COLUMNS)


def test_table_rates(capsys, tmp_path):
    path = tmp_path / "rates.json"
    code, _, _ = run(capsys, "table-rates", "--format", "json", "--out", str(path))
    data = json.loads(path.read_text())
    assert code == 0
    assert [r["n"] for r in data["rows"]] == [5, 50, 500, 5000]
    r500 = data["rows"][2]
    assert r500["mean_err_y0"] == pytest.approx(1.0e-2, rel=5e-2)
    assert r500["mean_err_y"] == pytest.approx(1.2e-4, rel=5e-2)
    assert data["slopes"]["mean_y"]["slope"] == pytest.approx(-1.0, abs=0.05)
    assert data["slopes"]["mean_y0"]["slope"] == pytest.approx(-0.5, abs=0.05)


def test_figure_pmf(capsys):
    code, out, _ = run(capsys, "figure-pmf")
    assert code == 0
    r = rows(out)
    assert r[0] == ["k", "x", "pi", "pi_y0", "pi_y"]
    vals = np.array([[float(v) for v in row] for row in r[1:]])
    assert vals[0, 1] == pytest.approx(-2.0)
    _, dist, nu = cached(5, 4.0)
    d, _, eta = cached(5, 4.0, "constant")
    below = vals[0, 1] - 0.5 * d.delta
    # six printed digits per entry
    assert vals[:, 2].sum() == pytest.approx(1.0, abs=1e-5)
    for j, dens in ((3, eta), (4, nu)):
        assert vals[:, j].sum() + dens.cdf_at(below) == pytest.approx(1.0, abs=1e-5)
    assert np.max(np.abs(vals[:, 2] - vals[:, 4])) == pytest.approx(pmf_sup_error(dist, nu).value, abs=2e-6)


def test_figure_pmf_lambda_source(capsys):
    a = run(capsys, "figure-pmf", "--n", "5", "--lambda", "8", "--mu", "2")[1]
    b = run(capsys, "figure-pmf", "--n", "5", "--R", "4")[1]
    assert a == b
    assert run(capsys, "figure-pmf", "--lambda", "4", "--R", "4")[0] == 2


def test_table_kolmogorov(capsys):
    code, out, _ = run(capsys, "table-kolmogorov", "--format", "json", "--threads", "4")
    data = json.loads(out)
    assert code == 0
    keys = [(r["n"], r["R"]) for r in data["rows"]]
    assert (100, 99.98) in keys and (100, 99.8) in keys and (5000, 4965.0) in keys
    assert all(0 < r["dk_y"] <= 1 for r in data["rows"])
    assert data["notes"]


def test_verify_pass(capsys):
    code, out, _ = run(capsys, "verify", "--n", "5", "--R", "4")
    rep = json.loads(out)
    assert code == 0 and rep["passed"] and not rep["failed"]
    assert sum(k.startswith("moment_bound:") for k in rep["checks"]) == 13
    assert rep["checks"]["stein:identity:generator_residual"]["states"] == [0, 3, 4, 5, 8]


def test_verify_low_load_skips(capsys):
    code, out, _ = run(capsys, "verify", "--n", "5", "--R", "0.5")
    rep = json.loads(out)
    assert code == 0 and not rep["theorem_regime"]
    skipped = [k for k, v in rep["checks"].items() if v["skipped"]]
    assert "density_bound:nu" in skipped and "stein:identity:poisson_residual" in skipped


def test_verify_near_critical(capsys):
    code, out, err = run(capsys, "verify", "--n", "5", "--R", "4.999999")
    rep = json.loads(out)
    assert code in (0, 1)
    assert rep["warnings"] and "warning" in err


def test_verify_failure_exit(capsys, monkeypatch):
    def broken(*a, **k):
        return {"passed": False, "failed": ["x"], "warnings": [], "checks": {}}

    monkeypatch.setattr(cli, "run_verification", broken)
    code, _, err = run(capsys, "verify")
    assert code == 1 and "x" in err


def test_sweep_matches_table_block(capsys):
    code, out, _ = run(capsys, "sweep", "--n", "5", "--R", "3,4,4.9,4.95,4.99")
    assert code == 0
    bench = run(capsys, "table-benefit")[1].splitlines()
    assert out.splitlines() == bench[:6]


def test_sweep_empty(capsys):
    code, out, _ = run(capsys, "sweep")
    assert code == 0
    assert out == ",".join(CSV_COLUMNS) + "\n"


def test_sweep_thread_determinism(capsys):
    a = run(capsys, "sweep", "--n", "5,20", "--R", "3,4.5", "--threads", "1")
    b = run(capsys, "sweep", "--n", "5,20", "--R", "3,4.5", "--threads", "4")
    assert a == b


def test_sweep_partial_failure(capsys, monkeypatch):
    real = cli.moment_error_report

    def flaky(p, tol=None):
        if p.R == 4.0:
            raise QuadratureError("no convergence")
        return real(p, tol=tol)

    monkeypatch.setattr(cli, "moment_error_report", flaky)
    code, out, err = run(capsys, "sweep", "--n", "5", "--R", "3,4")
    assert code == 3
    r = rows(out)
    assert len(r) == 3 and r[2][2] == "nan"
    assert "R=4.0" in err
    # unstable points are per-row failures too
    code, out, _ = run(capsys, "sweep", "--n", "5", "--R", "3,6")
    assert code == 3 and len(rows(out)) == 3


@pytest.mark.parametrize("argv", [["bogus"], ["verify", "--n", "5", "--R", "6"], ["verify", "--tol", "-1"],
                                  ["sweep", "--threads", "0"], ["verify", "--grid-step", "0"],
                                  ["figure-pmf", "--n", "x"], []])
def test_bad_arguments(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_env_tolerance(capsys, monkeypatch):
    monkeypatch.setenv(cli.TOL_ENV, "abc")
    assert run(capsys, "figure-pmf")[0] == 2
    monkeypatch.setenv(cli.TOL_ENV, "1e-11")
    code, out, _ = run(capsys, "figure-pmf")
    monkeypatch.delenv(cli.TOL_ENV)
    ref = run(capsys, "figure-pmf")[1]
    assert code == 0
    a = np.array([[float(v) for v in row] for row in rows(out)[1:]])
    b = np.array([[float(v) for v in row] for row in rows(ref)[1:]])
    np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-15)


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0
