import json

import numpy as np
import pytest

from robustde.cli import main
from robustde.simulate import draw, get_case
from robustde.survey import draw_survey_sample
from robustde.tabular import ColumnSpec, write_csv

PLAIN = ColumnSpec("A", "W", "Y", ("X",))
SURVEY = ColumnSpec("A", "W", "Y", ("X",), weight="wt", stratum="h", psu="j")


@pytest.fixture(scope="module")
def plain_csv(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "plain.csv"
    write_csv(draw(get_case(3), 600, 1), p, PLAIN)
    return p


@pytest.fixture(scope="module")
def survey_csv(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "survey.csv"
    write_csv(draw_survey_sample(3, seed=2), p, SURVEY)
    return p


def _run(capsys, argv):
    with pytest.raises(SystemExit) as ei:
        main(argv)
        raise SystemExit(0)
    out = capsys.readouterr()
    return ei.value.code, out.out, out.err


def test_estimate_json(capsys, plain_csv):
    code, out, _ = _run(capsys, ["estimate", "--data", str(plain_csv), "--covariates", "X", "--seed", "3", "--lambda", "--B", "20"])
    assert code == 0
    rep = json.loads(out)
    assert rep["config"]["seed"] == 3 and rep["config"]["K"] == 5
    psi, lam = rep["results"]
    assert psi["estimand"] == "psi" and lam["estimand"] == "lambda"
    assert lam["se"] is None and lam["ci_lo"] < lam["point"] < lam["ci_hi"]


def test_estimate_csv_and_union(capsys, plain_csv, tmp_path):
    out_file = tmp_path / "r.csv"
    code, _, _ = _run(capsys, ["estimate", "--data", str(plain_csv), "--covariates", "X", "--seed", "3",
                               "--format", "csv", "--out", str(out_file)])
    assert code == 0
    assert out_file.read_text().splitlines()[0] == "estimand,point,se,ci_lo,ci_hi,n,K,seed,clip,alpha,n_dropped"
    code, out, _ = _run(capsys, ["estimate", "--data", str(plain_csv), "--covariates", "X", "--seed", "3", "--union", "--B", "30"])
    ut = json.loads(out)["union_test"]
    assert ut["p_max"] == max(ut["p_C"], ut["p_M"])


def test_missing_seed_is_config_error(capsys, plain_csv):
    code, _, err = _run(capsys, ["estimate", "--data", str(plain_csv)])
    assert code == 2
    assert json.loads(err)["error"] == "config"


def test_missing_column_exit_2(capsys, plain_csv):
    code, _, err = _run(capsys, ["estimate", "--data", str(plain_csv), "--covariates", "Z", "--seed", "1"])
    assert code == 2 and "Z" in json.loads(err)["message"]


def test_bad_exposure_exit_3(capsys, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("A,W,Y\n0,1,1\n2,0,1\n1,1,0\n")
    code, _, err = _run(capsys, ["estimate", "--data", str(p), "--seed", "1"])
    assert code == 3 and json.loads(err)["error"] == "data"


def test_singular_design_exit_4(capsys, tmp_path):
    p = tmp_path / "sing.csv"
    rows = ["A,W,Y,X,X2"] + [f"{i % 2},{(i // 2) % 2},{i},{i},{2 * i}" for i in range(40)]
    p.write_text("\n".join(rows) + "\n")
    code, _, err = _run(capsys, ["estimate", "--data", str(p), "--covariates", "X,X2", "--seed", "1"])
    assert code == 4 and json.loads(err)["error"] == "numeric"


def test_sensitivity_and_sweep(capsys, plain_csv):
    code, out, err = _run(capsys, ["sensitivity", "--data", str(plain_csv), "--covariates", "X", "--seed", "1"])
    rep = json.loads(out)
    assert code == 0 and "working-model" in err
    assert rep["interval_lo"] <= rep["psi_hat"] <= rep["interval_hi"]
    code, out, _ = _run(capsys, ["sensitivity", "--data", str(plain_csv), "--covariates", "X", "--seed", "1",
                                 "--gamma-sweep", "0,0.5,1"])
    lines = out.splitlines()
    assert lines[0] == "gamma,lo,hi" and len(lines) == 4
    lo, hi = map(float, lines[1].split(",")[1:])
    assert lo == hi


def test_survey_bootstrap(capsys, survey_csv):
    code, out, _ = _run(capsys, ["survey-bootstrap", "--data", str(survey_csv), "--covariates", "X", "--weight", "wt",
                                 "--stratum", "h", "--psu", "j", "--seed", "4", "--B", "20", "--threads", "1"])
    rep = json.loads(out)
    assert code == 0
    assert set(rep["boot_ci"]) == {"psi", "lambda", "difference"}
    assert rep["point"]["difference"] == pytest.approx(rep["point"]["psi"] - rep["point"]["lambda"])


def test_simulate(capsys, tmp_path):
    code, out, _ = _run(capsys, ["simulate", "--cases", "2", "--reps", "3", "--ns", "200", "--seed", "5",
                                 "--out-dir", str(tmp_path), "--threads", "1"])
    assert code == 0
    assert out == (tmp_path / "summary.csv").read_text()
    assert {p.name for p in tmp_path.iterdir()} == {"summary.csv", "plot_data.csv", "reference_lines.csv", "config.json"}


def test_expand(capsys, tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("A,edu,Y\n0,hs,1\n1,college,2\n0,phd,3\n")
    code, out, _ = _run(capsys, ["expand", "--data", str(p), "--columns", "edu"])
    assert code == 0
    assert out.splitlines() == ["A,edu_hs,edu_phd,Y", "0,1,0,1", "1,0,0,2", "0,0,1,3"]


def test_missing_values_reported(capsys, tmp_path):
    d = draw(get_case(1), 300, 3)
    p = tmp_path / "m.csv"
    write_csv(d, p, PLAIN)
    lines = p.read_text().splitlines()
    lines[5] = ",".join(lines[5].split(",")[:-1] + ["NA"])
    p.write_text("\n".join(lines) + "\n")
    code, out, _ = _run(capsys, ["estimate", "--data", str(p), "--covariates", "X", "--seed", "1"])
    rep = json.loads(out)
    assert rep["n_dropped"] == 1 and rep["results"][0]["n"] == 299
    assert np.isfinite(rep["results"][0]["point"])
