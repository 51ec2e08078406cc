import csv
import io

import numpy as np
import pytest

from scalefit import persist
from scalefit.cli import best_cell, main
from scalefit.estimators import CombinationModel, MadModel


def run(*argv):
    return main([str(a) for a in argv])


def read_table(path_or_text):
    text = path_or_text if isinstance(path_or_text, str) else path_or_text.read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    return rows[0], rows[1:]


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "d.csv"
    assert run("gen", "--loc", "sine", "--scale", "linear", "--noise", "gaussian",
               "--n", 300, "--seed", 7, "--out", path) == 0
    return path


def test_gen_rows_and_determinism(data, tmp_path):
    header, rows = read_table(data)
    assert header == ["x", "y"] and len(rows) == 300
    again = tmp_path / "again.csv"
    assert run("gen", "--loc", "sine", "--scale", "linear", "--noise", "gaussian",
               "--n", 300, "--seed", 7, "--out", again) == 0
    assert again.read_bytes() == data.read_bytes()


def test_gen_rejects_empty_sample(tmp_path, capsys):
    assert run("gen", "--n", 0, "--out", tmp_path / "x.csv") == 2
    assert "--n" in capsys.readouterr().err


def test_unknown_generator_is_usage_error(tmp_path):
    assert run("gen", "--noise", "cauchy", "--n", 5, "--out", tmp_path / "x.csv") == 2


@pytest.fixture(scope="module")
def fitted(data, tmp_path_factory):
    d = tmp_path_factory.mktemp("models")
    paths = {}
    for tau in (0.05, 0.25, 0.5, 0.75, 0.95):
        p = d / f"q{int(tau * 100):02d}.model"
        assert run("fit", "quantile", "--data", data, "--tau", tau, "--lambda", 1e-2, "--gamma", 10, "--out", p) == 0
        paths[tau] = p
    paths["iqr"] = d / "iqr.model"
    assert run("fit", "iqr", "--data", data, "--tau", "0.25,0.75", "--lambda", 1e-2, "--gamma", 10,
               "--out", paths["iqr"]) == 0
    paths["asym"] = d / "asym.model"
    assert run("fit", "asym", "--data", data, "--tau", "0.05,0.5,0.95", "--lambda", 1e-2, "--gamma", 10,
               "--out", paths["asym"]) == 0
    paths["mad"] = d / "mad.model"
    assert run("fit", "mad", "--data", data, "--lambda1", 0.05, "--lambda2", 0.05, "--eps", 0.1,
               "--gamma", 1, "--out", paths["mad"]) == 0
    return paths


def test_fit_kinds(fitted):
    iqr = persist.load_model(fitted["iqr"])
    assert isinstance(iqr, CombinationModel) and iqr.weights == (-1.0, 1.0) and iqr.taus == (0.25, 0.75)
    asym = persist.load_model(fitted["asym"])
    assert asym.weights == (1.0, -2.0, 1.0)
    mad = persist.load_model(fitted["mad"])
    assert isinstance(mad, MadModel) and mad.epsilon == 0.1
    assert mad.median_model.lam == 0.05 and mad.residual_model.lam == 0.05
    assert persist.read_provenance(fitted["mad"])["seed"] == "0"


def test_curves_five_quantiles_give_six_columns(fitted, tmp_path):
    out = tmp_path / "curves.csv"
    models = [fitted[t] for t in (0.05, 0.25, 0.5, 0.75, 0.95)]
    assert run("curves", "--model", *models, "--grid-n", 50, "--out", out) == 0
    header, rows = read_table(out)
    assert header == ["x", "q05", "q25", "q50", "q75", "q95"]
    assert len(rows) == 50 and all(len(r) == 6 for r in rows)


def test_curves_double_mad(fitted, tmp_path, capsys):
    out = tmp_path / "w.csv"
    assert run("curves", "--model", fitted["iqr"], fitted["mad"], "--double-mad",
               "--grid-min", -0.5, "--grid-max", 1.0, "--grid-n", 20, "--out", out) == 0
    assert "outside the training inputs" in capsys.readouterr().err
    header, rows = read_table(out)
    assert header == ["x", "iqr", "2xMAD_mad"]
    mad = persist.load_model(fitted["mad"])
    x = np.array([float(r[0]) for r in rows])
    np.testing.assert_array_equal([float(r[2]) for r in rows], 2 * mad.predict(x))


def test_curves_empty_grid(fitted, tmp_path):
    grid = tmp_path / "grid.csv"
    grid.write_text("x\n")
    assert run("curves", "--model", fitted["iqr"], "--grid-file", grid, "--out", tmp_path / "o.csv") == 2
    assert run("curves", "--model", fitted["iqr"], "--grid-n", 0, "--out", tmp_path / "o.csv") == 2


def test_predict_and_evaluate(fitted, data, tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert run("predict", "--model", fitted[0.5], "--data", data, "--out", out) == 0
    header, rows = read_table(out)
    assert header == ["x", "prediction"] and len(rows) == 300
    capsys.readouterr()
    assert run("evaluate", "--model", fitted["mad"], "--data", data) == 0
    lines = capsys.readouterr().out.split()
    keys = [l.split("=")[0] for l in lines]
    assert keys == ["median_risk", "mad_risk_pinball", "mad_risk_smoothed"]


def test_select_single_cell(data, capsys):
    assert run("select", "--data", data, "--lambdas", 0.01, "--gammas", 5, "--folds", 3) == 0
    cap = capsys.readouterr()
    header, rows = read_table(cap.out)
    assert len(rows) == 1 and rows[0][3] == "ok"
    assert "best lambda=0.01 gamma=5.0" in cap.err


def test_select_smoke_picks_grid_minimum(data, capsys):
    assert run("select", "--data", data, "--lambdas", "1e-3,1e-1", "--gammas", "0.1,10", "--folds", 4) == 0
    cap = capsys.readouterr()
    _, rows = read_table(cap.out)
    risks = [float(r[2]) for r in rows]
    chosen = float(cap.err.split("risk=")[1])
    assert chosen <= 1.05 * min(risks)


def test_tie_rule_prefers_larger_lambda():
    cells = [{"lambda": 0.01, "gamma": 1.0, "risk": 0.3}, {"lambda": 0.1, "gamma": 2.0, "risk": 0.3},
             {"lambda": 0.1, "gamma": 1.0, "risk": 0.3}, {"lambda": 1.0, "gamma": 1.0, "risk": float("inf")}]
    assert best_cell(cells) == {"lambda": 0.1, "gamma": 1.0, "risk": 0.3}


def test_converge_report(tmp_path):
    out = tmp_path / "conv.csv"
    assert run("converge", "--sizes", "40,80", "--gamma", 5, "--eval-size", 500, "--out", out) == 0
    text = out.read_text()
    assert text.startswith("# schedule")
    header, rows = read_table(out)
    assert header[0] == "n" and [r[0] for r in rows] == ["40", "80"]


def test_converge_rejects_bad_schedule(tmp_path):
    assert run("converge", "--e1", 0.3, "--e2", 0.3, "--out", tmp_path / "c.csv") == 2


def test_config_file_and_flag_override(data, tmp_path):
    cfg = tmp_path / "fit.cfg"
    cfg.write_text(f"# fit settings\ndata = {data}\nlambda = 0.2\ngamma = 3\nout = {tmp_path / 'a.model'}\n")
    assert run("fit", "quantile", "--config", cfg) == 0
    assert persist.load_model(tmp_path / "a.model").lam == 0.2
    assert run("fit", "quantile", "--config", cfg, "--lambda", 0.3) == 0
    assert persist.load_model(tmp_path / "a.model").lam == 0.3
    bad = tmp_path / "bad.cfg"
    bad.write_text("frobnicate = 1\n")
    assert run("fit", "quantile", "--config", bad) == 2


def test_exit_codes_for_io_and_solver(data, tmp_path):
    assert run("predict", "--model", tmp_path / "missing.model", "--data", data) == 3
    broken = tmp_path / "broken.model"
    broken.write_text("SCALEFIT-MODEL v9\n")
    assert run("predict", "--model", broken, "--data", data) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n3,oops\n")
    assert run("fit", "quantile", "--data", bad, "--out", tmp_path / "m.model") == 3
    assert run("fit", "quantile", "--data", data, "--lambda", 1e-4, "--gamma", 10, "--max-iter", 1,
               "--tol", 1e-14, "--out", tmp_path / "m.model") == 4
