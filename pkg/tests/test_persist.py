import os
from pathlib import Path

import numpy as np
import pytest

from scalefit import persist, synth
from scalefit.errors import CSVParseError, InputError, ModelFormatError, ModelIntegrityError, ModelVersionError
from scalefit.estimators import MadModel, fit_asymmetry, fit_mad, fit_quantile
from scalefit.kernels import KernelSpec
from scalefit.solver import FitConfig, QuantileModel
from scalefit.synth import GeneratorSpec

RBF = KernelSpec(gamma=10.0)
PROBES = np.linspace(-0.1, 1.1, 20)


@pytest.fixture(scope="module")
def models():
    data = synth.sample(GeneratorSpec(seed=21), 120)
    return {
        "quantile": fit_quantile(data, 0.3, RBF, FitConfig(1e-2)),
        "combination": fit_asymmetry(data, RBF, FitConfig(1e-2), taus=(0.1, 0.5, 0.9)),
        "mad": fit_mad(data, RBF, FitConfig(1e-2), KernelSpec(gamma=3.0), FitConfig(2e-2), epsilon=0.05),
    }


def test_two_row_csv(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x,y\n1,2\n3,4\n")
    d = persist.load_csv(p)
    assert d.X.tolist() == [[1.0], [3.0]] and d.y.tolist() == [2.0, 4.0]


def test_csv_column_selection_and_delimiter(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("1\t2\t3\n4\t5\t6\n")
    d = persist.load_csv(p, delimiter="\t", header=False, x_columns=[2], y_column=0)
    assert d.X.tolist() == [[3.0], [6.0]] and d.y.tolist() == [1.0, 4.0]


def test_malformed_number_names_line(tmp_path):
    rows = ["x,y"] + [f"{i},{i}" for i in range(5)] + ["5,abc"]
    p = tmp_path / "bad.csv"
    p.write_text("\n".join(rows) + "\n")
    with pytest.raises(CSVParseError, match="line 7") as info:
        persist.load_csv(p)
    assert info.value.line == 7


def test_missing_column_and_empty_file(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x,y\n1,2\n")
    with pytest.raises(InputError):
        persist.load_csv(p, y_column=5)
    (tmp_path / "e.csv").write_text("x,y\n")
    with pytest.raises(CSVParseError):
        persist.load_csv(tmp_path / "e.csv")


def test_write_then_read_csv(tmp_path):
    d = synth.sample(GeneratorSpec(seed=1), 30)
    persist.write_csv(d, tmp_path / "d.csv")
    back = persist.load_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.X, d.X)
    np.testing.assert_array_equal(back.y, d.y)


@pytest.mark.parametrize("kind", ["quantile", "combination", "mad"])
def test_round_trip_is_exact(models, kind, tmp_path):
    m = models[kind]
    path = tmp_path / f"{kind}.model"
    persist.save_model(m, path, {"seed": 21})
    back = persist.load_model(path)
    assert type(back) is type(m)
    assert np.array_equal(back.predict(PROBES), m.predict(PROBES))
    assert persist.read_provenance(path) == {"seed": "21"}


def test_serialization_is_deterministic(models):
    m = models["mad"]
    assert persist.serialize(m, {"a": 1}) == persist.serialize(m, {"a": 1})


def test_round_trip_keeps_metadata(models):
    m = models["quantile"]
    back = persist.deserialize(persist.serialize(m))
    assert back.kernel == m.kernel and back.loss == m.loss and back.lam == m.lam
    assert back.objective_value == m.objective_value
    assert back.report.iterations == m.report.iterations and back.report.converged


def test_mad_stages_load_independently(models, tmp_path):
    m = models["mad"]
    path = tmp_path / "mad.model"
    persist.save_model(m, path)
    med = persist.load_model(path, part="median")
    res = persist.load_model(path, part="residual")
    assert isinstance(med, QuantileModel) and isinstance(res, QuantileModel)
    assert np.array_equal(med.predict(PROBES), m.median_model.predict(PROBES))
    assert np.array_equal(res.predict(PROBES), m.residual_model.predict(PROBES))
    assert res.loss.family == "smoothed_pinball" and res.loss.epsilon == 0.05
    with pytest.raises(InputError):
        persist.load_model(path, part="nope")
    assert isinstance(persist.load_model(path), MadModel)


def test_version_mismatch(models):
    text = persist.serialize(models["quantile"]).replace("SCALEFIT-MODEL v1", "SCALEFIT-MODEL v2", 1)
    with pytest.raises(ModelVersionError):
        persist.deserialize(text)


def test_truncation_and_tampering(models):
    text = persist.serialize(models["combination"])
    lines = text.splitlines(keepends=True)
    with pytest.raises(ModelIntegrityError):
        persist.deserialize("".join(lines[: len(lines) // 2]))
    tampered = text.replace("row ", "row 1", 1)
    with pytest.raises(ModelIntegrityError):
        persist.deserialize(tampered)
    with pytest.raises(ModelFormatError):
        persist.deserialize("hello\n")


LIDAR = os.environ.get("SCALEFIT_LIDAR")


@pytest.mark.skipif(not (LIDAR and Path(LIDAR).exists()), reason="set SCALEFIT_LIDAR to the LIDAR CSV")
def test_lidar_fixture_size():
    assert persist.load_csv(LIDAR).n == 221
