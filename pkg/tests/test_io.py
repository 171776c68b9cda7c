import json

import jsonschema
import numpy as np
import pytest

from cdacal import io
from cdacal.calibrate import cda_temperature
from cdacal.core import ClassFrequencyProfile, LogitSet, ProbSet, TemperatureVector
from cdacal.datagen import SyntheticSpec, sample_gaussian_mixture
from cdacal.distill import init_model
from cdacal.errors import ParseError
from cdacal.metrics import metric_report
from cdacal.pipeline import comparison_doc
from cdacal.schemas import NAMES, load_schema
from cdacal.smooth import SmoothingVector


@pytest.fixture
def logits(rng):
    return LogitSet(rng.normal(size=(7, 4)) * 3, rng.integers(0, 4, 7))


def test_binary_logits_round_trip(tmp_path, logits):
    io.save_logits(logits, tmp_path / "l.json")
    back = io.load_logits(tmp_path / "l.json")
    assert np.array_equal(back.values, logits.values)
    assert np.array_equal(back.labels, logits.labels)


def test_csv_logits_round_trip(tmp_path, logits):
    io.save_logits(logits, tmp_path / "l.csv")
    back = io.load_logits(tmp_path / "l.csv")
    assert np.array_equal(back.values, logits.values)
    assert (tmp_path / "l.csv").read_text().splitlines()[0] == "label,logit_0,logit_1,logit_2,logit_3"


def test_csv_and_f32_binary_agree_to_float32_ulp(tmp_path, logits):
    io.save_logits(logits, tmp_path / "a.csv")
    io.save_logits(logits, tmp_path / "b.json", dtype="f32")
    a = io.load_logits(tmp_path / "a.csv").values
    b = io.load_logits(tmp_path / "b.json").values
    assert np.all(np.abs(a - b) <= np.spacing(np.abs(a).astype(np.float32)).astype(np.float64))


def test_truncated_payload(tmp_path, logits):
    io.save_logits(logits, tmp_path / "l.json")
    raw = (tmp_path / "l.bin").read_bytes()
    (tmp_path / "l.bin").write_bytes(raw[:-3])
    with pytest.raises(ParseError, match=f"expected {len(raw)} bytes"):
        io.load_logits(tmp_path / "l.json")


def test_non_finite_payload_reports_row(tmp_path):
    values = np.zeros((3, 2))
    values[2, 1] = np.nan
    io.save_matrix(tmp_path / "x.json", values, [0, 1, 0])
    with pytest.raises(ParseError, match="row 2"):
        io.load_logits(tmp_path / "x.json")


def test_csv_label_out_of_range(tmp_path):
    (tmp_path / "l.csv").write_text("label,logit_0,logit_1\n0,1.0,2.0\n2,0.5,0.1\n")
    with pytest.raises(ParseError, match="row 1: label 2"):
        io.load_logits(tmp_path / "l.csv")


@pytest.mark.parametrize("text", [
    "",
    "y,logit_0\n0,1\n",
    "label,logit_0,logit_1\n0,1.0\n",
    "label,logit_0,logit_1\n0,abc,1\n",
    "label,logit_0,logit_1\n0,inf,1\n",
    "label,logit_0,logit_1\n",
])
def test_csv_malformed(tmp_path, text):
    (tmp_path / "l.csv").write_text(text)
    with pytest.raises(ParseError):
        io.load_logits(tmp_path / "l.csv")


def test_missing_files(tmp_path):
    with pytest.raises(ParseError):
        io.load_logits(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ParseError):
        io.read_json(tmp_path / "bad.json")


def test_kind_is_checked(tmp_path, logits):
    io.save_logits(logits, tmp_path / "l.json")
    with pytest.raises(ParseError, match="expected a probs file"):
        io.load_probs(tmp_path / "l.json")


def test_probs_round_trip(tmp_path):
    p = ProbSet(np.array([[0.2, 0.8], [0.5, 0.5]]), [1, 0])
    io.save_probs(p, tmp_path / "p.json")
    back = io.load_probs(tmp_path / "p.json")
    assert np.array_equal(back.values, p.values)


def test_label_file(tmp_path):
    io.write_labels([3, 0, 1], tmp_path / "y.labels")
    assert io.read_labels(tmp_path / "y.labels").tolist() == [3, 0, 1]
    (tmp_path / "bad.labels").write_text("1\nx\n")
    with pytest.raises(ParseError, match="row 1"):
        io.read_labels(tmp_path / "bad.labels")


def test_dataset_round_trip(tmp_path):
    ds = sample_gaussian_mixture(SyntheticSpec(max_per_class=80, imbalance_ratio=8, feature_dim=5, test_per_class=4))
    io.save_dataset(ds, tmp_path / "d")
    back = io.load_dataset(tmp_path / "d")
    # rows come back grouped by split, in their original order within each split
    for name in ("train", "val", "test"):
        a, b = getattr(ds, name)(), getattr(back, name)()
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
    header = json.loads((tmp_path / "d" / "train.json").read_text())
    assert {"m", "d", "n_classes", "seed", "counts"} <= set(header)
    assert header["dtype"] == "f32"
    single = io.load_dataset(tmp_path / "d" / "val.json")
    assert len(single) == len(ds.val())


def test_dataset_counts_checked(tmp_path):
    ds = sample_gaussian_mixture(SyntheticSpec(max_per_class=40, imbalance_ratio=4, feature_dim=3))
    io.save_dataset(ds, tmp_path)
    header = json.loads((tmp_path / "train.json").read_text())
    header["counts"][0] += 1
    (tmp_path / "train.json").write_text(json.dumps(header))
    with pytest.raises(ParseError, match="counts"):
        io.load_dataset(tmp_path)


@pytest.mark.parametrize("hidden", [0, 3])
def test_model_round_trip(tmp_path, hidden):
    model = init_model(4, 6, np.random.default_rng(0), hidden=hidden, scale=1.0)
    io.save_model(model, tmp_path / "m.json")
    back = io.load_model(tmp_path / "m.json")
    for k, v in model.params().items():
        assert np.array_equal(back.params()[k], v)


def test_temperatures_round_trip(tmp_path):
    prof = ClassFrequencyProfile([10, 5, 1])
    temps = cda_temperature(1.5, prof)
    io.dump_json(io.temperatures_doc(1.5, temps, 0.1, prof), tmp_path / "t.json")
    back, doc = io.load_temperatures(tmp_path / "t.json")
    assert np.array_equal(back.t, temps.t)
    assert doc["source_profile"] == [10, 5, 1]
    assert io.load_profile(tmp_path / "t.json").counts.tolist() == [10, 5, 1]


def test_documents_match_schemas(tmp_path, logits):
    validate = lambda doc, name: jsonschema.validate(doc, load_schema(name))
    probs = ProbSet(np.array([[0.2, 0.8], [0.5, 0.5]]), [1, 0])
    validate(metric_report(probs), "metrics_report")
    validate(io.temperatures_doc(1.2, TemperatureVector.constant(1.2, 2)), "temperatures")
    validate(io.smoothing_doc(0.1, 0.01, SmoothingVector([0.11, 0.101])), "smoothing")
    validate(comparison_doc([{"method": "TS", "acc": 0.5, "ece": 0.1, "sce": 0.1, "tace": 0.1,
                              "brier": 0.3, "uce": 0.1, "nll": 0.7}]), "comparison")
    io.save_logits(logits, tmp_path / "l.json")
    validate(json.loads((tmp_path / "l.json").read_text()), "matrix_header")
    io.save_model(init_model(2, 3, np.random.default_rng(0)), tmp_path / "m.json")
    validate(json.loads((tmp_path / "m.json").read_text()), "model_header")


def test_every_schema_is_valid_json_schema():
    for name in NAMES:
        jsonschema.Draft202012Validator.check_schema(load_schema(name))


def test_rows_csv(tmp_path):
    io.write_rows_csv([{"a": 1, "b": None, "c": True, "d": 0.1}], ["a", "b", "c", "d"], tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == "a,b,c,d\n1,,1,0.1\n"
