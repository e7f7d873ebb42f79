import stat
import sys
import textwrap

import numpy as np
import pytest

from fairaudit.ci_metrics import audit
from fairaudit.dataset import AttributeSpec, Dataset, DatasetSchema
from fairaudit.errors import ClassVanishedEntirely, MalformedPredictionFile, SubprocessFailure, TooFewRecords
from fairaudit.learner import (
    CellMajorityModel,
    CVConfig,
    LogisticModel,
    PredictorSpec,
    ensure_label_coverage,
    external_predict,
    fit_cv,
    fold_assignment,
    write_protocol_csv,
)

from conftest import make_dataset
from oracles import has_linear_separator


@pytest.fixture
def cells():
    rows = [("a", "x", "1")] * 2 + [("a", "x", "0")] + [("b", "y", "0")] * 3 + [("a", "y", "1")] * 3 + [("b", "x", "1")] * 3
    return make_dataset(rows, prediction=False)


class TestFolds:
    @pytest.mark.parametrize("n, k", [(3, 3), (10, 3), (11, 4), (100, 2)])
    def test_partition_and_balance(self, n, k):
        f = fold_assignment(n, CVConfig(k, seed=9))
        sizes = np.bincount(f, minlength=k)
        assert sizes.sum() == n and sizes.max() - sizes.min() <= 1

    def test_deterministic(self):
        assert np.array_equal(fold_assignment(50, CVConfig(3, 1)), fold_assignment(50, CVConfig(3, 1)))
        assert not np.array_equal(fold_assignment(50, CVConfig(3, 1)), fold_assignment(50, CVConfig(3, 2)))

    def test_too_few(self):
        with pytest.raises(TooFewRecords):
            fold_assignment(2, CVConfig(3))


class TestCellMajority:
    def test_unanimous_and_majority_cells(self, cells):
        model = CellMajorityModel().fit(cells)
        preds = model.predict(cells)
        # majority oracle per cell computed by hand
        expected = {("a", "x"): "1", ("b", "y"): "0", ("a", "y"): "1", ("b", "x"): "1"}
        for r, s, p in zip(cells.attributes["race"], cells.attributes["sex"], preds):
            assert p == expected[(r, s)]

    def test_full_dataset_accuracy_by_hand(self, cells):
        preds = CellMajorityModel().fit(cells).predict(cells)
        assert np.mean(preds == cells.labels) == pytest.approx(11 / 12)

    def test_tie_goes_to_smallest_class(self):
        ds = make_dataset([("a", "x", "1"), ("a", "x", "0")], prediction=False)
        assert CellMajorityModel().fit(ds).predict(ds).tolist() == ["0", "0"]

    def test_unseen_cell_uses_global_majority(self):
        train = make_dataset([("a", "x", "1"), ("a", "x", "1"), ("b", "y", "0")], prediction=False)
        test = make_dataset([("b", "x", "0")], prediction=False)
        assert CellMajorityModel().fit(train).predict(test).tolist() == ["1"]

    def test_single_class_dataset(self):
        ds = make_dataset([("a", "x", "1"), ("b", "y", "1"), ("a", "y", "1"), ("b", "x", "1")], prediction=False)
        ens = fit_cv(ds, PredictorSpec(), CVConfig(3, 0))
        assert ens.predictions.shape == (3, 4) and np.all(ens.predictions == "1")
        assert audit(ds, predictions=ens.predictions).overall.m == 1.0


class TestLogistic:
    def test_separable_toy(self):
        rng = np.random.default_rng(0)
        cand = rng.uniform(-1, 1, size=(200, 2))
        score = cand[:, 0] + 0.5 * cand[:, 1] - 0.1
        pts = cand[np.abs(score) > 0.2][:20]  # keep a visible margin
        labels = (pts[:, 0] + 0.5 * pts[:, 1] > 0.1).astype(int)
        assert has_linear_separator([tuple(p) for p in pts], labels.tolist())
        schema = DatasetSchema((AttributeSpec("g", categories=("u",)),), "label", feature_columns=("x1", "x2"))
        ds = Dataset(schema, {"g": ["u"] * 20}, labels.astype(str), None, {"x1": pts[:, 0], "x2": pts[:, 1]})
        model = LogisticModel(learning_rate=0.1, epochs=200, l2=1e-4).fit(ds)
        acc = np.mean(model.predict(ds) == ds.labels)
        assert acc >= 0.95

    def test_multiclass_and_categorical_features(self):
        schema = DatasetSchema((AttributeSpec("g", categories=("u", "v")),), "label", feature_columns=("f",))
        f = np.array(["p", "q", "r"] * 10)
        labels = np.array(["A", "B", "C"] * 10)
        ds = Dataset(schema, {"g": ["u", "v"] * 15}, labels, None, {"f": f})
        model = LogisticModel(learning_rate=0.5, epochs=300).fit(ds)
        assert np.mean(model.predict(ds) == labels) == 1.0

    def test_deterministic(self, cells):
        spec = PredictorSpec("logistic")
        a = fit_cv(cells, spec, CVConfig(3, 4)).predictions
        b = fit_cv(cells, spec, CVConfig(3, 4)).predictions
        assert np.array_equal(a, b)


class TestLabelCoverage:
    def test_rare_class_restored(self):
        labels = ["common"] * 8 + ["rare", "rare"]
        ds = make_dataset([("a", "x", l) for l in labels], prediction=False)
        train = list(range(8))
        assert ensure_label_coverage(train, ds, [8, 9]).tolist() == list(range(9))
        assert ensure_label_coverage(train, ds, [8, 9], restore_all=True).tolist() == list(range(10))

    def test_noop(self, cells):
        train = list(range(0, 12, 2)) + [1]
        assert ensure_label_coverage(train, cells, [3, 5]).tolist() == sorted(train)

    def test_single_removed_record(self):
        ds = make_dataset([("a", "x", "0"), ("a", "x", "0"), ("a", "x", "1")], prediction=False)
        assert ensure_label_coverage([0, 1], ds, [2]).tolist() == [0, 1, 2]

    def test_vanished(self):
        ds = make_dataset([("a", "x", "0"), ("a", "x", "1")], prediction=False)
        with pytest.raises(ClassVanishedEntirely):
            ensure_label_coverage([0], ds, [])


def _script(tmp_path, body, name="pred.py"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return f"{sys.executable} {path}"


ARGS = """
import argparse, csv
ap = argparse.ArgumentParser()
ap.add_argument('--train'); ap.add_argument('--test'); ap.add_argument('--out')
a = ap.parse_args()
rows = list(csv.DictReader(open(a.test)))
"""


class TestExternal:
    def _csvs(self, tmp_path, ds):
        train, test = tmp_path / "train.csv", tmp_path / "test.csv"
        write_protocol_csv(ds, train, include_label=True)
        write_protocol_csv(ds, test, include_label=False)
        return train, test

    def test_constant_predictor(self, tmp_path, cells):
        cmd = _script(tmp_path, ARGS + "w = csv.writer(open(a.out, 'w'))\nw.writerow(['prediction'])\nfor r in rows: w.writerow(['1'])\n")
        preds = external_predict(cmd, *self._csvs(tmp_path, cells))
        assert preds.tolist() == ["1"] * cells.n

    def test_oracle_predictor_via_fit_cv(self, tmp_path, cells):
        # reads the true labels from a side file keyed by row order
        (tmp_path / "truth.txt").write_text("\n".join(cells.labels.tolist()))
        cmd = _script(
            tmp_path,
            ARGS
            + f"truth = open({str(tmp_path / 'truth.txt')!r}).read().split()\n"
            + "w = csv.writer(open(a.out, 'w'))\nw.writerow(['prediction'])\nfor t in truth[:len(rows)]: w.writerow([t])\n",
        )
        ens = fit_cv(cells, PredictorSpec("external", command=cmd), CVConfig(3, 0))
        assert audit(cells, predictions=ens.predictions).overall.m == 1.0

    def test_placeholders(self, tmp_path, cells):
        body = (
            "import sys, csv\nrows = list(csv.DictReader(open(sys.argv[2])))\n"
            "w = csv.writer(open(sys.argv[3], 'w'))\nw.writerow(['prediction'])\nfor r in rows: w.writerow(['0'])\n"
        )
        cmd = _script(tmp_path, body) + " {train} {test} {out}"
        assert set(external_predict(cmd, *self._csvs(tmp_path, cells)).tolist()) == {"0"}

    def test_row_count_mismatch(self, tmp_path, cells):
        cmd = _script(tmp_path, ARGS + "w = csv.writer(open(a.out, 'w'))\nw.writerow(['prediction'])\nw.writerow(['1'])\n")
        with pytest.raises(MalformedPredictionFile):
            external_predict(cmd, *self._csvs(tmp_path, cells))

    def test_bad_header(self, tmp_path, cells):
        cmd = _script(tmp_path, ARGS + "open(a.out, 'w').write('pred\\n' + '1\\n' * len(rows))\n")
        with pytest.raises(MalformedPredictionFile):
            external_predict(cmd, *self._csvs(tmp_path, cells))

    def test_failure_exit_code(self, tmp_path, cells):
        cmd = _script(tmp_path, "import sys\nsys.exit(7)\n")
        with pytest.raises(SubprocessFailure) as err:
            external_predict(cmd, *self._csvs(tmp_path, cells))
        assert err.value.returncode == 7

    def test_protocol_column_order(self, tmp_path):
        ds = make_dataset([("a", "x", "1")], features={"f": ["q"]}, prediction=False)
        path = tmp_path / "t.csv"
        write_protocol_csv(ds, path, include_label=True)
        assert path.read_text().splitlines()[0] == "race,sex,f,label"
